#pragma once

#include "cmtk/eqcons.hpp"

#include <algorithm>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

namespace cmtk {

// ---------------------------------------------------------------------------
// Def(L,T) at desk scale: objects are predicates passing the definability
// criterion on a registered finite model suite; morphisms are equivalence
// classes of graph formulas inducing the same function on every suite model.

struct DefObject {
  std::string name;
  DefinablePredicate pred;
};

struct DefMorphism {
  std::string name;
  size_t src = 0, dst = 0;
  DefinableFunction fn;
  std::vector<std::string> aliases;  // representatives identified into this class
};

struct DefCategory {
  Theory theory;
  std::vector<FiniteStructure> suite;
  std::vector<DefObject> objects;
  std::vector<DefMorphism> morphisms;
  std::map<size_t, size_t> identity_of;                        // object -> morphism
  std::vector<std::tuple<size_t, size_t, size_t>> compositions;  // (f, g, g after f)
  Report build_report;

  std::vector<const FiniteStructure*> suite_ptrs() const {
    std::vector<const FiniteStructure*> out;
    for (const auto& m : suite) out.push_back(&m);
    return out;
  }
  size_t object_index(const std::string& name) const {
    for (size_t i = 0; i < objects.size(); ++i)
      if (objects[i].name == name) return i;
    throw CmtkError("unknown object: " + name);
  }
  std::optional<size_t> morphism_index(const std::string& name) const {
    for (size_t i = 0; i < morphisms.size(); ++i) {
      if (morphisms[i].name == name) return i;
      for (const auto& a : morphisms[i].aliases)
        if (a == name) return i;
    }
    return std::nullopt;
  }
};

inline DefCategory make_defcat(Theory theory, std::vector<FiniteStructure> suite) {
  if (suite.empty()) throw CmtkError("a definable-set category needs a model suite");
  DefCategory cat;
  cat.theory = std::move(theory);
  cat.suite = std::move(suite);
  cat.build_report.command = "defcat";
  cat.build_report.what = "build";
  for (size_t mi = 0; mi < cat.suite.size(); ++mi)
    for (const auto& ax : cat.theory.axioms) {
      auto sat = satisfies(cat.suite[mi], ax.sentence);
      cat.build_report.add_check(
          "suite model " + std::to_string(mi) + " satisfies " +
              (ax.label.empty() ? print_formula(ax.sentence) : ax.label),
          sat.satisfied, sat.value.str());
    }
  // the empty product is always present
  DefObject one;
  one.name = "1";
  one.pred = DefinablePredicate::single(f_const(Rat(0)), {});
  cat.objects.push_back(std::move(one));
  return cat;
}

inline size_t add_object(DefCategory& cat, const std::string& name, DefinablePredicate pred) {
  auto suite = cat.suite_ptrs();
  DefinabilityCheck crit = check_syntactic_definability(suite, pred);
  cat.build_report.add_check("object " + name + " definable", crit.passed);
  if (!crit.passed)
    throw PrerequisiteError("object " + name + " fails the definability criterion", crit.report);
  cat.objects.push_back(DefObject{name, std::move(pred)});
  return cat.objects.size() - 1;
}

// Registers a graph formula as a morphism; graph formulas inducing the same
// function on every suite model land in one class.
inline size_t add_morphism(DefCategory& cat, const std::string& name, size_t src, size_t dst,
                           DefinableFunction fn) {
  auto suite = cat.suite_ptrs();
  FunctionCheck ck = check_definable_function(suite, fn);
  if (!ck.ok)
    throw PrerequisiteError("morphism " + name + " is not a definable function on the suite",
                            ck.report);
  for (size_t i = 0; i < cat.morphisms.size(); ++i) {
    if (cat.morphisms[i].src != src || cat.morphisms[i].dst != dst) continue;
    if (morphism_equal(suite, cat.morphisms[i].fn, fn).equal) {
      cat.morphisms[i].aliases.push_back(name);
      return i;
    }
  }
  cat.morphisms.push_back(DefMorphism{name, src, dst, std::move(fn), {}});
  return cat.morphisms.size() - 1;
}

inline size_t add_morphism(DefCategory& cat, const std::string& name, size_t src, size_t dst,
                           const Formula& graph) {
  const DefObject& A = cat.objects[src];
  const DefObject& B = cat.objects[dst];
  std::set<std::string> taken;
  for (const auto& v : A.pred.context) taken.insert(v.name);
  bool clash = false;
  for (const auto& v : B.pred.context) clash = clash || taken.count(v.name) > 0;
  DefinablePredicate target =
      clash ? rename_context(B.pred, fresh_context(B.pred.context, taken)) : B.pred;
  return add_morphism(cat, name, src, dst,
                      make_definable_function(A.pred, target, graph));
}

inline size_t add_identity(DefCategory& cat, size_t obj) {
  auto it = cat.identity_of.find(obj);
  if (it != cat.identity_of.end()) return it->second;
  DefinableFunction id = identity_function(cat.objects[obj].pred, cat.theory.signature);
  size_t idx = add_morphism(cat, "id_" + cat.objects[obj].name, obj, obj, std::move(id));
  cat.identity_of[obj] = idx;
  return idx;
}

// g after f, recorded for the internal language.
inline size_t compose_in(DefCategory& cat, size_t f, size_t g) {
  const DefMorphism& mf = cat.morphisms[f];
  const DefMorphism& mg = cat.morphisms[g];
  if (mf.dst != mg.src) throw CmtkError("composition source/target mismatch");
  DefinableFunction h = compose_definable(mf.fn, mg.fn);
  size_t idx = add_morphism(cat, mg.name + "_o_" + mf.name, mf.src, mg.dst, std::move(h));
  cat.compositions.emplace_back(f, g, idx);
  return idx;
}

// ---------------------------------------------------------------------------
// Binary products: object max(A,B) over concatenated contexts, with
// verified projection morphisms.

struct ProductInfo {
  size_t object = 0;
  size_t proj1 = 0, proj2 = 0;
};

inline ProductInfo add_product(DefCategory& cat, size_t i, size_t j) {
  // copies: add_object below reallocates cat.objects
  const DefinablePredicate Apred = cat.objects[i].pred;
  const DefinablePredicate Bpred = cat.objects[j].pred;
  const std::string pname = cat.objects[i].name + "_x_" + cat.objects[j].name;
  std::set<std::string> taken;
  for (const auto& v : Apred.context) taken.insert(v.name);
  DefinablePredicate Bp = rename_context(Bpred, fresh_context(Bpred.context, taken));

  std::vector<Variable> ctx = Apred.context;
  ctx.insert(ctx.end(), Bp.context.begin(), Bp.context.end());
  Formula pf;
  if (Apred.context.empty())
    pf = Bp.representative();
  else if (Bp.context.empty())
    pf = Apred.representative();
  else
    pf = f_max(Apred.representative(), Bp.representative());
  DefinablePredicate P = DefinablePredicate::single(std::move(pf), ctx);

  ProductInfo info;
  info.object = add_object(cat, pname, P);

  auto projection = [&](const std::vector<Variable>& block, const DefinablePredicate& orig,
                        size_t dst, const char* suffix) {
    std::set<std::string> used;
    for (const auto& v : ctx) used.insert(v.name);
    if (block.empty()) {
      // projection onto the empty product
      Formula graph = P.representative();
      return add_morphism(cat, pname + suffix, info.object, dst,
                          make_definable_function(P, DefinablePredicate::single(f_const(Rat(0)), {}),
                                                  std::move(graph)));
    }
    std::vector<Variable> fresh = fresh_context(block, used);
    DefinablePredicate tgt = rename_context(orig, fresh);
    Formula graph =
        f_max(P.representative(), max_metric_formula(cat.theory.signature, block, fresh));
    return add_morphism(cat, pname + suffix, info.object, dst,
                        make_definable_function(P, std::move(tgt), std::move(graph)));
  };
  info.proj1 = projection(Apred.context, Apred, i, "_pi1");
  info.proj2 = projection(Bp.context, Bpred, j, "_pi2");
  return info;
}

// The universal pairing <f, g> : C -> A x B of morphisms into the factors.
inline size_t add_pairing(DefCategory& cat, size_t f, size_t g, const ProductInfo& prod) {
  const DefMorphism& mf = cat.morphisms[f];
  const DefMorphism& mg = cat.morphisms[g];
  if (mf.src != mg.src) throw CmtkError("pairing needs a common source");
  const DefObject& C = cat.objects[mf.src];
  const DefObject& P = cat.objects[prod.object];

  std::set<std::string> taken;
  for (const auto& v : C.pred.context) taken.insert(v.name);
  std::vector<Variable> pctx = fresh_context(P.pred.context, taken);

  // align f's graph target block and g's onto the product context blocks
  size_t asize = mf.fn.target.context.size();
  std::vector<Variable> ablock(pctx.begin(), pctx.begin() + asize);
  std::vector<Variable> bblock(pctx.begin() + asize, pctx.end());

  auto align = [&](const DefinableFunction& fn, const std::vector<Variable>& block) {
    std::vector<Variable> pattern = fn.source.context;
    pattern.insert(pattern.end(), fn.target.context.begin(), fn.target.context.end());
    std::vector<Term> repl;
    for (const auto& v : C.pred.context) repl.push_back(Term::make_var(v));
    for (const auto& v : block) repl.push_back(Term::make_var(v));
    return substitute_simultaneous(fn.graph, pattern, repl);
  };
  Formula graph = f_max(align(mf.fn, ablock), align(mg.fn, bblock));
  DefinablePredicate tgt = rename_context(P.pred, pctx);
  return add_morphism(cat, "pair_" + mf.name + "_" + mg.name, mf.src, prod.object,
                      make_definable_function(C.pred, std::move(tgt), std::move(graph)));
}

// ---------------------------------------------------------------------------
// Law checks

inline Report check_category_laws(const DefCategory& cat) {
  Report rep;
  rep.command = "defcat";
  rep.what = "laws";
  auto suite = cat.suite_ptrs();

  std::vector<std::string> idbad;
  for (const auto& [obj, idm] : cat.identity_of) {
    for (size_t m = 0; m < cat.morphisms.size(); ++m) {
      const DefMorphism& f = cat.morphisms[m];
      if (f.src == obj) {
        DefinableFunction left = compose_definable(cat.morphisms[idm].fn, f.fn);
        if (!morphism_equal(suite, left, f.fn).equal)
          idbad.push_back(f.name + " after id_" + cat.objects[obj].name + " differs");
      }
      if (f.dst == obj) {
        DefinableFunction right = compose_definable(f.fn, cat.morphisms[idm].fn);
        if (!morphism_equal(suite, right, f.fn).equal)
          idbad.push_back("id_" + cat.objects[obj].name + " after " + f.name + " differs");
      }
    }
  }
  rep.add_check("identity laws", idbad.empty(), "", idbad);

  std::vector<std::string> asbad;
  for (size_t f = 0; f < cat.morphisms.size(); ++f)
    for (size_t g = 0; g < cat.morphisms.size(); ++g) {
      if (cat.morphisms[f].dst != cat.morphisms[g].src) continue;
      for (size_t h = 0; h < cat.morphisms.size(); ++h) {
        if (cat.morphisms[g].dst != cat.morphisms[h].src) continue;
        DefinableFunction gf = compose_definable(cat.morphisms[f].fn, cat.morphisms[g].fn);
        DefinableFunction hg = compose_definable(cat.morphisms[g].fn, cat.morphisms[h].fn);
        DefinableFunction left = compose_definable(gf, cat.morphisms[h].fn);
        DefinableFunction right = compose_definable(cat.morphisms[f].fn, hg);
        if (!morphism_equal(suite, left, right).equal)
          asbad.push_back("associativity fails on (" + cat.morphisms[f].name + ", " +
                          cat.morphisms[g].name + ", " + cat.morphisms[h].name + ")");
      }
    }
  rep.add_check("associativity", asbad.empty(), "", asbad);
  return rep;
}

inline Report check_product_universal(DefCategory& cat, const ProductInfo& prod, size_t f,
                                      size_t g) {
  Report rep;
  rep.command = "defcat";
  rep.what = "product-universal";
  auto suite = cat.suite_ptrs();
  size_t pair = add_pairing(cat, f, g, prod);
  DefinableFunction via1 =
      compose_definable(cat.morphisms[pair].fn, cat.morphisms[prod.proj1].fn);
  DefinableFunction via2 =
      compose_definable(cat.morphisms[pair].fn, cat.morphisms[prod.proj2].fn);
  rep.add_check("pi1 after pairing = f", morphism_equal(suite, via1, cat.morphisms[f].fn).equal);
  rep.add_check("pi2 after pairing = g", morphism_equal(suite, via2, cat.morphisms[g].fn).equal);

  // uniqueness: every morphism with the same projections is the pairing
  std::vector<std::string> bad;
  for (size_t h = 0; h < cat.morphisms.size(); ++h) {
    if (h == pair) continue;
    const DefMorphism& mh = cat.morphisms[h];
    if (mh.src != cat.morphisms[f].src || mh.dst != prod.object) continue;
    DefinableFunction h1 = compose_definable(mh.fn, cat.morphisms[prod.proj1].fn);
    DefinableFunction h2 = compose_definable(mh.fn, cat.morphisms[prod.proj2].fn);
    if (morphism_equal(suite, h1, cat.morphisms[f].fn).equal &&
        morphism_equal(suite, h2, cat.morphisms[g].fn).equal &&
        !morphism_equal(suite, mh.fn, cat.morphisms[pair].fn).equal)
      bad.push_back(mh.name + " shares the projections but differs from the pairing");
  }
  rep.add_check("uniqueness", bad.empty(), "", bad);
  return rep;
}

// Empirical moduli per morphism plus the separation clause: distinct
// morphism classes must sit at positive sup-distance on the suite. A
// failure flags a suite too small to tell the morphisms apart; it is
// reported, not fatal.
inline Report check_metric_logical_category(const DefCategory& cat) {
  Report rep;
  rep.command = "defcat";
  rep.what = "metric-logical-category";
  auto suite = cat.suite_ptrs();

  for (size_t m = 0; m < cat.morphisms.size(); ++m) {
    FunctionCheck ck = check_definable_function(suite, cat.morphisms[m].fn);
    if (!ck.ok) {
      rep.add_check("morphism " + cat.morphisms[m].name + " uniform continuity", false);
      continue;
    }
    Rat worst(0);
    for (const auto& pm : ck.per_model) worst = rat_max(worst, pm.modulus.max_difference);
    rep.add_check("morphism " + cat.morphisms[m].name + " empirical modulus", true,
                  rat_to_string(worst));
  }

  std::vector<std::string> sep;
  for (size_t a = 0; a < cat.morphisms.size(); ++a)
    for (size_t b = a + 1; b < cat.morphisms.size(); ++b) {
      const DefMorphism& ma = cat.morphisms[a];
      const DefMorphism& mb = cat.morphisms[b];
      if (ma.src != mb.src || ma.dst != mb.dst) continue;
      FunctionCheck ca = check_definable_function(suite, ma.fn);
      FunctionCheck cb = check_definable_function(suite, mb.fn);
      if (!ca.ok || !cb.ok) continue;
      Rat sup(0);
      for (size_t mi = 0; mi < suite.size(); ++mi) {
        const auto& pa = ca.per_model[mi];
        const auto& pb = cb.per_model[mi];
        for (size_t si = 0; si < pa.mapping.size(); ++si)
          sup = rat_max(sup, tuple_distance(*suite[mi], ma.fn.target.context,
                                            pa.dst.members[pa.mapping[si]],
                                            pb.dst.members[pb.mapping[si]]));
      }
      if (sup == 0)
        sep.push_back("morphisms " + ma.name + " and " + mb.name +
                      " are at sup-distance 0 on the suite");
    }
  for (const auto& m : cat.morphisms)
    for (const auto& alias : m.aliases)
      sep.push_back("representative " + alias + " was identified with " + m.name +
                    " on this suite");
  rep.add_check(std::string("separation"),
                std::none_of(sep.begin(), sep.end(),
                             [](const std::string& s) { return s.find("sup-distance") != std::string::npos; }),
                "", sep);
  return rep;
}

// ---------------------------------------------------------------------------
// The canonical interpretation of a metric theory in its own category of
// definable sets: sorts become [d(x,x)], functions become graph formulas,
// relations become quotient-algebra elements.

inline bool object_quotient_equal(const DefCategory& cat, size_t obj, const Formula& a,
                                  const Formula& b) {
  const DefObject& A = cat.objects[obj];
  for (const auto& M : cat.suite) {
    ZeroSet z = zero_set(M, A.pred);
    std::vector<Rat> ta = eval_table(M, a, A.pred.context);
    std::vector<Rat> tb = eval_table(M, b, A.pred.context);
    std::vector<std::string> sorts;
    for (const auto& v : A.pred.context) sorts.push_back(v.sort);
    TupleSpace sp = M.space(sorts);
    for (const auto& m : z.members)
      if (ta[sp.encode(m)] != tb[sp.encode(m)]) return false;
  }
  return true;
}

struct AlgebraElement {
  std::string label;
  size_t object = 0;
  Formula formula;
};

struct CanonicalInterpretation {
  DefCategory category;
  std::map<std::string, size_t> sort_object;
  std::map<std::string, size_t> fn_morphism;
  std::vector<AlgebraElement> rel_elements;
};

inline CanonicalInterpretation canonical_interpretation(const Theory& theory,
                                                        std::vector<FiniteStructure> suite) {
  CanonicalInterpretation out;
  out.category = make_defcat(theory, std::move(suite));
  DefCategory& cat = out.category;
  const Signature& sig = theory.signature;

  for (const auto& s : sig.sorts) {
    auto d = sig.metric_of(s);
    if (!d) throw CmtkError("canonical interpretation needs a metric on sort " + s);
    Variable x{"x", s};
    Formula dxx = f_atom(*d, {Term::make_var(x), Term::make_var(x)});
    out.sort_object[s] = add_object(cat, "[" + s + "]", DefinablePredicate::single(dxx, {x}));
    add_identity(cat, out.sort_object[s]);
  }

  for (const auto& f : sig.functions) {
    // source: the product of the domain sort objects (the terminal for constants)
    size_t src;
    std::vector<Variable> srcctx;
    if (f.domain.empty()) {
      src = cat.object_index("1");
    } else if (f.domain.size() == 1) {
      src = out.sort_object[f.domain[0]];
      srcctx = cat.objects[src].pred.context;
    } else {
      size_t acc = out.sort_object[f.domain[0]];
      for (size_t i = 1; i < f.domain.size(); ++i) {
        ProductInfo p = add_product(cat, acc, out.sort_object[f.domain[i]]);
        acc = p.object;
      }
      src = acc;
      srcctx = cat.objects[src].pred.context;
    }
    // graph: d_cod(f(xs), y)
    auto dcod = sig.metric_of(f.codomain);
    std::set<std::string> taken;
    for (const auto& v : srcctx) taken.insert(v.name);
    Variable y = fresh_variable(Variable{"y", f.codomain}, taken);
    std::vector<Term> args;
    for (const auto& v : srcctx) args.push_back(Term::make_var(v));
    Formula graph = f_atom(*dcod, {Term::make_app(f.name, std::move(args)), Term::make_var(y)});

    size_t dst = out.sort_object[f.codomain];
    DefinablePredicate target = rename_context(cat.objects[dst].pred, {y});
    out.fn_morphism[f.name] =
        add_morphism(cat, "a_" + f.name, src, dst,
                     make_definable_function(cat.objects[src].pred, target, std::move(graph)));
  }

  for (const auto& r : sig.relations) {
    if (r.metric_for) continue;  // sort metrics are carried by the objects
    if (r.domain.size() == 1) {
      size_t obj = out.sort_object[r.domain[0]];
      Formula rep = f_atom(r.name, {Term::make_var(cat.objects[obj].pred.context[0])});
      out.rel_elements.push_back(AlgebraElement{r.name, obj, std::move(rep)});
    } else {
      size_t acc = out.sort_object[r.domain[0]];
      for (size_t i = 1; i < r.domain.size(); ++i) {
        ProductInfo p = add_product(cat, acc, out.sort_object[r.domain[i]]);
        acc = p.object;
      }
      std::vector<Term> args;
      for (const auto& v : cat.objects[acc].pred.context) args.push_back(Term::make_var(v));
      out.rel_elements.push_back(
          AlgebraElement{r.name, acc, f_atom(r.name, std::move(args))});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Interpretations between theories, their composition, and the forgetful
// functor on structures.

struct InterpretationMap {
  struct FnImage {
    std::vector<Variable> params;
    Term body;
  };
  struct RelImage {
    std::vector<Variable> params;
    Formula body;
  };
  std::map<std::string, std::string> sort_map;
  std::map<std::string, FnImage> fn_map;
  std::map<std::string, RelImage> rel_map;
};

inline InterpretationMap identity_interpretation(const Signature& sig) {
  InterpretationMap I;
  for (const auto& s : sig.sorts) I.sort_map[s] = s;
  for (const auto& f : sig.functions) {
    InterpretationMap::FnImage img;
    std::vector<Term> args;
    for (size_t i = 0; i < f.domain.size(); ++i) {
      img.params.push_back(Variable{"v" + std::to_string(i + 1), f.domain[i]});
      args.push_back(Term::make_var(img.params.back()));
    }
    img.body = Term::make_app(f.name, std::move(args));
    I.fn_map[f.name] = std::move(img);
  }
  for (const auto& r : sig.relations) {
    InterpretationMap::RelImage img;
    std::vector<Term> args;
    for (size_t i = 0; i < r.domain.size(); ++i) {
      img.params.push_back(Variable{"v" + std::to_string(i + 1), r.domain[i]});
      args.push_back(Term::make_var(img.params.back()));
    }
    img.body = f_atom(r.name, std::move(args));
    I.rel_map[r.name] = std::move(img);
  }
  return I;
}

inline Variable translate_variable(const InterpretationMap& I, const Variable& v) {
  auto it = I.sort_map.find(v.sort);
  if (it == I.sort_map.end()) throw CmtkError("interpretation misses sort " + v.sort);
  return Variable{v.name, it->second};
}

inline Term translate_term(const InterpretationMap& I, const Term& t) {
  if (t.is_var) return Term::make_var(translate_variable(I, t.var));
  auto it = I.fn_map.find(t.fn);
  if (it == I.fn_map.end()) throw CmtkError("interpretation misses function " + t.fn);
  std::vector<Term> args;
  for (const auto& a : t.args) args.push_back(translate_term(I, a));
  return substitute_term_simultaneous(it->second.body, it->second.params, args);
}

inline Formula translate(const InterpretationMap& I, const Formula& f) {
  switch (f.kind) {
    case FormulaKind::Atom: {
      auto it = I.rel_map.find(f.symbol);
      if (it == I.rel_map.end()) throw CmtkError("interpretation misses relation " + f.symbol);
      std::vector<Term> args;
      for (const auto& t : f.terms) args.push_back(translate_term(I, t));
      return substitute_simultaneous(it->second.body, it->second.params, args);
    }
    case FormulaKind::Sup:
    case FormulaKind::Inf: {
      std::vector<Variable> binders;
      for (const auto& b : f.binders) binders.push_back(translate_variable(I, b));
      return f_quant(f.kind, std::move(binders), translate(I, f.kids[0]));
    }
    default: {
      Formula out = f;
      for (auto& k : out.kids) k = translate(I, k);
      return out;
    }
  }
}

// J after I.
inline InterpretationMap compose_interpretations(const InterpretationMap& I,
                                                 const InterpretationMap& J) {
  InterpretationMap K;
  for (const auto& [s, is] : I.sort_map) {
    auto it = J.sort_map.find(is);
    if (it == J.sort_map.end()) throw CmtkError("composition misses sort " + is);
    K.sort_map[s] = it->second;
  }
  for (const auto& [f, img] : I.fn_map) {
    InterpretationMap::FnImage out;
    for (const auto& p : img.params) out.params.push_back(translate_variable(J, p));
    out.body = translate_term(J, img.body);
    K.fn_map[f] = std::move(out);
  }
  for (const auto& [r, img] : I.rel_map) {
    InterpretationMap::RelImage out;
    for (const auto& p : img.params) out.params.push_back(translate_variable(J, p));
    out.body = translate(J, img.body);
    K.rel_map[r] = std::move(out);
  }
  return K;
}

// The forgetful functor on structures: interpret every source symbol inside
// the target structure.
inline FiniteStructure forgetful(const InterpretationMap& I,
                                 std::shared_ptr<const Signature> source_sig,
                                 const FiniteStructure& M) {
  FiniteStructure out;
  out.sig = source_sig;
  for (const auto& s : source_sig->sorts) {
    auto it = I.sort_map.find(s);
    if (it == I.sort_map.end()) throw CmtkError("interpretation misses sort " + s);
    out.carriers[s] = M.carrier(it->second);
  }
  // Images (params and bodies) already live in the target language.
  for (const auto& f : source_sig->functions) {
    auto it = I.fn_map.find(f.name);
    if (it == I.fn_map.end()) throw CmtkError("interpretation misses function " + f.name);
    TupleSpace sp = out.space(f.domain);
    std::vector<uint32_t> table(sp.size());
    for (size_t flat = 0; flat < sp.size(); ++flat) {
      auto t = sp.decode(flat);
      Env env;
      for (size_t i = 0; i < it->second.params.size(); ++i)
        env.push(it->second.params[i], t[i]);
      table[flat] = static_cast<uint32_t>(eval_term(M, it->second.body, env));
    }
    out.functions[f.name] = std::move(table);
  }
  for (const auto& r : source_sig->relations) {
    auto it = I.rel_map.find(r.name);
    if (it == I.rel_map.end()) throw CmtkError("interpretation misses relation " + r.name);
    TupleSpace sp = out.space(r.domain);
    std::vector<Rat> table(sp.size());
    for (size_t flat = 0; flat < sp.size(); ++flat) {
      auto t = sp.decode(flat);
      Env env;
      for (size_t i = 0; i < it->second.params.size(); ++i)
        env.push(it->second.params[i], t[i]);
      Value v = eval_formula(M, it->second.body, env);
      if (!v.is_exact) throw CmtkError("interpretation images must be basis formulas");
      table[flat] = v.exact;
    }
    out.relations[r.name] = std::move(table);
  }
  out.validate();
  return out;
}

// Axiom transport: source axioms that hold on a source suite must translate
// to sentences holding on the target suite.
inline Report check_interpretation(const InterpretationMap& I, const Theory& source,
                                   std::span<const FiniteStructure> target_suite) {
  Report rep;
  rep.command = "check";
  rep.what = "interpretation";
  for (const auto& ax : source.axioms) {
    Formula image = translate(I, ax.sentence);
    for (size_t mi = 0; mi < target_suite.size(); ++mi) {
      auto sat = satisfies(target_suite[mi], image);
      rep.add_check((ax.label.empty() ? print_formula(ax.sentence) : ax.label) + " on model " +
                        std::to_string(mi),
                    sat.satisfied, sat.value.str());
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// The internal language of a finitely presented category fragment, its
// tautological models, and the model <-> functor round trip.

struct InternalLanguage {
  Theory fragment;
  std::vector<std::string> object_names;
  std::map<std::string, std::string> object_sort;    // object -> S_A
  std::map<std::string, std::string> object_metric;  // object -> d_A
  std::map<std::string, std::string> morphism_fn;    // morphism -> f_alpha
  std::map<std::string, std::string> element_rel;    // element label -> R_phi
  // source category data needed to build tautological models
  const DefCategory* category = nullptr;
  std::vector<AlgebraElement> elements;
};

// Fragment symbol names must be identifiers even when object names carry
// display punctuation like "[S]".
inline std::string sanitize_symbol(const std::string& name) {
  std::string out;
  for (char c : name)
    out += (std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '\'') ? c : '_';
  if (out.empty() || std::isdigit(static_cast<unsigned char>(out[0]))) out.insert(out.begin(), '_');
  return out;
}

inline InternalLanguage internal_language(const DefCategory& cat,
                                          std::vector<AlgebraElement> elements) {
  InternalLanguage out;
  out.category = &cat;
  out.elements = std::move(elements);
  Signature& sig = out.fragment.signature;
  // The auto-added empty product only enters the fragment when referenced.
  std::vector<bool> used(cat.objects.size(), false);
  for (size_t i = 0; i < cat.objects.size(); ++i) used[i] = cat.objects[i].name != "1";
  for (const auto& m : cat.morphisms) used[m.src] = used[m.dst] = true;
  for (const auto& e : out.elements) used[e.object] = true;
  for (size_t i = 0; i < cat.objects.size(); ++i) {
    if (!used[i]) continue;
    const DefObject& obj = cat.objects[i];
    std::string sname = "S_" + sanitize_symbol(obj.name);
    std::string dname = "d_" + sanitize_symbol(obj.name);
    sig.sorts.push_back(sname);
    RelationSymbol dm;
    dm.name = dname;
    dm.domain = {sname, sname};
    dm.metric_for = sname;
    sig.relations.push_back(dm);
    out.object_names.push_back(obj.name);
    out.object_sort[obj.name] = sname;
    out.object_metric[obj.name] = dname;
  }
  for (const auto& m : cat.morphisms) {
    FunctionSymbol f;
    f.name = "f_" + sanitize_symbol(m.name);
    f.domain = {out.object_sort.at(cat.objects[m.src].name)};
    f.codomain = out.object_sort.at(cat.objects[m.dst].name);
    sig.functions.push_back(f);
    out.morphism_fn[m.name] = f.name;
  }
  for (const auto& e : out.elements) {
    RelationSymbol r;
    r.name = "R_" + sanitize_symbol(e.label);
    r.domain = {out.object_sort.at(cat.objects[e.object].name)};
    sig.relations.push_back(r);
    out.element_rel[e.label] = r.name;
  }
  sig.validate();

  // generated sentences: pseudo-metric laws, identity laws, recorded
  // composition laws; all hold on the tautological models by construction
  for (const auto& name : out.object_names)
    for (auto& ax : detail::pseudo_metric_axioms(out.object_sort.at(name),
                                                 out.object_metric.at(name),
                                                 out.object_sort.at(name)))
      out.fragment.axioms.push_back(Axiom{ax.label, ax.sentence});
  for (const auto& [obj, idm] : cat.identity_of) {
    if (!used[obj]) continue;
    const std::string& sname = out.object_sort.at(cat.objects[obj].name);
    Variable u{"u", sname};
    out.fragment.axioms.push_back(
        Axiom{"identity_" + sanitize_symbol(cat.objects[obj].name),
              f_sup({u}, f_atom(out.object_metric.at(cat.objects[obj].name),
                                {Term::make_app(out.morphism_fn.at(cat.morphisms[idm].name),
                                                {Term::make_var(u)}),
                                 Term::make_var(u)}))});
  }
  for (const auto& [f, g, h] : cat.compositions) {
    const std::string& sname = out.object_sort.at(cat.objects[cat.morphisms[f].src].name);
    const std::string& dmet = out.object_metric.at(cat.objects[cat.morphisms[h].dst].name);
    Variable u{"u", sname};
    Term via = Term::make_app(out.morphism_fn.at(cat.morphisms[g].name),
                              {Term::make_app(out.morphism_fn.at(cat.morphisms[f].name),
                                              {Term::make_var(u)})});
    Term direct = Term::make_app(out.morphism_fn.at(cat.morphisms[h].name), {Term::make_var(u)});
    out.fragment.axioms.push_back(
        Axiom{"composition_" + sanitize_symbol(cat.morphisms[h].name),
              f_sup({u}, f_atom(dmet, {direct, via}))});
  }
  return out;
}

// The tautological model over one suite structure: S_A carries Z_M(A).
inline FiniteStructure tautological_model(const InternalLanguage& il, size_t suite_index) {
  const DefCategory& cat = *il.category;
  const FiniteStructure& M = cat.suite.at(suite_index);
  FiniteStructure out;
  out.sig = std::make_shared<Signature>(il.fragment.signature);

  std::map<size_t, ZeroSet> zsets;
  for (const auto& name : il.object_names) {
    size_t oi = cat.object_index(name);
    const DefObject& obj = cat.objects[oi];
    ZeroSet z = zero_set(M, obj.pred);
    std::vector<std::string> sorts;
    for (const auto& v : obj.pred.context) sorts.push_back(v.sort);
    std::vector<std::string> carrier;
    for (const auto& m : z.members)
      carrier.push_back(obj.pred.context.empty() ? "()" : M.tuple_name(sorts, m));
    out.carriers[il.object_sort.at(obj.name)] = carrier;
    std::vector<Rat> dtable(z.members.size() * z.members.size());
    for (size_t a = 0; a < z.members.size(); ++a)
      for (size_t b = 0; b < z.members.size(); ++b)
        dtable[a * z.members.size() + b] =
            tuple_distance(M, obj.pred.context, z.members[a], z.members[b]);
    out.relations[il.object_metric.at(obj.name)] = std::move(dtable);
    zsets.emplace(oi, std::move(z));
  }
  auto suite = cat.suite_ptrs();
  for (const auto& m : cat.morphisms) {
    FunctionCheck ck = check_definable_function(suite, m.fn);
    if (!ck.ok) throw CmtkError("morphism " + m.name + " lost functionality");
    std::vector<uint32_t> table(ck.per_model[suite_index].mapping.size());
    for (size_t i = 0; i < table.size(); ++i)
      table[i] = static_cast<uint32_t>(ck.per_model[suite_index].mapping[i]);
    out.functions[il.morphism_fn.at(m.name)] = std::move(table);
  }
  for (const auto& e : il.elements) {
    const DefObject& obj = cat.objects[e.object];
    std::vector<Rat> full = eval_table(M, e.formula, obj.pred.context);
    std::vector<std::string> sorts;
    for (const auto& v : obj.pred.context) sorts.push_back(v.sort);
    TupleSpace sp = M.space(sorts);
    std::vector<Rat> table;
    for (const auto& mem : zsets.at(e.object).members) table.push_back(full[sp.encode(mem)]);
    out.relations[il.element_rel.at(e.label)] = std::move(table);
  }
  out.validate();
  return out;
}

// Functor data: the object, morphism and element tables a fragment model
// carries. model_to_functor and functor_to_model are exact inverses.
struct FunctorData {
  std::map<std::string, std::pair<std::vector<std::string>, std::vector<Rat>>> objects;
  std::map<std::string, std::vector<uint32_t>> morphisms;
  std::map<std::string, std::vector<Rat>> elements;
};

inline Report validate_fragment_model(const InternalLanguage& il, const FiniteStructure& M) {
  Report rep;
  rep.command = "defcat";
  rep.what = "fragment-model";
  for (const auto& ax : il.fragment.axioms) {
    auto sat = satisfies(M, ax.sentence);
    rep.add_check(ax.label, sat.satisfied, sat.value.str());
  }
  return rep;
}

inline FunctorData model_to_functor(const InternalLanguage& il, const FiniteStructure& M) {
  Report v = validate_fragment_model(il, M);
  if (!v.passed()) throw PrerequisiteError("structure violates the fragment axioms", v);
  FunctorData F;
  for (const auto& obj : il.object_names)
    F.objects[obj] = {M.carrier(il.object_sort.at(obj)),
                      M.relations.at(il.object_metric.at(obj))};
  for (const auto& [m, fn] : il.morphism_fn) F.morphisms[m] = M.functions.at(fn);
  for (const auto& [e, rel] : il.element_rel) F.elements[e] = M.relations.at(rel);
  return F;
}

inline FiniteStructure functor_to_model(const InternalLanguage& il, const FunctorData& F) {
  FiniteStructure out;
  out.sig = std::make_shared<Signature>(il.fragment.signature);
  for (const auto& obj : il.object_names) {
    const auto& [carrier, metric] = F.objects.at(obj);
    out.carriers[il.object_sort.at(obj)] = carrier;
    out.relations[il.object_metric.at(obj)] = metric;
  }
  for (const auto& [m, fn] : il.morphism_fn) out.functions[fn] = F.morphisms.at(m);
  for (const auto& [e, rel] : il.element_rel) out.relations[rel] = F.elements.at(e);
  out.validate();
  return out;
}

// A logical transformation between two fragment models, induced by
// sort-indexed maps: eta is the map itself, epsilon acts by precomposition.
// The commuting squares are checked per morphism and per element.
struct TransformationData {
  std::map<std::string, std::vector<uint32_t>> eta;
  std::map<std::string, std::vector<Rat>> epsilon_pullbacks;  // element tables pulled back
  Report report;
};

inline TransformationData transformation_from_map(
    const InternalLanguage& il, const FiniteStructure& Mfrag, const FiniteStructure& Nfrag,
    const std::map<std::string, std::vector<uint32_t>>& h) {
  TransformationData out;
  out.eta = h;
  out.report.command = "defcat";
  out.report.what = "transformation";
  const DefCategory& cat = *il.category;

  for (const auto& m : cat.morphisms) {
    const std::string& fn = il.morphism_fn.at(m.name);
    const std::string& ssort = il.object_sort.at(cat.objects[m.src].name);
    const std::string& dsort = il.object_sort.at(cat.objects[m.dst].name);
    const auto& hA = h.at(ssort);
    const auto& hB = h.at(dsort);
    const auto& fM = Mfrag.functions.at(fn);
    const auto& fN = Nfrag.functions.at(fn);
    std::vector<std::string> bad;
    for (size_t a = 0; a < fM.size(); ++a)
      if (hB.at(fM[a]) != fN.at(hA.at(a)))
        bad.push_back("square fails at " + Mfrag.carrier(ssort)[a]);
    out.report.add_check("naturality of " + m.name, bad.empty(), "", bad);
  }
  for (const auto& e : il.elements) {
    const std::string& rel = il.element_rel.at(e.label);
    const std::string& ssort = il.object_sort.at(cat.objects[e.object].name);
    const auto& hA = h.at(ssort);
    const auto& rM = Mfrag.relations.at(rel);
    const auto& rN = Nfrag.relations.at(rel);
    std::vector<Rat> pulled(rM.size());
    std::vector<std::string> bad;
    for (size_t a = 0; a < rM.size(); ++a) {
      pulled[a] = rN.at(hA.at(a));
      if (pulled[a] != rM[a])
        bad.push_back("element " + e.label + " not preserved at " + Mfrag.carrier(ssort)[a]);
    }
    out.epsilon_pullbacks[e.label] = std::move(pulled);
    out.report.add_check("element " + e.label, bad.empty(), "", bad);
  }
  return out;
}

}  // namespace cmtk
