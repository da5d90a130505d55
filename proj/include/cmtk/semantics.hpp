#pragma once

#include "cmtk/report.hpp"
#include "cmtk/structure.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

namespace cmtk {

// Variable bindings during evaluation. Lookup is innermost-first so
// quantifiers shadow outer bindings of the same variable.
struct Env {
  std::vector<std::pair<Variable, size_t>> bound;

  const size_t* find(const Variable& v) const {
    for (auto it = bound.rbegin(); it != bound.rend(); ++it)
      if (it->first == v) return &it->second;
    return nullptr;
  }
  void push(const Variable& v, size_t elem) { bound.emplace_back(v, elem); }
  void pop(size_t n) { bound.resize(n); }
};

inline size_t eval_term(const FiniteStructure& M, const Term& t, const Env& env) {
  if (t.is_var) {
    if (const size_t* e = env.find(t.var)) return *e;
    throw CmtkError("unbound variable " + t.var.name + ":" + t.var.sort);
  }
  std::vector<size_t> args;
  args.reserve(t.args.size());
  for (const auto& a : t.args) args.push_back(eval_term(M, a, env));
  return M.fn_value(t.fn, args);
}

inline Value eval_formula(const FiniteStructure& M, const Formula& f, Env& env) {
  switch (f.kind) {
    case FormulaKind::Const:
      return Value::of(f.value);
    case FormulaKind::Atom: {
      std::vector<size_t> args;
      args.reserve(f.terms.size());
      for (const auto& t : f.terms) args.push_back(eval_term(M, t, env));
      return Value::of(M.rel_value(f.symbol, args));
    }
    case FormulaKind::Neg:
      return v_neg(eval_formula(M, f.kids[0], env));
    case FormulaKind::Half:
      return v_half(eval_formula(M, f.kids[0], env));
    case FormulaKind::Sub:
      return v_sub(eval_formula(M, f.kids[0], env), eval_formula(M, f.kids[1], env));
    case FormulaKind::Add:
      return v_add(eval_formula(M, f.kids[0], env), eval_formula(M, f.kids[1], env));
    case FormulaKind::Min:
      return v_min(eval_formula(M, f.kids[0], env), eval_formula(M, f.kids[1], env));
    case FormulaKind::Max:
      return v_max(eval_formula(M, f.kids[0], env), eval_formula(M, f.kids[1], env));
    case FormulaKind::Native: {
      const NativeConnective* n = NativeRegistry::instance().find(f.symbol);
      if (!n || !n->fn)
        throw CmtkError("native connective " + f.symbol + " has no declared evaluation");
      std::vector<double> args;
      double kid_err = 0;
      for (const auto& k : f.kids) {
        Value v = eval_formula(M, k, env);
        args.push_back(v.as_double());
        kid_err = std::max(kid_err, v.is_exact ? 0.0 : v.error);
      }
      double err = rat_to_double(n->lipschitz) * kid_err + n->eval_error;
      return Value::approximate(n->fn(args), err);
    }
    case FormulaKind::Sup:
    case FormulaKind::Inf: {
      TupleSpace sp;
      for (const auto& b : f.binders) sp.radices.push_back(M.carrier(b.sort).size());
      if (sp.size() == 0) throw CmtkError("quantification over an empty carrier");
      bool is_sup = f.kind == FormulaKind::Sup;
      Value acc;
      size_t mark = env.bound.size();
      std::vector<size_t> tuple(f.binders.size(), 0);
      bool first = true;
      do {
        for (size_t i = 0; i < f.binders.size(); ++i) env.push(f.binders[i], tuple[i]);
        Value v = eval_formula(M, f.kids[0], env);
        env.pop(mark);
        acc = first ? v : (is_sup ? v_max(acc, v) : v_min(acc, v));
        first = false;
      } while (sp.next(tuple));
      return acc;
    }
  }
  throw CmtkError("bad formula node");
}

// Evaluation at a named assignment, the entry point used by the CLI.
inline Value eval_at(const FiniteStructure& M, const Formula& f,
                     const std::map<std::string, std::string>& assignment) {
  Env env;
  for (const auto& v : free_variables(f)) {
    auto it = assignment.find(v.name);
    if (it == assignment.end())
      throw CmtkError("assignment does not cover free variable " + v.name);
    env.push(v, M.elem_index(v.sort, it->second));
  }
  return eval_formula(M, f, env);
}

struct SatisfactionResult {
  bool satisfied = false;
  Value value;
  bool approximate = false;
};

// A sentence holds when its value is <= tol; 0 plays the role of "true".
// Approximate values compare against tol plus their accumulated error bound.
inline SatisfactionResult satisfies(const FiniteStructure& M, const Formula& sigma,
                                    const Rat& tol = Rat(0)) {
  if (!is_sentence(sigma)) throw CmtkError("satisfies expects a closed formula");
  Env env;
  Value v = eval_formula(M, sigma, env);
  SatisfactionResult r;
  r.value = v;
  if (v.is_exact) {
    r.satisfied = v.exact <= tol;
  } else {
    r.approximate = true;
    r.satisfied = v.approx <= rat_to_double(tol) + v.error;
  }
  return r;
}

// Max-metric distance between two context tuples.
inline Rat tuple_distance(const FiniteStructure& M, std::span<const Variable> ctx,
                          std::span<const size_t> a, std::span<const size_t> b) {
  Rat d(0);
  for (size_t i = 0; i < ctx.size(); ++i) d = rat_max(d, M.metric(ctx[i].sort, a[i], b[i]));
  return d;
}

// ---------------------------------------------------------------------------
// Pseudo-metric and modulus verification

inline Report check_pseudo_metric(const FiniteStructure& M, const std::string& metric_name) {
  Report rep;
  rep.command = "check";
  rep.what = "metric";
  const RelationSymbol* d = M.sig->find_relation(metric_name);
  if (!d || d->domain.size() != 2 || d->domain[0] != d->domain[1]) {
    rep.status = "error";
    rep.witnesses.push_back(metric_name + " is not a binary relation on one sort");
    return rep;
  }
  const std::string sort = d->domain[0];
  size_t n = M.carrier(sort).size();
  auto at = [&](size_t i, size_t j) -> const Rat& {
    size_t args[2] = {i, j};
    return M.rel_value(metric_name, args);
  };
  auto name = [&](size_t i) { return M.carrier(sort)[i]; };

  std::vector<std::string> refl, sym, tri;
  for (size_t i = 0; i < n; ++i)
    if (at(i, i) != 0)
      refl.push_back("reflexivity at (" + name(i) + "): " + metric_name + "(" + name(i) + "," +
                     name(i) + ") = " + rat_to_string(at(i, i)));
  for (size_t i = 0; i < n; ++i)
    for (size_t j = i + 1; j < n; ++j)
      if (at(i, j) != at(j, i))
        sym.push_back("symmetry at (" + name(i) + "," + name(j) + "): " +
                      rat_to_string(at(i, j)) + " != " + rat_to_string(at(j, i)));
  for (size_t i = 0; i < n; ++i)
    for (size_t j = 0; j < n; ++j)
      for (size_t k = 0; k < n; ++k)
        if (at(i, k) > at(i, j) + at(j, k))
          tri.push_back("triangle at (" + name(i) + "," + name(j) + "," + name(k) + "): " +
                        metric_name + "(" + name(i) + "," + name(k) +
                        ") = " + rat_to_string(at(i, k)) + " > " +
                        rat_to_string(Rat(at(i, j) + at(j, k))));
  rep.add_check("reflexivity", refl.empty(), "", refl);
  rep.add_check("symmetry", sym.empty(), "", sym);
  rep.add_check("triangle", tri.empty(), "", tri);
  return rep;
}

// Verifies a declared staircase: for each (delta, epsilon), argument tuples at
// componentwise distance strictly below delta must change the symbol's value
// by at most epsilon (relations) or move its output by at most epsilon
// (functions).
inline Report check_modulus(const FiniteStructure& M, const std::string& symbol,
                            const Modulus& m) {
  Report rep;
  rep.command = "check";
  rep.what = "modulus";
  rep.add_field("symbol", symbol);

  std::vector<std::string> domain;
  bool is_fn = false;
  std::string codomain;
  if (const FunctionSymbol* f = M.sig->find_function(symbol)) {
    domain = f->domain;
    codomain = f->codomain;
    is_fn = true;
  } else if (const RelationSymbol* r = M.sig->find_relation(symbol)) {
    domain = r->domain;
  } else {
    rep.status = "error";
    rep.witnesses.push_back("unknown symbol: " + symbol);
    return rep;
  }

  TupleSpace sp = M.space(domain);
  for (const auto& [delta, eps] : m.pairs) {
    std::vector<std::string> bad;
    for (size_t x = 0; x < sp.size(); ++x) {
      auto xt = sp.decode(x);
      for (size_t y = x + 1; y < sp.size(); ++y) {
        auto yt = sp.decode(y);
        bool close = true;
        for (size_t i = 0; i < domain.size() && close; ++i)
          close = M.metric(domain[i], xt[i], yt[i]) < delta;
        if (!close) continue;
        Rat diff;
        if (is_fn) {
          diff = M.metric(codomain, M.fn_value(symbol, xt), M.fn_value(symbol, yt));
        } else {
          diff = abs_diff(M.rel_value(symbol, xt), M.rel_value(symbol, yt));
        }
        if (diff > eps)
          bad.push_back(M.tuple_name(domain, xt) + " vs " + M.tuple_name(domain, yt) +
                        ": difference " + rat_to_string(diff) + " > " + rat_to_string(eps));
      }
    }
    rep.add_check("delta " + rat_to_string(delta) + " -> eps " + rat_to_string(eps), bad.empty(),
                  "", bad);
  }
  return rep;
}

inline Report check_modulus(const FiniteStructure& M, const std::string& symbol) {
  const Modulus* m = nullptr;
  if (const FunctionSymbol* f = M.sig->find_function(symbol))
    m = f->modulus ? &*f->modulus : nullptr;
  else if (const RelationSymbol* r = M.sig->find_relation(symbol))
    m = r->modulus ? &*r->modulus : nullptr;
  if (!m) {
    Report rep;
    rep.command = "check";
    rep.what = "modulus";
    rep.status = "error";
    rep.witnesses.push_back("symbol " + symbol + " has no declared modulus");
    return rep;
  }
  return check_modulus(M, symbol, *m);
}

// The empirical modulus of a formula over a finite structure: for every
// observed distance level delta, the largest value difference among tuple
// pairs strictly within delta. max_difference is the overall sup, reached
// only beyond the last staircase level.
struct ModulusEstimate {
  Modulus staircase;
  Rat max_difference;
};

inline ModulusEstimate best_modulus(const FiniteStructure& M, const Formula& phi,
                                    std::span<const Variable> context) {
  for (const auto& fv : free_variables(phi)) {
    if (std::find(context.begin(), context.end(), fv) == context.end())
      throw CmtkError("free variable " + fv.name + " not in the modulus context");
  }
  std::vector<std::string> sorts;
  for (const auto& v : context) sorts.push_back(v.sort);
  TupleSpace sp = M.space(sorts);

  std::vector<Rat> values(sp.size());
  Env env;
  for (size_t flat = 0; flat < sp.size(); ++flat) {
    auto t = sp.decode(flat);
    env.bound.clear();
    for (size_t i = 0; i < context.size(); ++i) env.push(context[i], t[i]);
    Value v = eval_formula(M, phi, env);
    if (!v.is_exact) throw CmtkError("best_modulus needs exact (basis-only) formulas");
    values[flat] = v.exact;
  }

  std::vector<std::pair<Rat, Rat>> samples;  // (distance, difference)
  std::set<Rat> levels;
  for (size_t x = 0; x < sp.size(); ++x) {
    auto xt = sp.decode(x);
    for (size_t y = x + 1; y < sp.size(); ++y) {
      auto yt = sp.decode(y);
      Rat d = tuple_distance(M, context, xt, yt);
      samples.emplace_back(d, abs_diff(values[x], values[y]));
      if (d > 0 && d <= 1) levels.insert(d);
    }
  }
  ModulusEstimate est;
  est.max_difference = Rat(0);
  for (const auto& [d, diff] : samples) est.max_difference = rat_max(est.max_difference, diff);
  if (levels.empty()) levels.insert(Rat(1));
  for (const Rat& delta : levels) {
    Rat eps(0);
    for (const auto& [d, diff] : samples)
      if (d < delta) eps = rat_max(eps, diff);
    est.staircase.pairs.emplace_back(delta, eps);
  }
  est.staircase.normalize();
  return est;
}

// ---------------------------------------------------------------------------
// Quotient completion: on finite carriers the metric completion is exactly
// the quotient by distance zero.

struct QuotientResult {
  bool ok = false;
  FiniteStructure quotient;
  Report report;
};

inline QuotientResult quotient_completion(const FiniteStructure& M,
                                          std::span<const Formula> preserve = {}) {
  QuotientResult out;
  out.report.command = "quotient";

  // Element classes per sort; sorts without a metric stay discrete.
  std::map<std::string, std::vector<size_t>> cls;     // element -> class id
  std::map<std::string, std::vector<size_t>> reps;    // class id -> representative element
  for (const auto& sort : M.sig->sorts) {
    size_t n = M.carrier(sort).size();
    std::vector<size_t> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    std::function<size_t(size_t)> find = [&](size_t x) {
      return parent[x] == x ? x : parent[x] = find(parent[x]);
    };
    if (M.sig->metric_of(sort)) {
      for (size_t i = 0; i < n; ++i)
        for (size_t j = i + 1; j < n; ++j)
          if (M.metric(sort, i, j) == 0) parent[find(j)] = find(i);
    }
    std::vector<size_t> ids(n);
    std::vector<size_t> rep;
    std::map<size_t, size_t> root_to_id;
    for (size_t i = 0; i < n; ++i) {
      size_t r = find(i);
      auto it = root_to_id.find(r);
      if (it == root_to_id.end()) {
        it = root_to_id.emplace(r, rep.size()).first;
        rep.push_back(i);
      }
      ids[i] = it->second;
    }
    cls[sort] = std::move(ids);
    reps[sort] = std::move(rep);
  }

  // Congruence scan: tables must not distinguish identified tuples.
  std::vector<std::string> bad;
  for (const auto& r : M.sig->relations) {
    TupleSpace sp = M.space(r.domain);
    for (size_t flat = 0; flat < sp.size(); ++flat) {
      auto t = sp.decode(flat);
      std::vector<size_t> canon(t.size());
      bool moved = false;
      for (size_t i = 0; i < t.size(); ++i) {
        canon[i] = reps[r.domain[i]][cls[r.domain[i]][t[i]]];
        moved |= canon[i] != t[i];
      }
      if (!moved) continue;
      const Rat& a = M.rel_value(r.name, t);
      const Rat& b = M.rel_value(r.name, canon);
      if (a != b)
        bad.push_back("relation " + r.name + " not congruent at " + M.tuple_name(r.domain, t) +
                      " ~ " + M.tuple_name(r.domain, canon) + ": " + rat_to_string(a) +
                      " != " + rat_to_string(b));
    }
  }
  for (const auto& f : M.sig->functions) {
    TupleSpace sp = M.space(f.domain);
    for (size_t flat = 0; flat < sp.size(); ++flat) {
      auto t = sp.decode(flat);
      std::vector<size_t> canon(t.size());
      bool moved = false;
      for (size_t i = 0; i < t.size(); ++i) {
        canon[i] = reps[f.domain[i]][cls[f.domain[i]][t[i]]];
        moved |= canon[i] != t[i];
      }
      if (!moved) continue;
      size_t a = M.fn_value(f.name, t);
      size_t b = M.fn_value(f.name, canon);
      if (cls[f.codomain][a] != cls[f.codomain][b])
        bad.push_back("function " + f.name + " not congruent at " + M.tuple_name(f.domain, t) +
                      " ~ " + M.tuple_name(f.domain, canon));
    }
  }
  out.report.add_check("congruence", bad.empty(), "", bad);
  if (!bad.empty()) return out;

  FiniteStructure Q;
  Q.sig = M.sig;
  for (const auto& sort : M.sig->sorts) {
    std::vector<std::string> c;
    for (size_t rep : reps[sort]) c.push_back(M.carrier(sort)[rep]);
    Q.carriers[sort] = std::move(c);
  }
  for (const auto& r : M.sig->relations) {
    TupleSpace qsp = Q.space(r.domain);
    std::vector<Rat> table(qsp.size());
    for (size_t flat = 0; flat < qsp.size(); ++flat) {
      auto t = qsp.decode(flat);
      std::vector<size_t> orig(t.size());
      for (size_t i = 0; i < t.size(); ++i) orig[i] = reps[r.domain[i]][t[i]];
      table[flat] = M.rel_value(r.name, orig);
    }
    Q.relations[r.name] = std::move(table);
  }
  for (const auto& f : M.sig->functions) {
    TupleSpace qsp = Q.space(f.domain);
    std::vector<uint32_t> table(qsp.size());
    for (size_t flat = 0; flat < qsp.size(); ++flat) {
      auto t = qsp.decode(flat);
      std::vector<size_t> orig(t.size());
      for (size_t i = 0; i < t.size(); ++i) orig[i] = reps[f.domain[i]][t[i]];
      table[flat] = static_cast<uint32_t>(cls[f.codomain][M.fn_value(f.name, orig)]);
    }
    Q.functions[f.name] = std::move(table);
  }
  Q.validate();

  std::vector<std::string> changed;
  for (const auto& sigma : preserve) {
    Value before = satisfies(M, sigma, Rat(0)).value;
    Value after = satisfies(Q, sigma, Rat(0)).value;
    if (!before.is_exact || !after.is_exact || before.exact != after.exact)
      changed.push_back("sentence value changed: " + before.str() + " -> " + after.str());
  }
  out.report.add_check("sentence_preservation", changed.empty(), "", changed);
  if (!changed.empty()) return out;

  out.ok = true;
  out.quotient = std::move(Q);
  return out;
}

}  // namespace cmtk
