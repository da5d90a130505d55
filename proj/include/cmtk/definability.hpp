#pragma once

#include "cmtk/algebra.hpp"

#include <algorithm>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace cmtk {

// A definable predicate: a formula sequence with a declared or verified
// Cauchy rate sup|phi_n - phi_{n+1}| <= 2^{-n}. A single formula is the
// common case; the last entry acts as the working representative.
struct DefinablePredicate {
  std::vector<Variable> context;
  std::vector<Formula> formulas;
  bool rate_declared = false;
  std::vector<std::string> verified_on;  // structure labels the rate was checked on

  static DefinablePredicate single(Formula f, std::vector<Variable> ctx) {
    DefinablePredicate p;
    p.context = std::move(ctx);
    p.formulas.push_back(std::move(f));
    p.rate_declared = true;  // a one-term sequence is trivially Cauchy
    return p;
  }
  const Formula& representative() const { return formulas.back(); }
  bool operator==(const DefinablePredicate& o) const {
    return context == o.context && formulas == o.formulas;
  }
};

inline DefinablePredicate rename_context(const DefinablePredicate& p,
                                         const std::vector<Variable>& fresh) {
  if (fresh.size() != p.context.size()) throw CmtkError("context rename length mismatch");
  for (size_t i = 0; i < fresh.size(); ++i)
    if (fresh[i].sort != p.context[i].sort)
      throw CmtkError("context rename changes the sort of " + p.context[i].name);
  // Two-stage simultaneous rename, through names no formula can contain.
  std::set<std::string> taken;
  for (const auto& v : p.context) taken.insert(v.name);
  for (const auto& v : fresh) taken.insert(v.name);
  for (const auto& f : p.formulas)
    for (const auto& v : free_variables(f)) taken.insert(v.name);
  DefinablePredicate out = p;
  std::vector<Variable> temps;
  for (const auto& v : p.context) {
    Variable t = fresh_variable(Variable{v.name + "_tmp", v.sort}, taken);
    taken.insert(t.name);
    temps.push_back(t);
  }
  for (auto& f : out.formulas) {
    for (size_t i = 0; i < temps.size(); ++i)
      f = substitute(f, p.context[i], Term::make_var(temps[i]));
    for (size_t i = 0; i < temps.size(); ++i)
      f = substitute(f, temps[i], Term::make_var(fresh[i]));
  }
  out.context = fresh;
  return out;
}

// Fresh primed copies of a context, avoiding the names in `taken`.
inline std::vector<Variable> fresh_context(const std::vector<Variable>& ctx,
                                           std::set<std::string> taken) {
  std::vector<Variable> out;
  for (const auto& v : ctx) {
    Variable nv = fresh_variable(v, taken);
    taken.insert(nv.name);
    out.push_back(nv);
  }
  return out;
}

// max-metric formula D(xs, ys) over two parallel variable tuples.
inline Formula max_metric_formula(const Signature& sig, std::span<const Variable> xs,
                                  std::span<const Variable> ys) {
  if (xs.size() != ys.size() || xs.empty()) throw CmtkError("mismatched metric contexts");
  std::optional<Formula> acc;
  for (size_t i = 0; i < xs.size(); ++i) {
    auto d = sig.metric_of(xs[i].sort);
    if (!d) throw CmtkError("no metric designated for sort " + xs[i].sort);
    Formula di = f_atom(*d, {Term::make_var(xs[i]), Term::make_var(ys[i])});
    acc = acc ? f_max(std::move(*acc), std::move(di)) : std::move(di);
  }
  return *acc;
}

// Serialization: an ordered formula list with its context and rate flag.
inline Json predicate_to_json(const DefinablePredicate& p) {
  Json j;
  std::string ctx;
  for (size_t i = 0; i < p.context.size(); ++i) {
    if (i) ctx += ",";
    ctx += p.context[i].name + ":" + p.context[i].sort;
  }
  j["context"] = ctx;
  auto fs = Json::array();
  for (const auto& f : p.formulas) fs.push_back(print_formula(f));
  j["formulas"] = std::move(fs);
  j["rate"] = p.rate_declared ? "declared" : "unverified";
  if (!p.verified_on.empty()) j["verified_on"] = p.verified_on;
  return j;
}

inline DefinablePredicate predicate_from_json(const Signature& sig, const Json& j) {
  DefinablePredicate p;
  std::string ctx = j.at("context").get<std::string>();
  std::stringstream ss(ctx);
  std::string item;
  while (std::getline(ss, item, ',')) {
    auto colon = item.find(':');
    if (colon == std::string::npos) throw CmtkError("bad context entry: " + item);
    auto trim = [](std::string t) {
      t.erase(0, t.find_first_not_of(" \t"));
      t.erase(t.find_last_not_of(" \t") + 1);
      return t;
    };
    p.context.push_back(Variable{trim(item.substr(0, colon)), trim(item.substr(colon + 1))});
  }
  for (const auto& f : j.at("formulas")) {
    Formula parsed = parse_formula(f.get<std::string>(), sig);
    for (const auto& fv : free_variables(parsed))
      if (std::find(p.context.begin(), p.context.end(), fv) == p.context.end())
        throw CmtkError("predicate formula has free variable " + fv.name +
                        " outside its context");
    p.formulas.push_back(std::move(parsed));
  }
  if (p.formulas.empty()) throw CmtkError("predicate needs at least one formula");
  p.rate_declared = j.value("rate", "declared") == "declared";
  if (j.contains("verified_on"))
    p.verified_on = j["verified_on"].get<std::vector<std::string>>();
  return p;
}

inline Report verify_rate(const FiniteStructure& M, const DefinablePredicate& p) {
  Report rep;
  rep.command = "check";
  rep.what = "cauchy-rate";
  for (size_t n = 0; n + 1 < p.formulas.size(); ++n) {
    Formula diff = f_abs_diff(p.formulas[n], p.formulas[n + 1]);
    std::vector<Rat> table = eval_table(M, diff, p.context);
    Rat sup(0);
    for (const auto& v : table) sup = rat_max(sup, v);
    Rat bound = pow2_inv(static_cast<unsigned>(n));
    rep.add_check("level " + std::to_string(n), sup <= bound, rat_to_string(sup));
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Zero sets

struct ZeroSet {
  std::vector<Variable> context;
  std::vector<std::vector<size_t>> members;
  Rat tol;

  std::optional<size_t> index_of(std::span<const size_t> tuple) const {
    for (size_t i = 0; i < members.size(); ++i)
      if (std::equal(members[i].begin(), members[i].end(), tuple.begin(), tuple.end()))
        return i;
    return std::nullopt;
  }
};

inline ZeroSet zero_set(const FiniteStructure& M, const DefinablePredicate& p,
                        const Rat& tol = Rat(0)) {
  ZeroSet z;
  z.context = p.context;
  z.tol = tol;
  std::vector<std::string> sorts;
  for (const auto& v : p.context) sorts.push_back(v.sort);
  TupleSpace sp = M.space(sorts);
  std::vector<Rat> table = eval_table(M, p.representative(), p.context);
  for (size_t flat = 0; flat < sp.size(); ++flat)
    if (table[flat] <= tol) z.members.push_back(sp.decode(flat));
  return z;
}

inline Rat dist_to_set(const FiniteStructure& M, std::span<const Variable> ctx,
                       std::span<const size_t> tuple, const ZeroSet& z) {
  if (z.members.empty()) throw CmtkError("distance to an empty zero set");
  Rat best(1);
  for (const auto& m : z.members) best = rat_min(best, tuple_distance(M, ctx, tuple, m));
  return best;
}

// ---------------------------------------------------------------------------
// The syntactic definability criterion. Both condition sentences are built
// as honest formulas and evaluated; on a pass the conclusion is checked
// against the brute-force distance oracle, exactly.

struct DefinabilityCheck {
  Report report;
  bool passed = false;
};

inline DefinabilityCheck check_syntactic_definability(
    std::span<const FiniteStructure* const> models, const DefinablePredicate& p) {
  DefinabilityCheck out;
  out.report.command = "check";
  out.report.what = "definable";
  bool all_pass = true;

  for (size_t fi = 0; fi < p.formulas.size(); ++fi) {
    const Formula& phi = p.formulas[fi];
    for (size_t mi = 0; mi < models.size(); ++mi) {
      const FiniteStructure& M = *models[mi];
      std::string tag = "formula " + std::to_string(fi) + " model " + std::to_string(mi);

      if (p.context.empty()) {
        // the empty product: definable exactly when the sentence holds
        Value v = satisfies(M, phi).value;
        bool ok = v.is_exact && v.exact == 0;
        out.report.add_check(tag + " closed value", ok, v.str());
        all_pass = all_pass && ok;
        continue;
      }

      std::set<std::string> taken;
      for (const auto& v : p.context) taken.insert(v.name);
      std::vector<Variable> ys = fresh_context(p.context, taken);
      Formula phi_y = rename_context(DefinablePredicate::single(phi, p.context), ys)
                          .representative();
      Formula D = max_metric_formula(*M.sig, p.context, ys);

      // (1)  forall_x exists_y max{ phi(y), |phi(x) - d(x,y)| }
      Formula body1 = f_inf(ys, f_max(phi_y, f_abs_diff(phi, D)));
      // (2)  forall_x | phi(x) - exists_y (phi(y) + d(x,y)) |
      Formula body2 = f_abs_diff(phi, f_inf(ys, f_add(phi_y, D)));

      std::vector<std::string> sorts;
      for (const auto& v : p.context) sorts.push_back(v.sort);
      TupleSpace sp = M.space(sorts);

      bool here_ok = true;
      for (int cond = 1; cond <= 2; ++cond) {
        std::vector<Rat> table = eval_table(M, cond == 1 ? body1 : body2, p.context);
        Rat worst(0);
        std::string witness;
        for (size_t flat = 0; flat < sp.size(); ++flat)
          if (table[flat] > worst) {
            worst = table[flat];
            auto t = sp.decode(flat);
            witness = M.tuple_name(sorts, t);
          }
        bool ok = worst == 0;
        here_ok = here_ok && ok;
        out.report.add_check(
            tag + " condition " + std::to_string(cond), ok, rat_to_string(worst),
            ok ? std::vector<std::string>{} : std::vector<std::string>{"worst at " + witness});
      }

      if (here_ok) {
        // conclusion: phi(x) equals the distance to its zero set
        ZeroSet z = zero_set(M, DefinablePredicate::single(phi, p.context));
        std::vector<Rat> table = eval_table(M, phi, p.context);
        std::vector<std::string> bad;
        for (size_t flat = 0; flat < sp.size(); ++flat) {
          auto t = sp.decode(flat);
          Rat d = dist_to_set(M, p.context, t, z);
          if (d != table[flat])
            bad.push_back("at " + M.tuple_name(sorts, t) + ": value " +
                          rat_to_string(table[flat]) + " != distance " + rat_to_string(d));
        }
        out.report.add_check(tag + " distance oracle", bad.empty(), "", bad);
        here_ok = bad.empty();
      }
      all_pass = all_pass && here_ok;
    }
  }
  out.passed = all_pass;
  return out;
}

inline DefinabilityCheck check_syntactic_definability(const FiniteStructure& M,
                                                      const DefinablePredicate& p) {
  const FiniteStructure* ms[1] = {&M};
  return check_syntactic_definability(ms, p);
}

// ---------------------------------------------------------------------------
// Quantification over a definable set.

struct RelativizedResult {
  std::vector<Variable> params;                  // remaining free variables of phi
  std::vector<std::vector<size_t>> param_tuples; // enumeration of their assignments
  std::vector<Rat> inf_direct, sup_direct;       // over the zero set
  std::vector<Rat> inf_syntactic, sup_syntactic; // via the modulus staircase
  Rat slack;                                     // staircase bound at distance 0
  bool within_slack = false;
};

inline RelativizedResult relativized_quantifiers(const FiniteStructure& M,
                                                 const DefinablePredicate& psi,
                                                 const Formula& phi) {
  if (!check_syntactic_definability(M, psi).passed)
    throw CmtkError("relativization requires a definable set (criterion failed)");
  ZeroSet z = zero_set(M, psi);
  if (z.members.empty()) throw CmtkError("relativization over an empty zero set");

  RelativizedResult out;
  for (const auto& fv : free_variables(phi))
    if (std::find(psi.context.begin(), psi.context.end(), fv) == psi.context.end())
      out.params.push_back(fv);

  std::vector<std::string> xsorts;
  for (const auto& v : psi.context) xsorts.push_back(v.sort);
  TupleSpace xsp = M.space(xsorts);
  std::vector<std::string> psorts;
  for (const auto& v : out.params) psorts.push_back(v.sort);
  TupleSpace psp = M.space(psorts);

  // phi as a table over (params, x)
  std::vector<Variable> joint = out.params;
  joint.insert(joint.end(), psi.context.begin(), psi.context.end());
  std::vector<Rat> phi_table = eval_table(M, phi, joint);
  std::vector<Rat> psi_table = eval_table(M, psi.representative(), psi.context);

  // the modulus of phi in the quantified variables, uniformly in the params
  std::vector<std::pair<Rat, Rat>> samples;
  std::set<Rat> levels;
  for (size_t pflat = 0; pflat < psp.size(); ++pflat) {
    for (size_t a = 0; a < xsp.size(); ++a) {
      auto at = xsp.decode(a);
      for (size_t b = a + 1; b < xsp.size(); ++b) {
        auto bt = xsp.decode(b);
        Rat dist = tuple_distance(M, psi.context, at, bt);
        Rat diff = abs_diff(phi_table[pflat * xsp.size() + a], phi_table[pflat * xsp.size() + b]);
        samples.emplace_back(dist, diff);
        if (dist > 0 && dist <= 1) levels.insert(dist);
      }
    }
  }
  Modulus omega;
  if (levels.empty()) levels.insert(Rat(1));
  for (const Rat& delta : levels) {
    Rat eps(0);
    for (const auto& [d, diff] : samples)
      if (d < delta) eps = rat_max(eps, diff);
    omega.pairs.emplace_back(delta, eps);
  }
  omega.normalize();
  out.slack = omega.bound_at(Rat(0));

  out.within_slack = true;
  for (size_t pflat = 0; pflat < psp.size(); ++pflat) {
    out.param_tuples.push_back(psp.decode(pflat));
    Rat inf_d(1), sup_d(0);
    for (const auto& m : z.members) {
      const Rat& v = phi_table[pflat * xsp.size() + xsp.encode(m)];
      inf_d = rat_min(inf_d, v);
      sup_d = rat_max(sup_d, v);
    }
    Rat inf_s(1), sup_s(0);
    for (size_t a = 0; a < xsp.size(); ++a) {
      const Rat& v = phi_table[pflat * xsp.size() + a];
      Rat w = omega.bound_at(psi_table[a]);
      inf_s = rat_min(inf_s, trunc_add(v, w));
      sup_s = rat_max(sup_s, trunc_sub(v, w));
    }
    out.inf_direct.push_back(inf_d);
    out.sup_direct.push_back(sup_d);
    out.inf_syntactic.push_back(inf_s);
    out.sup_syntactic.push_back(sup_s);
    bool ok = inf_d <= inf_s && inf_s <= trunc_add(inf_d, out.slack) &&
              sup_s <= sup_d && trunc_sub(sup_d, out.slack) <= sup_s;
    out.within_slack = out.within_slack && ok;
  }
  return out;
}

// Lemma-style bound check: phi vanishes on the zero set of A and dominates
// the distance to it.
inline Report check_bounded_by_formula(const FiniteStructure& M, const DefinablePredicate& A,
                                       const Formula& phi) {
  Report rep;
  rep.command = "check";
  rep.what = "bounded-by-formula";
  ZeroSet z = zero_set(M, A);
  std::vector<std::string> sorts;
  for (const auto& v : A.context) sorts.push_back(v.sort);
  TupleSpace sp = M.space(sorts);
  std::vector<Rat> phi_table = eval_table(M, phi, A.context);

  std::vector<std::string> vanish;
  for (const auto& m : z.members)
    if (phi_table[sp.encode(m)] != 0)
      vanish.push_back("phi(" + M.tuple_name(sorts, m) +
                       ") = " + rat_to_string(phi_table[sp.encode(m)]));
  rep.add_check("vanishes on zero set", vanish.empty(), "", vanish);

  std::vector<std::string> dom;
  if (z.members.empty()) {
    dom.push_back("zero set of A is empty");
  } else {
    for (size_t flat = 0; flat < sp.size(); ++flat) {
      auto t = sp.decode(flat);
      Rat d = dist_to_set(M, A.context, t, z);
      if (d > phi_table[flat])
        dom.push_back("D(" + M.tuple_name(sorts, t) + ", Z) = " + rat_to_string(d) + " > " +
                      rat_to_string(phi_table[flat]));
    }
  }
  rep.add_check("dominates distance", dom.empty(), "", dom);
  return rep;
}

// ---------------------------------------------------------------------------
// Definable functions: predicates whose zero set is the graph of a total
// function between two definable sets.

struct DefinableFunction {
  DefinablePredicate source;  // A(x)
  DefinablePredicate target;  // B(y); context disjoint from source's
  Formula graph;              // alpha(x, y)
};

inline DefinableFunction make_definable_function(DefinablePredicate source,
                                                 DefinablePredicate target, Formula graph) {
  for (const auto& sv : source.context)
    for (const auto& tv : target.context)
      if (sv.name == tv.name)
        throw CmtkError("source and target contexts must use distinct variable names");
  std::vector<Variable> joint = source.context;
  joint.insert(joint.end(), target.context.begin(), target.context.end());
  for (const auto& fv : free_variables(graph))
    if (std::find(joint.begin(), joint.end(), fv) == joint.end())
      throw CmtkError("graph formula has a stray free variable " + fv.name);
  return DefinableFunction{std::move(source), std::move(target), std::move(graph)};
}

// The relativized identity morphism on A.
inline DefinableFunction identity_function(const DefinablePredicate& A, const Signature& sig) {
  if (A.context.empty()) return make_definable_function(A, A, A.representative());
  std::set<std::string> taken;
  for (const auto& v : A.context) taken.insert(v.name);
  std::vector<Variable> ys = fresh_context(A.context, taken);
  DefinablePredicate B = rename_context(A, ys);
  Formula graph = f_max(A.representative(), max_metric_formula(sig, A.context, ys));
  return make_definable_function(A, B, std::move(graph));
}

struct FunctionCheckModel {
  ZeroSet src, dst;
  std::vector<size_t> mapping;  // src member index -> dst member index
  ModulusEstimate modulus;      // empirical modulus of the induced map
};

struct FunctionCheck {
  Report report;
  std::vector<FunctionCheckModel> per_model;
  bool ok = false;
};

inline FunctionCheck check_definable_function(std::span<const FiniteStructure* const> models,
                                              const DefinableFunction& f) {
  FunctionCheck out;
  out.report.command = "check";
  out.report.what = "definable-function";
  out.ok = true;

  std::vector<Variable> joint = f.source.context;
  joint.insert(joint.end(), f.target.context.begin(), f.target.context.end());

  for (size_t mi = 0; mi < models.size(); ++mi) {
    const FiniteStructure& M = *models[mi];
    std::string tag = "model " + std::to_string(mi);
    FunctionCheckModel pm;
    pm.src = zero_set(M, f.source);
    pm.dst = zero_set(M, f.target);
    ZeroSet zg = zero_set(M, DefinablePredicate::single(f.graph, joint));

    std::vector<std::string> ssorts, tsorts;
    for (const auto& v : f.source.context) ssorts.push_back(v.sort);
    for (const auto& v : f.target.context) tsorts.push_back(v.sort);

    std::vector<std::string> bad;
    std::vector<std::optional<size_t>> image(pm.src.members.size());
    for (const auto& pair : zg.members) {
      std::vector<size_t> xt(pair.begin(), pair.begin() + f.source.context.size());
      std::vector<size_t> yt(pair.begin() + f.source.context.size(), pair.end());
      auto si = pm.src.index_of(xt);
      if (!si) {
        bad.push_back("graph point " + M.tuple_name(ssorts, xt) + " outside Z(A)");
        continue;
      }
      auto di = pm.dst.index_of(yt);
      if (!di) {
        bad.push_back("image " + M.tuple_name(tsorts, yt) + " of " + M.tuple_name(ssorts, xt) +
                      " outside Z(B)");
        continue;
      }
      if (image[*si] && *image[*si] != *di) {
        bad.push_back("multivalued at " + M.tuple_name(ssorts, xt) + ": " +
                      M.tuple_name(tsorts, pm.dst.members[*image[*si]]) + " and " +
                      M.tuple_name(tsorts, yt));
        continue;
      }
      image[*si] = *di;
    }
    for (size_t si = 0; si < image.size(); ++si) {
      if (!image[si]) {
        bad.push_back("no image for " + M.tuple_name(ssorts, pm.src.members[si]));
      } else {
        pm.mapping.push_back(*image[si]);
      }
    }
    bool here_ok = bad.empty();
    out.report.add_check(tag + " graph is a total function", here_ok, "", bad);

    if (here_ok) {
      std::vector<std::pair<Rat, Rat>> samples;
      std::set<Rat> levels;
      for (size_t a = 0; a < pm.src.members.size(); ++a)
        for (size_t b = a + 1; b < pm.src.members.size(); ++b) {
          Rat ds = tuple_distance(M, f.source.context, pm.src.members[a], pm.src.members[b]);
          Rat dt = tuple_distance(M, f.target.context, pm.dst.members[pm.mapping[a]],
                                  pm.dst.members[pm.mapping[b]]);
          samples.emplace_back(ds, dt);
          if (ds > 0 && ds <= 1) levels.insert(ds);
        }
      if (levels.empty()) levels.insert(Rat(1));
      for (const Rat& delta : levels) {
        Rat eps(0);
        for (const auto& [d, diff] : samples)
          if (d < delta) eps = rat_max(eps, diff);
        pm.modulus.staircase.pairs.emplace_back(delta, eps);
      }
      pm.modulus.staircase.normalize();
      pm.modulus.max_difference = Rat(0);
      for (const auto& [d, diff] : samples)
        pm.modulus.max_difference = rat_max(pm.modulus.max_difference, diff);
    }
    out.ok = out.ok && here_ok;
    out.per_model.push_back(std::move(pm));
  }
  return out;
}

inline FunctionCheck check_definable_function(const FiniteStructure& M,
                                              const DefinableFunction& f) {
  const FiniteStructure* ms[1] = {&M};
  return check_definable_function(ms, f);
}

// Composition: exists_y ( alpha(x,y) /\ beta(y,z) ), with /\ read as max.
inline DefinableFunction compose_definable(const DefinableFunction& f,
                                           const DefinableFunction& g) {
  // f: A -> B, g: B' -> C with B and B' the same predicate up to renaming.
  if (f.target.context.size() != g.source.context.size())
    throw CmtkError("composition target/source mismatch: context lengths differ");
  for (size_t i = 0; i < f.target.context.size(); ++i)
    if (f.target.context[i].sort != g.source.context[i].sort)
      throw CmtkError("composition target/source mismatch: sorts differ");
  DefinablePredicate g_src_aligned = rename_context(g.source, f.target.context);
  if (!(g_src_aligned.formulas == f.target.formulas))
    throw CmtkError("composition target/source mismatch: predicates differ");

  std::set<std::string> taken;
  for (const auto& v : f.source.context) taken.insert(v.name);
  for (const auto& v : f.target.context) taken.insert(v.name);
  for (const auto& v : g.source.context) taken.insert(v.name);
  for (const auto& v : g.target.context) taken.insert(v.name);
  std::vector<Variable> zs = fresh_context(g.target.context, taken);
  for (const auto& v : zs) taken.insert(v.name);
  DefinablePredicate C = rename_context(g.target, zs);

  // Simultaneous renaming via fresh intermediates: sequential substitution
  // would conflate g's target variables with f's.
  std::vector<Variable> temps = fresh_context(g.source.context, taken);
  Formula beta = g.graph;
  for (size_t i = 0; i < g.source.context.size(); ++i)
    beta = substitute(beta, g.source.context[i], Term::make_var(temps[i]));
  for (size_t i = 0; i < g.target.context.size(); ++i)
    beta = substitute(beta, g.target.context[i], Term::make_var(zs[i]));
  for (size_t i = 0; i < temps.size(); ++i)
    beta = substitute(beta, temps[i], Term::make_var(f.target.context[i]));

  Formula graph = f_inf(f.target.context, f_max(f.graph, std::move(beta)));
  return make_definable_function(f.source, std::move(C), std::move(graph));
}

// Morphism identity relative to a registered model suite: equality of the
// induced functions on every model.
struct MorphismEquality {
  bool equal = true;
  std::string witness;
};

inline MorphismEquality morphism_equal(std::span<const FiniteStructure* const> models,
                                       const DefinableFunction& f, const DefinableFunction& g) {
  MorphismEquality out;
  FunctionCheck cf = check_definable_function(models, f);
  FunctionCheck cg = check_definable_function(models, g);
  if (!cf.ok || !cg.ok) {
    out.equal = false;
    out.witness = "not a definable function on the suite";
    return out;
  }
  for (size_t mi = 0; mi < models.size(); ++mi) {
    const auto& a = cf.per_model[mi];
    const auto& b = cg.per_model[mi];
    if (a.src.members != b.src.members || a.dst.members != b.dst.members) {
      out.equal = false;
      out.witness = "model " + std::to_string(mi) + ": source or target zero sets differ";
      return out;
    }
    for (size_t si = 0; si < a.mapping.size(); ++si)
      if (a.mapping[si] != b.mapping[si]) {
        const FiniteStructure& M = *models[mi];
        std::vector<std::string> ssorts, tsorts;
        for (const auto& v : f.source.context) ssorts.push_back(v.sort);
        for (const auto& v : f.target.context) tsorts.push_back(v.sort);
        out.equal = false;
        out.witness = "model " + std::to_string(mi) + ": " +
                      M.tuple_name(ssorts, a.src.members[si]) + " maps to " +
                      M.tuple_name(tsorts, a.dst.members[a.mapping[si]]) + " vs " +
                      M.tuple_name(tsorts, a.dst.members[b.mapping[si]]);
        return out;
      }
  }
  return out;
}

}  // namespace cmtk
