#pragma once

#include "cmtk/definability.hpp"

#include <algorithm>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace cmtk {

// A constructor precondition failed; the report says which clause and where.
class PrerequisiteError : public CmtkError {
 public:
  Report report;
  PrerequisiteError(const std::string& msg, Report rep)
      : CmtkError(msg), report(std::move(rep)) {}
};

struct GeneratedAxiom {
  std::string label;
  Formula sentence;
};

// An eq-sort built over a base structure: the expanded structure, the new
// sort, and the generated axioms, every one of which must evaluate to 0 on
// the expansion.
struct EqExpansion {
  FiniteStructure expansion;
  std::string new_sort;
  std::vector<std::string> all_new_sorts;
  std::vector<GeneratedAxiom> axioms;
  Report verification;
  Rat truncation_error;          // products only: 2^{-N}
  std::vector<size_t> class_of;  // canparam: parameter tuple -> class index
};

namespace detail {

inline std::shared_ptr<Signature> clone_signature(const Signature& sig) {
  return std::make_shared<Signature>(sig);
}

inline void verify_axioms(const FiniteStructure& M, std::span<const GeneratedAxiom> axioms,
                          Report& rep) {
  for (const auto& ax : axioms) {
    auto sat = satisfies(M, ax.sentence, Rat(0));
    rep.add_check(ax.label, sat.satisfied && sat.value.is_exact && sat.value.exact == 0,
                  sat.value.str());
  }
}

inline Formula max_chain(std::vector<Formula> parts) {
  if (parts.empty()) throw CmtkError("empty max chain");
  Formula acc = std::move(parts[0]);
  for (size_t i = 1; i < parts.size(); ++i) acc = f_max(std::move(acc), std::move(parts[i]));
  return acc;
}

inline Formula min_chain(std::vector<Formula> parts) {
  if (parts.empty()) throw CmtkError("empty min chain");
  Formula acc = std::move(parts[0]);
  for (size_t i = 1; i < parts.size(); ++i) acc = f_min(std::move(acc), std::move(parts[i]));
  return acc;
}

// Pseudo-metric axioms for a sort's designated metric, as sentences.
inline std::vector<GeneratedAxiom> pseudo_metric_axioms(const std::string& prefix,
                                                        const std::string& metric,
                                                        const std::string& sort) {
  Variable u{"u", sort}, v{"v", sort}, w{"w", sort};
  auto d = [&](const Variable& a, const Variable& b) {
    return f_atom(metric, {Term::make_var(a), Term::make_var(b)});
  };
  std::vector<GeneratedAxiom> out;
  out.push_back({prefix + "_pm_reflexive", f_sup({u}, d(u, u))});
  out.push_back({prefix + "_pm_symmetric", f_sup({u, v}, f_abs_diff(d(u, v), d(v, u)))});
  out.push_back(
      {prefix + "_pm_triangle", f_sup({u, v, w}, f_sub(d(u, w), f_add(d(u, v), d(v, w))))});
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// (1) Closure under (truncated) countable products.
// Metric: sum over i <= N of d_i(pi_i(x), pi_i(y)) / 2^i, recorded with the
// 2^{-N} truncation bound.

inline EqExpansion build_product(const FiniteStructure& M, std::vector<std::string> sorts,
                                 size_t depth, const std::string& name) {
  if (depth < 1 || depth > sorts.size())
    throw CmtkError("product depth must lie in [1, number of sorts]");
  sorts.resize(depth);
  for (const auto& s : sorts)
    if (!M.sig->metric_of(s)) throw CmtkError("product factor sort " + s + " has no metric");

  EqExpansion out;
  out.new_sort = name;
  out.all_new_sorts = {name};
  out.truncation_error = pow2_inv(static_cast<unsigned>(depth));

  auto sig = detail::clone_signature(*M.sig);
  sig->sorts.push_back(name);
  RelationSymbol dm;
  dm.name = "d_" + name;
  dm.domain = {name, name};
  dm.metric_for = name;
  sig->relations.push_back(dm);
  std::vector<std::string> proj_names;
  for (size_t i = 0; i < depth; ++i) {
    FunctionSymbol pi;
    pi.name = "pi" + std::to_string(i + 1) + "_" + name;
    pi.domain = {name};
    pi.codomain = sorts[i];
    proj_names.push_back(pi.name);
    sig->functions.push_back(std::move(pi));
  }
  sig->validate();

  FiniteStructure E = M;
  E.sig = sig;
  TupleSpace sp = M.space(sorts);
  std::vector<std::string> carrier;
  std::vector<std::vector<size_t>> tuples;
  for (size_t flat = 0; flat < sp.size(); ++flat) {
    auto t = sp.decode(flat);
    std::string nm = "(";
    for (size_t i = 0; i < t.size(); ++i) {
      if (i) nm += ",";
      nm += M.carrier(sorts[i])[t[i]];
    }
    carrier.push_back(nm + ")");
    tuples.push_back(std::move(t));
  }
  E.carriers[name] = carrier;
  for (size_t i = 0; i < depth; ++i) {
    std::vector<uint32_t> table(tuples.size());
    for (size_t k = 0; k < tuples.size(); ++k) table[k] = static_cast<uint32_t>(tuples[k][i]);
    E.functions[proj_names[i]] = std::move(table);
  }
  std::vector<Rat> dtable(tuples.size() * tuples.size());
  for (size_t a = 0; a < tuples.size(); ++a)
    for (size_t b = 0; b < tuples.size(); ++b) {
      Rat sum(0);
      for (size_t i = 0; i < depth; ++i)
        sum += M.metric(sorts[i], tuples[a][i], tuples[b][i]) * pow2_inv(static_cast<unsigned>(i + 1));
      dtable[a * tuples.size() + b] = sum;
    }
  E.relations[dm.name] = std::move(dtable);
  E.validate();

  // axioms at every level n <= N
  Variable y{"y", name}, yy{"y'", name};
  for (size_t n = 1; n <= depth; ++n) {
    std::vector<Variable> xs;
    std::vector<Formula> comps;
    for (size_t i = 0; i < n; ++i) {
      Variable xi{"x" + std::to_string(i + 1), sorts[i]};
      xs.push_back(xi);
      comps.push_back(f_atom(*M.sig->metric_of(sorts[i]),
                             {Term::make_app(proj_names[i], {Term::make_var(y)}),
                              Term::make_var(xi)}));
    }
    out.axioms.push_back({name + "_prefix_cover_" + std::to_string(n),
                          f_sup(xs, f_inf({y}, detail::max_chain(std::move(comps))))});

    std::optional<Formula> sum;
    for (size_t i = 0; i < n; ++i) {
      Formula di = f_atom(*M.sig->metric_of(sorts[i]),
                          {Term::make_app(proj_names[i], {Term::make_var(y)}),
                           Term::make_app(proj_names[i], {Term::make_var(yy)})});
      Formula scaled = f_scale_pow2(std::move(di), static_cast<unsigned>(i + 1));
      sum = sum ? f_add(std::move(*sum), std::move(scaled)) : std::move(scaled);
    }
    Formula dP = f_atom(dm.name, {Term::make_var(y), Term::make_var(yy)});
    Formula body = f_sub(f_abs_diff(std::move(dP), std::move(*sum)),
                         f_const(pow2_inv(static_cast<unsigned>(n))));
    out.axioms.push_back(
        {name + "_metric_truncation_" + std::to_string(n), f_sup({y, yy}, std::move(body))});
  }
  for (auto& ax : detail::pseudo_metric_axioms(name, dm.name, name)) out.axioms.push_back(ax);

  out.expansion = std::move(E);
  out.verification.command = "eq";
  out.verification.what = "product";
  detail::verify_axioms(out.expansion, out.axioms, out.verification);
  return out;
}

// ---------------------------------------------------------------------------
// (2) Closure under definable sets: a sort for the zero set, with coordinate
// projections and the inherited max metric.

inline EqExpansion build_defset_sort(const FiniteStructure& M, const DefinablePredicate& A,
                                     const std::string& name) {
  DefinabilityCheck crit = check_syntactic_definability(M, A);
  if (!crit.passed)
    throw PrerequisiteError("defset " + name +
                                ": predicate fails the syntactic definability criterion",
                            crit.report);
  ZeroSet z = zero_set(M, A);

  EqExpansion out;
  out.new_sort = name;
  out.all_new_sorts = {name};

  auto sig = detail::clone_signature(*M.sig);
  sig->sorts.push_back(name);
  RelationSymbol dm;
  dm.name = "d_" + name;
  dm.domain = {name, name};
  dm.metric_for = name;
  sig->relations.push_back(dm);
  std::vector<std::string> fnames;
  for (size_t i = 0; i < A.context.size(); ++i) {
    FunctionSymbol fi;
    fi.name = "f" + std::to_string(i + 1) + "_" + name;
    fi.domain = {name};
    fi.codomain = A.context[i].sort;
    fnames.push_back(fi.name);
    sig->functions.push_back(std::move(fi));
  }
  sig->validate();

  std::vector<std::string> xsorts;
  for (const auto& v : A.context) xsorts.push_back(v.sort);

  FiniteStructure E = M;
  E.sig = sig;
  std::vector<std::string> carrier;
  for (const auto& m : z.members) carrier.push_back(M.tuple_name(xsorts, m));
  E.carriers[name] = carrier;
  for (size_t i = 0; i < A.context.size(); ++i) {
    std::vector<uint32_t> table(z.members.size());
    for (size_t k = 0; k < z.members.size(); ++k)
      table[k] = static_cast<uint32_t>(z.members[k][i]);
    E.functions[fnames[i]] = std::move(table);
  }
  std::vector<Rat> dtable(z.members.size() * z.members.size());
  for (size_t a = 0; a < z.members.size(); ++a)
    for (size_t b = 0; b < z.members.size(); ++b)
      dtable[a * z.members.size() + b] = tuple_distance(M, A.context, z.members[a], z.members[b]);
  E.relations[dm.name] = std::move(dtable);
  E.validate();

  // |A(x) - exists_y max_i d_i(x_i, f_i(y))|
  Variable y{"y", name}, yy{"y'", name};
  std::vector<Formula> comps;
  for (size_t i = 0; i < A.context.size(); ++i)
    comps.push_back(f_atom(*M.sig->metric_of(A.context[i].sort),
                           {Term::make_var(A.context[i]),
                            Term::make_app(fnames[i], {Term::make_var(y)})}));
  Formula dist_via_sort = f_inf({y}, detail::max_chain(std::move(comps)));
  out.axioms.push_back({name + "_distance",
                        f_sup(A.context, f_abs_diff(A.representative(), std::move(dist_via_sort)))});

  // |d_A(u,v) - max_i d_i(f_i(u), f_i(v))|
  std::vector<Formula> mcomps;
  for (size_t i = 0; i < A.context.size(); ++i)
    mcomps.push_back(f_atom(*M.sig->metric_of(A.context[i].sort),
                            {Term::make_app(fnames[i], {Term::make_var(y)}),
                             Term::make_app(fnames[i], {Term::make_var(yy)})}));
  Formula dA = f_atom(dm.name, {Term::make_var(y), Term::make_var(yy)});
  out.axioms.push_back({name + "_metric",
                        f_sup({y, yy},
                              f_abs_diff(std::move(dA), detail::max_chain(std::move(mcomps))))});
  for (auto& ax : detail::pseudo_metric_axioms(name, dm.name, name)) out.axioms.push_back(ax);

  out.expansion = std::move(E);
  out.verification.command = "eq";
  out.verification.what = "defset";
  out.verification.add_field("metric_clause_reading", "max over the coordinate metrics");
  detail::verify_axioms(out.expansion, out.axioms, out.verification);
  return out;
}

// ---------------------------------------------------------------------------
// (3) Closure under canonical parameters: the parameter sort is quotiented
// by rho(b, b') = sup_x |phi(x,b) - phi(x,b')|. The metric clause is read
// with the absolute value inside the sup; rho must be symmetric to be a
// pseudo-metric, and reports cite the reading.

struct CanParamSpec {
  Formula phi;
  std::vector<Variable> xvars;
  std::vector<Variable> yvars;
};

struct CanParamInfo {
  std::string sort;
  std::string val_relation;                // phi-slices through class representatives
  std::vector<Variable> xvars;
  std::vector<std::vector<Rat>> slices;    // per class, a table over the x-space
};

struct CanParamResult {
  EqExpansion expansion;
  CanParamInfo info;
};

inline CanParamResult build_canparam(const FiniteStructure& M, const CanParamSpec& spec,
                                     const std::string& name) {
  for (const auto& fv : free_variables(spec.phi)) {
    bool known = std::find(spec.xvars.begin(), spec.xvars.end(), fv) != spec.xvars.end() ||
                 std::find(spec.yvars.begin(), spec.yvars.end(), fv) != spec.yvars.end();
    if (!known) throw CmtkError("canparam formula has stray free variable " + fv.name);
  }
  if (spec.yvars.empty()) throw CmtkError("canparam needs a nonempty parameter context");
  if (spec.xvars.empty()) throw CmtkError("canparam needs a nonempty x-context");

  std::vector<std::string> xsorts, ysorts;
  for (const auto& v : spec.xvars) xsorts.push_back(v.sort);
  for (const auto& v : spec.yvars) ysorts.push_back(v.sort);
  TupleSpace xsp = M.space(xsorts);
  TupleSpace ysp = M.space(ysorts);

  std::vector<Variable> joint = spec.xvars;
  joint.insert(joint.end(), spec.yvars.begin(), spec.yvars.end());
  std::vector<Rat> table = eval_table(M, spec.phi, joint);  // x-major, y-minor

  // slice of parameter b: the function x |-> phi(x, b)
  auto slice_value = [&](size_t b, size_t x) -> const Rat& {
    return table[x * ysp.size() + b];
  };
  std::vector<size_t> class_of(ysp.size());
  std::vector<size_t> reps;
  std::vector<std::vector<Rat>> slices;
  for (size_t b = 0; b < ysp.size(); ++b) {
    std::vector<Rat> s(xsp.size());
    for (size_t x = 0; x < xsp.size(); ++x) s[x] = slice_value(b, x);
    bool found = false;
    for (size_t c = 0; c < slices.size(); ++c)
      if (slices[c] == s) {
        class_of[b] = c;
        found = true;
        break;
      }
    if (!found) {
      class_of[b] = slices.size();
      reps.push_back(b);
      slices.push_back(std::move(s));
    }
  }

  CanParamResult out;
  out.expansion.new_sort = name;
  out.expansion.all_new_sorts = {name};
  out.expansion.class_of = class_of;

  auto sig = detail::clone_signature(*M.sig);
  sig->sorts.push_back(name);
  RelationSymbol dm;
  dm.name = "d_" + name;
  dm.domain = {name, name};
  dm.metric_for = name;
  sig->relations.push_back(dm);
  FunctionSymbol pi;
  pi.name = "pi_" + name;
  pi.domain = ysorts;
  pi.codomain = name;
  sig->functions.push_back(pi);
  RelationSymbol val;
  val.name = "val_" + name;
  val.domain = xsorts;
  val.domain.push_back(name);
  sig->relations.push_back(val);
  sig->validate();

  FiniteStructure E = M;
  E.sig = sig;
  std::vector<std::string> carrier;
  for (size_t c = 0; c < reps.size(); ++c)
    carrier.push_back("[" + M.tuple_name(ysorts, ysp.decode(reps[c])) + "]");
  E.carriers[name] = carrier;
  std::vector<uint32_t> pi_table(ysp.size());
  for (size_t b = 0; b < ysp.size(); ++b) pi_table[b] = static_cast<uint32_t>(class_of[b]);
  E.functions[pi.name] = std::move(pi_table);
  std::vector<Rat> dtable(slices.size() * slices.size());
  for (size_t a = 0; a < slices.size(); ++a)
    for (size_t b = 0; b < slices.size(); ++b) {
      Rat rho(0);
      for (size_t x = 0; x < xsp.size(); ++x)
        rho = rat_max(rho, abs_diff(slices[a][x], slices[b][x]));
      dtable[a * slices.size() + b] = rho;
    }
  E.relations[dm.name] = std::move(dtable);
  std::vector<Rat> val_table(xsp.size() * slices.size());
  for (size_t x = 0; x < xsp.size(); ++x)
    for (size_t c = 0; c < slices.size(); ++c)
      val_table[x * slices.size() + c] = slices[c][x];
  E.relations[val.name] = std::move(val_table);
  E.validate();

  // axioms (absolute-value reading of the metric clause)
  std::set<std::string> taken;
  for (const auto& v : joint) taken.insert(v.name);
  std::vector<Variable> yvars2 = fresh_context(spec.yvars, taken);
  Formula phi2 = spec.phi;
  {
    DefinablePredicate tmp;
    tmp.context = spec.yvars;
    tmp.formulas = {spec.phi};
    phi2 = rename_context(tmp, yvars2).representative();
  }
  auto pi_of = [&](std::span<const Variable> ys) {
    std::vector<Term> args;
    for (const auto& v : ys) args.push_back(Term::make_var(v));
    return Term::make_app(pi.name, std::move(args));
  };
  Formula d_pi = f_atom(dm.name, {pi_of(spec.yvars), pi_of(yvars2)});
  Formula sup_diff = f_sup(spec.xvars, f_abs_diff(spec.phi, phi2));
  std::vector<Variable> yy = spec.yvars;
  yy.insert(yy.end(), yvars2.begin(), yvars2.end());
  out.expansion.axioms.push_back(
      {name + "_metric", f_sup(yy, f_abs_diff(std::move(d_pi), std::move(sup_diff)))});

  Variable zv{"z", name};
  out.expansion.axioms.push_back(
      {name + "_surjective",
       f_sup({zv}, f_inf(spec.yvars, f_atom(dm.name, {pi_of(spec.yvars), Term::make_var(zv)})))});

  std::vector<Term> val_args;
  for (const auto& v : spec.xvars) val_args.push_back(Term::make_var(v));
  val_args.push_back(pi_of(spec.yvars));
  out.expansion.axioms.push_back(
      {name + "_slice",
       f_sup(joint, f_abs_diff(f_atom(val.name, std::move(val_args)), spec.phi))});
  for (auto& ax : detail::pseudo_metric_axioms(name, dm.name, name))
    out.expansion.axioms.push_back(ax);

  out.expansion.expansion = std::move(E);
  out.expansion.verification.command = "eq";
  out.expansion.verification.what = "canparam";
  out.expansion.verification.add_field("metric_axiom_reading",
                                       "absolute value |phi(x,y) - phi(x,y')| inside the sup");
  detail::verify_axioms(out.expansion.expansion, out.expansion.axioms,
                        out.expansion.verification);

  out.info.sort = name;
  out.info.val_relation = val.name;
  out.info.xvars = spec.xvars;
  out.info.slices = std::move(slices);
  return out;
}

// ---------------------------------------------------------------------------
// (4) Closure under finite unions of canonical-parameter sorts. Points are
// phi-slices; points at cross-distance 0 are identified.

inline EqExpansion build_union(const FiniteStructure& M, std::span<const CanParamInfo> infos,
                               const std::string& name) {
  if (infos.empty()) throw CmtkError("union of no canparam sorts");
  for (size_t j = 1; j < infos.size(); ++j) {
    if (infos[j].xvars.size() != infos[0].xvars.size())
      throw CmtkError("union members must share the x-context");
    for (size_t i = 0; i < infos[0].xvars.size(); ++i)
      if (infos[j].xvars[i].sort != infos[0].xvars[i].sort)
        throw CmtkError("union members must share the x-context sorts");
  }

  EqExpansion out;
  out.new_sort = name;
  out.all_new_sorts = {name};

  auto sig = detail::clone_signature(*M.sig);
  sig->sorts.push_back(name);
  RelationSymbol dm;
  dm.name = "d_" + name;
  dm.domain = {name, name};
  dm.metric_for = name;
  sig->relations.push_back(dm);
  std::vector<std::string> inames;
  for (size_t j = 0; j < infos.size(); ++j) {
    FunctionSymbol ij;
    ij.name = "i" + std::to_string(j + 1) + "_" + name;
    ij.domain = {infos[j].sort};
    ij.codomain = name;
    inames.push_back(ij.name);
    sig->functions.push_back(std::move(ij));
  }
  sig->validate();

  // glue: one union point per distinct slice table
  std::vector<std::vector<Rat>> points;
  std::vector<std::string> carrier;
  std::vector<std::vector<uint32_t>> injections(infos.size());
  for (size_t j = 0; j < infos.size(); ++j) {
    for (size_t c = 0; c < infos[j].slices.size(); ++c) {
      const auto& s = infos[j].slices[c];
      size_t idx = points.size();
      for (size_t p = 0; p < points.size(); ++p)
        if (points[p] == s) {
          idx = p;
          break;
        }
      if (idx == points.size()) {
        points.push_back(s);
        carrier.push_back(std::to_string(j + 1) + ":" +
                          M.carrier(infos[j].sort)[c]);
      }
      injections[j].push_back(static_cast<uint32_t>(idx));
    }
  }

  FiniteStructure E = M;
  E.sig = sig;
  E.carriers[name] = carrier;
  for (size_t j = 0; j < infos.size(); ++j) E.functions[inames[j]] = injections[j];
  std::vector<Rat> dtable(points.size() * points.size());
  for (size_t a = 0; a < points.size(); ++a)
    for (size_t b = 0; b < points.size(); ++b) {
      Rat rho(0);
      for (size_t x = 0; x < points[a].size(); ++x)
        rho = rat_max(rho, abs_diff(points[a][x], points[b][x]));
      dtable[a * points.size() + b] = rho;
    }
  E.relations[dm.name] = std::move(dtable);
  E.validate();

  // covering: forall u, some member sort reaches it at distance 0
  Variable u{"u", name};
  std::vector<Formula> cover;
  for (size_t j = 0; j < infos.size(); ++j) {
    Variable yj{"y" + std::to_string(j + 1), infos[j].sort};
    cover.push_back(f_inf({yj}, f_atom(dm.name, {Term::make_var(u),
                                                 Term::make_app(inames[j],
                                                                {Term::make_var(yj)})})));
  }
  out.axioms.push_back({name + "_covering", f_sup({u}, detail::min_chain(std::move(cover)))});

  // cross distances agree with sup_x |phi_j - phi_k| through the slice relations
  const auto& xs = infos[0].xvars;
  for (size_t j = 0; j < infos.size(); ++j)
    for (size_t k = 0; k < infos.size(); ++k) {
      Variable yj{"y", infos[j].sort}, zk{"z", infos[k].sort};
      Formula dij = f_atom(dm.name, {Term::make_app(inames[j], {Term::make_var(yj)}),
                                     Term::make_app(inames[k], {Term::make_var(zk)})});
      std::vector<Term> aj, ak;
      for (const auto& v : xs) aj.push_back(Term::make_var(v));
      ak = aj;
      aj.push_back(Term::make_var(yj));
      ak.push_back(Term::make_var(zk));
      Formula diff = f_sup(xs, f_abs_diff(f_atom(infos[j].val_relation, std::move(aj)),
                                          f_atom(infos[k].val_relation, std::move(ak))));
      out.axioms.push_back({name + "_cross_" + std::to_string(j + 1) + "_" +
                                std::to_string(k + 1),
                            f_sup({yj, zk}, f_abs_diff(std::move(dij), std::move(diff)))});
    }
  for (auto& ax : detail::pseudo_metric_axioms(name, dm.name, name)) out.axioms.push_back(ax);

  out.expansion = std::move(E);
  out.verification.command = "eq";
  out.verification.what = "union";
  detail::verify_axioms(out.expansion, out.axioms, out.verification);
  return out;
}

// Builds the member canparam sorts first, then their union, layering the
// expansions over the input structure.
struct UnionResult {
  EqExpansion expansion;               // the final structure with all sorts
  std::vector<CanParamInfo> members;
  std::vector<EqExpansion> member_expansions;
};

inline UnionResult build_union_from_specs(const FiniteStructure& M,
                                          std::span<const CanParamSpec> specs,
                                          const std::string& name) {
  UnionResult out;
  FiniteStructure current = M;
  for (size_t j = 0; j < specs.size(); ++j) {
    CanParamResult r = build_canparam(current, specs[j], name + "_m" + std::to_string(j + 1));
    current = r.expansion.expansion;
    out.members.push_back(std::move(r.info));
    out.member_expansions.push_back(std::move(r.expansion));
  }
  EqExpansion un = build_union(current, out.members, name);
  std::vector<std::string> ordered;
  for (const auto& m : out.member_expansions) {
    ordered.push_back(m.new_sort);
    for (const auto& ax : m.axioms) un.axioms.push_back(ax);
  }
  ordered.push_back(un.new_sort);
  un.all_new_sorts = std::move(ordered);
  un.verification = Report{};
  un.verification.command = "eq";
  un.verification.what = "union";
  detail::verify_axioms(un.expansion, un.axioms, un.verification);
  out.expansion = std::move(un);
  return out;
}

// ---------------------------------------------------------------------------
// Flim: the forced-limit operator on finite prefixes. b_0 = a_0 and
// b_{k+1} clamps a_{k+1} into [b_k - 2^{-k}, b_k + 2^{-k}]; the returned
// error bound 2^{-N} is valid for rate-compliant inputs.

struct FlimResult {
  Rat value;
  Rat error_bound;
};

inline FlimResult flim(std::span<const Rat> prefix) {
  if (prefix.empty()) throw CmtkError("flim of an empty prefix");
  Rat b = prefix[0];
  Rat window(1);
  for (size_t k = 1; k < prefix.size(); ++k) {
    Rat lo = b - window, hi = b + window;
    const Rat& a = prefix[k];
    b = a < lo ? lo : (a > hi ? hi : a);
    window /= 2;
  }
  return {b, pow2_inv(static_cast<unsigned>(prefix.size() - 1))};
}

// ---------------------------------------------------------------------------
// The canonical-parameter tower from the conceptual-completeness proof:
// finite-depth product of union sorts U_n, quotiented by
// rho(a, b) = sup_x |Flim(a_n(x)) - Flim(b_n(x))|.

struct TowerResult {
  EqExpansion expansion;
  std::vector<UnionResult> levels;
  std::vector<size_t> f_phi;  // parameter tuple -> tower class
  bool separation_ok = false;
};

inline TowerResult build_canparam_tower(const FiniteStructure& M, const CanParamSpec& phi_spec,
                                        std::span<const std::vector<CanParamSpec>> levels,
                                        const std::string& name) {
  if (levels.empty()) throw CmtkError("tower needs at least one level");
  TowerResult out;

  std::vector<std::string> xsorts, ysorts;
  for (const auto& v : phi_spec.xvars) xsorts.push_back(v.sort);
  for (const auto& v : phi_spec.yvars) ysorts.push_back(v.sort);
  TupleSpace xsp = M.space(xsorts);
  TupleSpace ysp = M.space(ysorts);

  std::vector<Variable> joint = phi_spec.xvars;
  joint.insert(joint.end(), phi_spec.yvars.begin(), phi_spec.yvars.end());
  std::vector<Rat> phi_table = eval_table(M, phi_spec.phi, joint);
  auto phi_slice = [&](size_t b) {
    std::vector<Rat> s(xsp.size());
    for (size_t x = 0; x < xsp.size(); ++x) s[x] = phi_table[x * ysp.size() + b];
    return s;
  };

  // build the union sorts level by level
  FiniteStructure current = M;
  for (size_t n = 0; n < levels.size(); ++n) {
    UnionResult u =
        build_union_from_specs(current, levels[n], name + "_U" + std::to_string(n + 1));
    current = u.expansion.expansion;
    out.levels.push_back(std::move(u));
  }

  // approximant guarantee: every parameter slice has a 2^{-n}-close point in U_n
  Report rate_report;
  rate_report.command = "eq";
  rate_report.what = "tower";
  std::vector<std::vector<size_t>> choice(levels.size(),
                                          std::vector<size_t>(ysp.size()));
  bool rate_ok = true;
  for (size_t n = 0; n < levels.size(); ++n) {
    // the union's points, collected across its members
    std::vector<std::vector<Rat>> points;
    {
      const EqExpansion& ue = out.levels[n].expansion;
      const FiniteStructure& E = ue.expansion;
      size_t usz = E.carrier(ue.new_sort).size();
      points.resize(usz);
      for (size_t j = 0; j < out.levels[n].members.size(); ++j) {
        const auto& info = out.levels[n].members[j];
        const auto& inj = E.functions.at("i" + std::to_string(j + 1) + "_" + ue.new_sort);
        for (size_t c = 0; c < info.slices.size(); ++c) points[inj[c]] = info.slices[c];
      }
    }
    Rat bound = pow2_inv(static_cast<unsigned>(n + 1));
    std::vector<std::string> bad;
    for (size_t b = 0; b < ysp.size(); ++b) {
      std::vector<Rat> target = phi_slice(b);
      Rat best(2);
      size_t best_idx = 0;
      for (size_t p = 0; p < points.size(); ++p) {
        Rat sup(0);
        for (size_t x = 0; x < xsp.size(); ++x)
          sup = rat_max(sup, abs_diff(points[p][x], target[x]));
        if (sup < best) {
          best = sup;
          best_idx = p;
        }
      }
      choice[n][b] = best_idx;
      if (best > bound) {
        auto t = ysp.decode(b);
        bad.push_back("level " + std::to_string(n + 1) + " parameter " +
                      M.tuple_name(ysorts, t) + ": best approximation " + rat_to_string(best) +
                      " > " + rat_to_string(bound));
      }
    }
    rate_report.add_check("approximation_rate[" + std::to_string(n + 1) + "]", bad.empty(), "",
                          bad);
    rate_ok = rate_ok && bad.empty();
  }
  if (!rate_ok)
    throw PrerequisiteError("tower " + name + ": approximation-rate violation", rate_report);

  // the product of the union carriers, quotiented by the Flim pseudo-metric
  std::vector<std::string> union_sorts;
  std::vector<std::vector<std::vector<Rat>>> level_points(levels.size());
  for (size_t n = 0; n < levels.size(); ++n) {
    const EqExpansion& ue = out.levels[n].expansion;
    union_sorts.push_back(ue.new_sort);
    const FiniteStructure& E = ue.expansion;
    size_t usz = E.carrier(ue.new_sort).size();
    level_points[n].resize(usz);
    for (size_t j = 0; j < out.levels[n].members.size(); ++j) {
      const auto& info = out.levels[n].members[j];
      const auto& inj = E.functions.at("i" + std::to_string(j + 1) + "_" + ue.new_sort);
      for (size_t c = 0; c < info.slices.size(); ++c) level_points[n][inj[c]] = info.slices[c];
    }
  }
  TupleSpace tsp = current.space(union_sorts);
  if (tsp.size() > 200000) throw CmtkError("tower product too large at desk scale");

  // Flim'd table of a product tuple
  auto flim_table = [&](std::span<const size_t> tuple) {
    std::vector<Rat> table(xsp.size());
    std::vector<Rat> prefix(levels.size());
    for (size_t x = 0; x < xsp.size(); ++x) {
      for (size_t n = 0; n < levels.size(); ++n) prefix[n] = level_points[n][tuple[n]][x];
      table[x] = flim(prefix).value;
    }
    return table;
  };

  std::vector<std::vector<Rat>> class_tables;
  std::vector<std::string> carrier;
  std::vector<size_t> class_of(tsp.size());
  for (size_t flat = 0; flat < tsp.size(); ++flat) {
    auto tuple = tsp.decode(flat);
    std::vector<Rat> table = flim_table(tuple);
    size_t idx = class_tables.size();
    for (size_t c = 0; c < class_tables.size(); ++c)
      if (class_tables[c] == table) {
        idx = c;
        break;
      }
    if (idx == class_tables.size()) {
      class_tables.push_back(std::move(table));
      std::string nm = "[";
      for (size_t n = 0; n < tuple.size(); ++n) {
        if (n) nm += ";";
        nm += current.carrier(union_sorts[n])[tuple[n]];
      }
      carrier.push_back(nm + "]");
    }
    class_of[flat] = idx;
  }

  auto sig = detail::clone_signature(*current.sig);
  sig->sorts.push_back(name);
  RelationSymbol dm;
  dm.name = "d_" + name;
  dm.domain = {name, name};
  dm.metric_for = name;
  sig->relations.push_back(dm);
  FunctionSymbol fphi;
  fphi.name = "fphi_" + name;
  fphi.domain = ysorts;
  fphi.codomain = name;
  sig->functions.push_back(fphi);
  sig->validate();

  FiniteStructure E = current;
  E.sig = sig;
  E.carriers[name] = carrier;
  std::vector<Rat> dtable(class_tables.size() * class_tables.size());
  for (size_t a = 0; a < class_tables.size(); ++a)
    for (size_t b = 0; b < class_tables.size(); ++b) {
      Rat rho(0);
      for (size_t x = 0; x < xsp.size(); ++x)
        rho = rat_max(rho, abs_diff(class_tables[a][x], class_tables[b][x]));
      dtable[a * class_tables.size() + b] = rho;
    }
  E.relations[dm.name] = std::move(dtable);

  out.f_phi.resize(ysp.size());
  std::vector<uint32_t> ftable(ysp.size());
  for (size_t b = 0; b < ysp.size(); ++b) {
    std::vector<size_t> tuple(levels.size());
    for (size_t n = 0; n < levels.size(); ++n) tuple[n] = choice[n][b];
    size_t cls = class_of[tsp.encode(tuple)];
    out.f_phi[b] = cls;
    ftable[b] = static_cast<uint32_t>(cls);
  }
  E.functions[fphi.name] = std::move(ftable);
  E.validate();

  out.expansion.new_sort = name;
  out.expansion.expansion = std::move(E);
  out.expansion.class_of = class_of;
  for (auto& lvl : out.levels) {
    for (const auto& s : lvl.expansion.all_new_sorts)
      out.expansion.all_new_sorts.push_back(s);
    for (const auto& ax : lvl.expansion.axioms) out.expansion.axioms.push_back(ax);
  }
  out.expansion.all_new_sorts.push_back(name);
  for (auto& ax : detail::pseudo_metric_axioms(name, dm.name, name))
    out.expansion.axioms.push_back(ax);

  out.expansion.verification = rate_report;
  detail::verify_axioms(out.expansion.expansion, out.expansion.axioms,
                        out.expansion.verification);

  // separation: f_phi identifies parameters exactly when their slices agree
  std::vector<std::string> sep;
  for (size_t b = 0; b < ysp.size(); ++b)
    for (size_t c = b + 1; c < ysp.size(); ++c) {
      bool same_slice = phi_slice(b) == phi_slice(c);
      bool same_image = out.f_phi[b] == out.f_phi[c];
      if (same_slice != same_image) {
        auto tb = ysp.decode(b), tc = ysp.decode(c);
        sep.push_back("parameters " + M.tuple_name(ysorts, tb) + " and " +
                      M.tuple_name(ysorts, tc) +
                      (same_slice ? ": equal slices split" : ": distinct slices identified"));
      }
    }
  out.separation_ok = sep.empty();
  out.expansion.verification.add_check("tower_separation", sep.empty(), "", sep);
  return out;
}

// ---------------------------------------------------------------------------
// Stable embeddedness, by exhaustive witness search.

inline Report check_stably_embedded(const FiniteStructure& M,
                                    std::span<const std::string> base_sorts, const Rat& eps,
                                    const Formula& phi, std::span<const Variable> xvars,
                                    std::span<const Variable> yvars, const Formula& psi,
                                    std::span<const Variable> zvars) {
  Report rep;
  rep.command = "check";
  rep.what = "stable-embedded";
  auto is_base = [&](const std::string& s) {
    return std::find(base_sorts.begin(), base_sorts.end(), s) != base_sorts.end();
  };
  for (const auto& v : xvars)
    if (!is_base(v.sort)) {
      rep.status = "error";
      rep.witnesses.push_back("x-variable " + v.name + " ranges over non-base sort " + v.sort);
      return rep;
    }
  for (const auto& v : zvars)
    if (!is_base(v.sort)) {
      rep.status = "error";
      rep.witnesses.push_back("z-variable " + v.name + " ranges over non-base sort " + v.sort);
      return rep;
    }

  std::vector<Variable> phi_ctx(xvars.begin(), xvars.end());
  phi_ctx.insert(phi_ctx.end(), yvars.begin(), yvars.end());
  std::vector<Rat> phi_table = eval_table(M, phi, phi_ctx);
  std::vector<Variable> psi_ctx(xvars.begin(), xvars.end());
  psi_ctx.insert(psi_ctx.end(), zvars.begin(), zvars.end());
  std::vector<Rat> psi_table = eval_table(M, psi, psi_ctx);

  std::vector<std::string> xsorts, ysorts, zsorts;
  for (const auto& v : xvars) xsorts.push_back(v.sort);
  for (const auto& v : yvars) ysorts.push_back(v.sort);
  for (const auto& v : zvars) zsorts.push_back(v.sort);
  TupleSpace xsp = M.space(xsorts);
  TupleSpace ysp = M.space(ysorts);
  TupleSpace zsp = M.space(zsorts);

  std::vector<std::string> bad;
  for (size_t a = 0; a < ysp.size(); ++a) {
    Rat best(2);
    for (size_t b = 0; b < zsp.size(); ++b) {
      Rat sup(0);
      for (size_t x = 0; x < xsp.size(); ++x)
        sup = rat_max(sup, abs_diff(phi_table[x * ysp.size() + a],
                                    psi_table[x * zsp.size() + b]));
      best = rat_min(best, sup);
      if (best <= eps) break;
    }
    if (best > eps)
      bad.push_back("parameter " + M.tuple_name(ysorts, ysp.decode(a)) + ": best sup-difference " +
                    rat_to_string(best) + " > " + rat_to_string(eps));
  }
  rep.add_check("witness search", bad.empty(), "", bad);
  return rep;
}

// ---------------------------------------------------------------------------
// Conservativity: base sentences keep their exact values on the expansion,
// and the expansion satisfies its own generated axioms.

inline Report check_conservative(const FiniteStructure& base, const EqExpansion& eq,
                                 std::span<const Formula> sentences) {
  Report rep;
  rep.command = "check";
  rep.what = "conservative";
  for (size_t i = 0; i < sentences.size(); ++i) {
    Value before = satisfies(base, sentences[i]).value;
    Value after = satisfies(eq.expansion, sentences[i]).value;
    bool ok = before.is_exact && after.is_exact && before.exact == after.exact;
    rep.add_check("sentence " + std::to_string(i), ok,
                  before.str() + (ok ? "" : " -> " + after.str()));
  }
  for (const auto& ax : eq.axioms) {
    auto sat = satisfies(eq.expansion, ax.sentence);
    rep.add_check("axiom " + ax.label, sat.value.is_exact && sat.value.exact == 0,
                  sat.value.str());
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Executes a parsed eqsort specification, layering each construction over
// the previous expansion.

struct EqRunResult {
  FiniteStructure structure;
  std::vector<GeneratedAxiom> axioms;
  std::vector<std::string> new_sorts;
  Report report;
};

inline EqRunResult run_eqspec(const FiniteStructure& M, const EqSpecFile& spec) {
  EqRunResult out;
  out.report.command = "eq";
  out.report.what = "spec";
  FiniteStructure current = M;
  std::map<std::string, CanParamInfo> canparams;

  for (const auto& decl : spec.sorts) {
    EqExpansion e;
    switch (decl.kind) {
      case EqKind::Product:
        e = build_product(current, decl.product_sorts, decl.depth, decl.name);
        out.report.add_field("truncation_error_" + decl.name,
                             rat_to_string(e.truncation_error));
        break;
      case EqKind::DefSet:
        e = build_defset_sort(current, DefinablePredicate::single(decl.formula, decl.xvars),
                              decl.name);
        break;
      case EqKind::CanParam: {
        CanParamResult r =
            build_canparam(current, CanParamSpec{decl.formula, decl.xvars, decl.yvars},
                           decl.name);
        canparams[decl.name] = r.info;
        e = std::move(r.expansion);
        break;
      }
      case EqKind::Union: {
        std::vector<CanParamInfo> infos;
        for (const auto& ref : decl.union_refs) {
          auto it = canparams.find(ref);
          if (it == canparams.end())
            throw CmtkError("union " + decl.name + " references unknown canparam eqsort " + ref);
          infos.push_back(it->second);
        }
        e = build_union(current, infos, decl.name);
        break;
      }
    }
    current = e.expansion;
    for (const auto& s : e.all_new_sorts) out.new_sorts.push_back(s);
    for (const auto& ax : e.axioms) out.axioms.push_back(ax);
  }

  detail::verify_axioms(current, out.axioms, out.report);
  out.structure = std::move(current);
  return out;
}

}  // namespace cmtk
