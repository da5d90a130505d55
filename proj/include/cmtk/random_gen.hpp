#pragma once

#include "cmtk/semantics.hpp"

#include <random>
#include <string>
#include <vector>

namespace cmtk {

// Deterministic generation of small signatures, structures and formulas for
// the randomized law suites. All draws go through pick() so runs are
// reproducible from the seed alone.
struct Rng {
  std::mt19937 eng;

  explicit Rng(uint32_t seed) : eng(seed) {}
  size_t pick(size_t n) { return n == 0 ? 0 : static_cast<size_t>(eng() % n); }
  bool chance(unsigned percent) { return pick(100) < percent; }
  // A rational k/den with k in [0, den].
  Rat unit_rat(unsigned den = 8) { return Rat(static_cast<long>(pick(den + 1)), den); }
};

struct GenOptions {
  size_t max_sorts = 3;
  size_t max_elems = 4;
  size_t max_relations = 3;
  size_t max_functions = 2;
  size_t max_constants = 2;
  unsigned denominator = 8;
};

inline std::shared_ptr<Signature> random_signature(Rng& rng, const GenOptions& opt = {}) {
  auto sig = std::make_shared<Signature>();
  size_t nsorts = 1 + rng.pick(opt.max_sorts);
  for (size_t i = 0; i < nsorts; ++i) sig->sorts.push_back("S" + std::to_string(i + 1));
  for (size_t i = 0; i < nsorts; ++i) {
    RelationSymbol d;
    d.name = "d" + std::to_string(i + 1);
    d.domain = {sig->sorts[i], sig->sorts[i]};
    d.metric_for = sig->sorts[i];
    sig->relations.push_back(std::move(d));
  }
  size_t nrel = 1 + rng.pick(opt.max_relations);
  for (size_t i = 0; i < nrel; ++i) {
    RelationSymbol r;
    r.name = "P" + std::to_string(i + 1);
    size_t arity = 1 + rng.pick(2);
    for (size_t a = 0; a < arity; ++a) r.domain.push_back(sig->sorts[rng.pick(nsorts)]);
    sig->relations.push_back(std::move(r));
  }
  size_t nfun = rng.pick(opt.max_functions + 1);
  for (size_t i = 0; i < nfun; ++i) {
    FunctionSymbol f;
    f.name = "g" + std::to_string(i + 1);
    size_t arity = 1 + rng.pick(2);
    for (size_t a = 0; a < arity; ++a) f.domain.push_back(sig->sorts[rng.pick(nsorts)]);
    f.codomain = sig->sorts[rng.pick(nsorts)];
    sig->functions.push_back(std::move(f));
  }
  size_t ncon = rng.pick(opt.max_constants + 1);
  for (size_t i = 0; i < ncon; ++i) {
    FunctionSymbol c;
    c.name = "c" + std::to_string(i + 1);
    c.codomain = sig->sorts[rng.pick(nsorts)];
    sig->functions.push_back(std::move(c));
  }
  sig->validate();
  return sig;
}

// Random pseudo-metric: a symmetric start closed under min-plus paths, so
// the triangle inequality holds exactly.
inline std::vector<Rat> random_metric_table(Rng& rng, size_t n, unsigned den) {
  std::vector<Rat> d(n * n, Rat(0));
  for (size_t i = 0; i < n; ++i)
    for (size_t j = i + 1; j < n; ++j) {
      Rat v = rng.chance(10) ? Rat(0) : Rat(static_cast<long>(1 + rng.pick(den)), den);
      d[i * n + j] = v;
      d[j * n + i] = v;
    }
  for (size_t k = 0; k < n; ++k)
    for (size_t i = 0; i < n; ++i)
      for (size_t j = 0; j < n; ++j) {
        Rat via = d[i * n + k] + d[k * n + j];
        if (via < d[i * n + j]) d[i * n + j] = via;
      }
  return d;
}

inline FiniteStructure random_structure(Rng& rng, std::shared_ptr<const Signature> sig,
                                        const GenOptions& opt = {}) {
  FiniteStructure M;
  M.sig = std::move(sig);
  for (const auto& s : M.sig->sorts) {
    size_t n = 1 + rng.pick(opt.max_elems);
    std::vector<std::string> carrier;
    for (size_t i = 0; i < n; ++i) carrier.push_back(s + "_" + std::string(1, char('a' + i)));
    M.carriers[s] = std::move(carrier);
  }
  for (const auto& r : M.sig->relations) {
    if (r.metric_for) {
      M.relations[r.name] =
          random_metric_table(rng, M.carrier(*r.metric_for).size(), opt.denominator);
    } else {
      TupleSpace sp = M.space(r.domain);
      std::vector<Rat> table(sp.size());
      for (auto& v : table) v = rng.unit_rat(opt.denominator);
      M.relations[r.name] = std::move(table);
    }
  }
  for (const auto& f : M.sig->functions) {
    TupleSpace sp = M.space(f.domain);
    size_t cod = M.carrier(f.codomain).size();
    std::vector<uint32_t> table(sp.size());
    for (auto& v : table) v = static_cast<uint32_t>(rng.pick(cod));
    M.functions[f.name] = std::move(table);
  }
  M.validate();
  return M;
}

// Random basis term of the requested sort, built from context variables,
// constants and function applications.
inline std::optional<Term> random_term(Rng& rng, const Signature& sig,
                                       std::span<const Variable> context,
                                       const std::string& sort, size_t depth) {
  std::vector<Term> options;
  for (const auto& v : context)
    if (v.sort == sort) options.push_back(Term::make_var(v));
  for (const auto& f : sig.functions)
    if (f.is_constant() && f.codomain == sort) options.push_back(Term::make_app(f.name));
  if (depth > 0) {
    for (const auto& f : sig.functions) {
      if (f.is_constant() || f.codomain != sort) continue;
      std::vector<Term> args;
      bool ok = true;
      for (const auto& d : f.domain) {
        auto a = random_term(rng, sig, context, d, depth - 1);
        if (!a) {
          ok = false;
          break;
        }
        args.push_back(std::move(*a));
      }
      if (ok && rng.chance(60)) options.push_back(Term::make_app(f.name, std::move(args)));
    }
  }
  if (options.empty()) return std::nullopt;
  return options[rng.pick(options.size())];
}

// Random basis formula with free variables among `context`.
inline Formula random_formula(Rng& rng, const Signature& sig, std::span<const Variable> context,
                              size_t depth, unsigned den = 8, size_t* quant_counter = nullptr) {
  size_t local_counter = 0;
  if (!quant_counter) quant_counter = &local_counter;

  auto atom = [&]() -> Formula {
    std::vector<const RelationSymbol*> rels;
    for (const auto& r : sig.relations) rels.push_back(&r);
    for (size_t tries = 0; tries < 2 * rels.size() + 1; ++tries) {
      const RelationSymbol* r = rels[rng.pick(rels.size())];
      std::vector<Term> args;
      bool ok = true;
      for (const auto& d : r->domain) {
        auto t = random_term(rng, sig, context, d, 1);
        if (!t) {
          ok = false;
          break;
        }
        args.push_back(std::move(*t));
      }
      if (ok) return f_atom(r->name, std::move(args));
    }
    return f_const(rng.unit_rat(den));
  };

  if (depth == 0) return rng.chance(25) ? f_const(rng.unit_rat(den)) : atom();

  switch (rng.pick(10)) {
    case 0:
      return f_const(rng.unit_rat(den));
    case 1:
    case 2:
      return atom();
    case 3:
      return f_neg(random_formula(rng, sig, context, depth - 1, den, quant_counter));
    case 4:
      return f_half(random_formula(rng, sig, context, depth - 1, den, quant_counter));
    case 5:
    case 6: {
      Formula a = random_formula(rng, sig, context, depth - 1, den, quant_counter);
      Formula b = random_formula(rng, sig, context, depth - 1, den, quant_counter);
      return rng.chance(50) ? f_sub(std::move(a), std::move(b))
                            : f_add(std::move(a), std::move(b));
    }
    case 7:
    case 8: {
      Formula a = random_formula(rng, sig, context, depth - 1, den, quant_counter);
      Formula b = random_formula(rng, sig, context, depth - 1, den, quant_counter);
      return rng.chance(50) ? f_min(std::move(a), std::move(b))
                            : f_max(std::move(a), std::move(b));
    }
    default: {
      Variable q{"q" + std::to_string(++*quant_counter), sig.sorts[rng.pick(sig.sorts.size())]};
      std::vector<Variable> inner(context.begin(), context.end());
      inner.push_back(q);
      Formula body = random_formula(rng, sig, inner, depth - 1, den, quant_counter);
      return rng.chance(50) ? f_sup({q}, std::move(body)) : f_inf({q}, std::move(body));
    }
  }
}

inline Formula random_sentence(Rng& rng, const Signature& sig, size_t depth, unsigned den = 8) {
  Formula f = random_formula(rng, sig, {}, depth, den);
  auto fv = free_variables(f);
  if (fv.empty()) return f;
  return f_sup(fv, std::move(f));
}

}  // namespace cmtk
