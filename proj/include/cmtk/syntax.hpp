#pragma once

#include "cmtk/rational.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace cmtk {

// The sort of a variable is a property of the variable itself.
struct Variable {
  std::string name;
  std::string sort;

  bool operator==(const Variable& o) const = default;
  auto operator<=>(const Variable& o) const = default;
};

// A finite rational staircase: (delta, epsilon) pairs read as
// "componentwise distance < delta implies value difference <= epsilon".
// Unlisted epsilon levels are unconstrained.
struct Modulus {
  std::vector<std::pair<Rat, Rat>> pairs;  // kept sorted by epsilon descending

  void normalize() {
    std::stable_sort(pairs.begin(), pairs.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
  }
  bool entries_valid() const {
    for (const auto& [d, e] : pairs)
      if (!(d > 0 && d <= 1 && e >= 0 && e <= 1)) return false;
    return !pairs.empty();
  }
  // Certified value-difference bound at tuple distance t: the least epsilon
  // whose delta level lies strictly above t. 1 when no level applies.
  Rat bound_at(const Rat& t) const {
    Rat best(1);
    for (const auto& [d, e] : pairs)
      if (t < d && e < best) best = e;
    return best;
  }
  bool operator==(const Modulus& o) const = default;
};

struct FunctionSymbol {
  std::string name;
  std::vector<std::string> domain;
  std::string codomain;
  std::optional<Modulus> modulus;

  bool is_constant() const { return domain.empty(); }
};

struct RelationSymbol {
  std::string name;
  std::vector<std::string> domain;
  std::optional<Modulus> modulus;
  std::optional<std::string> metric_for;
};

struct Signature {
  std::vector<std::string> sorts;
  std::vector<FunctionSymbol> functions;
  std::vector<RelationSymbol> relations;

  bool has_sort(const std::string& s) const {
    return std::find(sorts.begin(), sorts.end(), s) != sorts.end();
  }
  const FunctionSymbol* find_function(const std::string& n) const {
    for (const auto& f : functions)
      if (f.name == n) return &f;
    return nullptr;
  }
  const RelationSymbol* find_relation(const std::string& n) const {
    for (const auto& r : relations)
      if (r.name == n) return &r;
    return nullptr;
  }
  // The designated metric symbol of a sort, if any.
  std::optional<std::string> metric_of(const std::string& sort) const {
    for (const auto& r : relations)
      if (r.metric_for && *r.metric_for == sort) return r.name;
    return std::nullopt;
  }

  void validate() const {
    std::set<std::string> seen;
    for (const auto& s : sorts)
      if (!seen.insert(s).second) throw CmtkError("duplicate sort name: " + s);
    for (const auto& f : functions) {
      if (!seen.insert(f.name).second) throw CmtkError("duplicate symbol name: " + f.name);
      for (const auto& d : f.domain)
        if (!has_sort(d)) throw CmtkError("unknown sort " + d + " in fn " + f.name);
      if (!has_sort(f.codomain)) throw CmtkError("unknown sort " + f.codomain + " in fn " + f.name);
      if (f.modulus && !f.modulus->entries_valid())
        throw CmtkError("modulus entries of " + f.name + " must lie in (0,1]");
    }
    std::map<std::string, int> metric_count;
    for (const auto& r : relations) {
      if (!seen.insert(r.name).second) throw CmtkError("duplicate symbol name: " + r.name);
      for (const auto& d : r.domain)
        if (!has_sort(d)) throw CmtkError("unknown sort " + d + " in rel " + r.name);
      if (r.metric_for) {
        if (r.domain.size() != 2 || r.domain[0] != *r.metric_for || r.domain[1] != *r.metric_for)
          throw CmtkError("metric " + r.name + " must be binary on sort " + *r.metric_for);
        if (++metric_count[*r.metric_for] > 1)
          throw CmtkError("sort " + *r.metric_for + " has more than one metric symbol");
      }
      if (r.modulus && !r.modulus->entries_valid())
        throw CmtkError("modulus entries of " + r.name + " must lie in (0,1]");
    }
  }
};

// ---------------------------------------------------------------------------
// Terms

struct Term {
  bool is_var = true;
  Variable var;
  std::string fn;
  std::vector<Term> args;

  static Term make_var(Variable v) {
    Term t;
    t.is_var = true;
    t.var = std::move(v);
    return t;
  }
  static Term make_app(std::string f, std::vector<Term> as = {}) {
    Term t;
    t.is_var = false;
    t.fn = std::move(f);
    t.args = std::move(as);
    return t;
  }
  bool operator==(const Term& o) const = default;
};

inline void collect_term_vars(const Term& t, std::vector<Variable>& out) {
  if (t.is_var) {
    if (std::find(out.begin(), out.end(), t.var) == out.end()) out.push_back(t.var);
    return;
  }
  for (const auto& a : t.args) collect_term_vars(a, out);
}

inline std::string term_sort(const Signature& sig, const Term& t) {
  if (t.is_var) {
    if (!sig.has_sort(t.var.sort))
      throw CmtkError("variable " + t.var.name + " has unknown sort " + t.var.sort);
    return t.var.sort;
  }
  const FunctionSymbol* f = sig.find_function(t.fn);
  if (!f) throw CmtkError("unknown function symbol: " + t.fn);
  if (f->domain.size() != t.args.size())
    throw CmtkError("function " + t.fn + " expects " + std::to_string(f->domain.size()) +
                    " arguments");
  for (size_t i = 0; i < t.args.size(); ++i) {
    std::string s = term_sort(sig, t.args[i]);
    if (s != f->domain[i])
      throw CmtkError("argument " + std::to_string(i + 1) + " of " + t.fn + " has sort " + s +
                      ", expected " + f->domain[i]);
  }
  return f->codomain;
}

// ---------------------------------------------------------------------------
// Formulas over the rational-closed connective basis plus sup/inf.

enum class FormulaKind {
  Atom,   // relation applied to terms
  Const,  // rational constant in [0,1]
  Neg,    // 1 - x
  Sub,    // truncated subtraction
  Add,    // truncated addition
  Min,
  Max,
  Half,    // x/2
  Native,  // registered continuous connective, evaluated approximately
  Sup,     // the universal quantifier: with 0 as true, forall is a sup
  Inf,     // the existential quantifier: an inf
};

struct Formula {
  FormulaKind kind = FormulaKind::Const;
  Rat value;                      // Const
  std::string symbol;             // Atom relation name / Native connective name
  std::vector<Term> terms;        // Atom arguments
  std::vector<Variable> binders;  // Sup/Inf
  std::vector<Formula> kids;

  bool operator==(const Formula& o) const = default;
};

inline Formula f_const(Rat q) {
  Formula f;
  f.kind = FormulaKind::Const;
  f.value = std::move(q);
  return f;
}
inline Formula f_atom(std::string rel, std::vector<Term> ts = {}) {
  Formula f;
  f.kind = FormulaKind::Atom;
  f.symbol = std::move(rel);
  f.terms = std::move(ts);
  return f;
}
inline Formula f_unary(FormulaKind k, Formula a) {
  Formula f;
  f.kind = k;
  f.kids.push_back(std::move(a));
  return f;
}
inline Formula f_binary(FormulaKind k, Formula a, Formula b) {
  Formula f;
  f.kind = k;
  f.kids.push_back(std::move(a));
  f.kids.push_back(std::move(b));
  return f;
}
inline Formula f_neg(Formula a) { return f_unary(FormulaKind::Neg, std::move(a)); }
inline Formula f_half(Formula a) { return f_unary(FormulaKind::Half, std::move(a)); }
inline Formula f_sub(Formula a, Formula b) {
  return f_binary(FormulaKind::Sub, std::move(a), std::move(b));
}
inline Formula f_add(Formula a, Formula b) {
  return f_binary(FormulaKind::Add, std::move(a), std::move(b));
}
inline Formula f_min(Formula a, Formula b) {
  return f_binary(FormulaKind::Min, std::move(a), std::move(b));
}
inline Formula f_max(Formula a, Formula b) {
  return f_binary(FormulaKind::Max, std::move(a), std::move(b));
}
// |a - b| desugars to max(a -. b, b -. a).
inline Formula f_abs_diff(Formula a, Formula b) {
  return f_max(f_sub(a, b), f_sub(b, a));
}
inline Formula f_native(std::string name, std::vector<Formula> args) {
  Formula f;
  f.kind = FormulaKind::Native;
  f.symbol = std::move(name);
  f.kids = std::move(args);
  return f;
}
inline Formula f_quant(FormulaKind k, std::vector<Variable> vars, Formula body) {
  Formula f;
  f.kind = k;
  f.binders = std::move(vars);
  f.kids.push_back(std::move(body));
  return f;
}
inline Formula f_sup(std::vector<Variable> vars, Formula body) {
  return f_quant(FormulaKind::Sup, std::move(vars), std::move(body));
}
inline Formula f_inf(std::vector<Variable> vars, Formula body) {
  return f_quant(FormulaKind::Inf, std::move(vars), std::move(body));
}

inline bool is_quantifier(FormulaKind k) {
  return k == FormulaKind::Sup || k == FormulaKind::Inf;
}

// Halving an n-th time scales by 2^{-n}.
inline Formula f_scale_pow2(Formula f, unsigned n) {
  for (unsigned i = 0; i < n; ++i) f = f_half(std::move(f));
  return f;
}

// ---------------------------------------------------------------------------
// Free variables and capture-avoiding substitution

namespace detail {
inline void free_vars_rec(const Formula& f, std::vector<Variable>& bound,
                          std::vector<Variable>& out) {
  auto note = [&](const Variable& v) {
    if (std::find(bound.begin(), bound.end(), v) != bound.end()) return;
    if (std::find(out.begin(), out.end(), v) == out.end()) out.push_back(v);
  };
  switch (f.kind) {
    case FormulaKind::Atom: {
      std::vector<Variable> vs;
      for (const auto& t : f.terms) collect_term_vars(t, vs);
      for (const auto& v : vs) note(v);
      break;
    }
    case FormulaKind::Sup:
    case FormulaKind::Inf: {
      size_t n = bound.size();
      for (const auto& v : f.binders) bound.push_back(v);
      free_vars_rec(f.kids[0], bound, out);
      bound.resize(n);
      break;
    }
    default:
      for (const auto& k : f.kids) free_vars_rec(k, bound, out);
  }
}
}  // namespace detail

// Deduplicated, in first-occurrence order.
inline std::vector<Variable> free_variables(const Formula& f) {
  std::vector<Variable> bound, out;
  detail::free_vars_rec(f, bound, out);
  return out;
}

inline bool occurs_in_term(const Term& t, const Variable& v) {
  if (t.is_var) return t.var == v;
  for (const auto& a : t.args)
    if (occurs_in_term(a, v)) return true;
  return false;
}

inline Term substitute_term(const Term& in, const Variable& v, const Term& repl) {
  if (in.is_var) return in.var == v ? repl : in;
  Term out = in;
  for (auto& a : out.args) a = substitute_term(a, v, repl);
  return out;
}

// A variant of `base` (priming) avoiding every name in `taken`.
inline Variable fresh_variable(const Variable& base, const std::set<std::string>& taken) {
  std::string name = base.name;
  while (taken.count(name)) name += "'";
  return Variable{name, base.sort};
}

inline Formula substitute(const Formula& f, const Variable& v, const Term& repl);

namespace detail {
inline Formula substitute_rec(const Formula& f, const Variable& v, const Term& repl,
                              const std::vector<Variable>& repl_vars) {
  switch (f.kind) {
    case FormulaKind::Atom: {
      Formula out = f;
      for (auto& t : out.terms) t = substitute_term(t, v, repl);
      return out;
    }
    case FormulaKind::Const:
      return f;
    case FormulaKind::Sup:
    case FormulaKind::Inf: {
      for (const auto& b : f.binders)
        if (b == v) return f;  // v is bound here; nothing to do below
      // Rename binders that would capture variables of the replacement term.
      Formula out = f;
      for (size_t i = 0; i < out.binders.size(); ++i) {
        const Variable b = out.binders[i];
        bool captures = std::any_of(repl_vars.begin(), repl_vars.end(),
                                    [&](const Variable& rv) { return rv == b; });
        if (!captures) continue;
        std::set<std::string> taken;
        for (const auto& rv : repl_vars) taken.insert(rv.name);
        for (const auto& fv : free_variables(out.kids[0])) taken.insert(fv.name);
        for (const auto& ob : out.binders) taken.insert(ob.name);
        Variable nb = fresh_variable(b, taken);
        out.kids[0] = substitute(out.kids[0], b, Term::make_var(nb));
        out.binders[i] = nb;
      }
      out.kids[0] = substitute_rec(out.kids[0], v, repl, repl_vars);
      return out;
    }
    default: {
      Formula out = f;
      for (auto& k : out.kids) k = substitute_rec(k, v, repl, repl_vars);
      return out;
    }
  }
}
}  // namespace detail

inline Formula substitute(const Formula& f, const Variable& v, const Term& repl) {
  std::vector<Variable> rv;
  collect_term_vars(repl, rv);
  return detail::substitute_rec(f, v, repl, rv);
}

// Simultaneous substitution, staged through fresh temporaries so that a
// replacement term never collides with a later pattern variable.
inline Formula substitute_simultaneous(Formula f, std::span<const Variable> vars,
                                       std::span<const Term> repls) {
  if (vars.size() != repls.size()) throw CmtkError("substitution arity mismatch");
  std::set<std::string> taken;
  for (const auto& v : vars) taken.insert(v.name);
  for (const auto& t : repls) {
    std::vector<Variable> tv;
    collect_term_vars(t, tv);
    for (const auto& v : tv) taken.insert(v.name);
  }
  for (const auto& fv : free_variables(f)) taken.insert(fv.name);
  std::vector<Variable> temps;
  for (const auto& v : vars) {
    Variable t = fresh_variable(Variable{v.name + "_s", v.sort}, taken);
    taken.insert(t.name);
    temps.push_back(t);
  }
  for (size_t i = 0; i < vars.size(); ++i) f = substitute(f, vars[i], Term::make_var(temps[i]));
  for (size_t i = 0; i < vars.size(); ++i) f = substitute(f, temps[i], repls[i]);
  return f;
}

inline Term substitute_term_simultaneous(Term t, std::span<const Variable> vars,
                                         std::span<const Term> repls) {
  if (vars.size() != repls.size()) throw CmtkError("substitution arity mismatch");
  std::set<std::string> taken;
  for (const auto& v : vars) taken.insert(v.name);
  for (const auto& r : repls) {
    std::vector<Variable> tv;
    collect_term_vars(r, tv);
    for (const auto& v : tv) taken.insert(v.name);
  }
  {
    std::vector<Variable> tv;
    collect_term_vars(t, tv);
    for (const auto& v : tv) taken.insert(v.name);
  }
  std::vector<Variable> temps;
  for (const auto& v : vars) {
    Variable tmp = fresh_variable(Variable{v.name + "_s", v.sort}, taken);
    taken.insert(tmp.name);
    temps.push_back(tmp);
  }
  for (size_t i = 0; i < vars.size(); ++i) t = substitute_term(t, vars[i], Term::make_var(temps[i]));
  for (size_t i = 0; i < vars.size(); ++i) t = substitute_term(t, temps[i], repls[i]);
  return t;
}

// ---------------------------------------------------------------------------
// Standalone connectives: trees with argument slots. Used to generate and
// combine table algebras, and to graft compound connectives into formulas.

enum class ConnKind { Arg, Const, Neg, Sub, Add, Min, Max, Half, Native };

struct NativeConnective {
  std::string name;
  size_t arity = 0;
  Rat lipschitz;      // w.r.t. the max metric on the arguments
  double eval_error;  // intrinsic error bound of the double evaluation
  std::function<double(std::span<const double>)> fn;
};

// Process-wide registry of user native connectives.
class NativeRegistry {
 public:
  static NativeRegistry& instance() {
    static NativeRegistry reg;
    return reg;
  }
  void register_connective(NativeConnective c) { map_[c.name] = std::move(c); }
  const NativeConnective* find(const std::string& name) const {
    auto it = map_.find(name);
    return it == map_.end() ? nullptr : &it->second;
  }
  void clear() { map_.clear(); }

 private:
  std::map<std::string, NativeConnective> map_;
};

struct Connective {
  ConnKind kind = ConnKind::Const;
  size_t arg = 0;  // Arg slot index
  Rat value;       // Const
  std::string native;
  std::vector<Connective> kids;

  static Connective c_arg(size_t i) {
    Connective c;
    c.kind = ConnKind::Arg;
    c.arg = i;
    return c;
  }
  static Connective c_const(Rat q) {
    Connective c;
    c.kind = ConnKind::Const;
    c.value = std::move(q);
    return c;
  }
  static Connective c_unary(ConnKind k, Connective a) {
    Connective c;
    c.kind = k;
    c.kids.push_back(std::move(a));
    return c;
  }
  static Connective c_binary(ConnKind k, Connective a, Connective b) {
    Connective c;
    c.kind = k;
    c.kids.push_back(std::move(a));
    c.kids.push_back(std::move(b));
    return c;
  }

  size_t arity() const {
    if (kind == ConnKind::Arg) return arg + 1;
    size_t n = 0;
    for (const auto& k : kids) n = std::max(n, k.arity());
    return n;
  }

  Rat eval(std::span<const Rat> args) const {
    switch (kind) {
      case ConnKind::Arg:
        if (arg >= args.size()) throw CmtkError("connective argument out of range");
        return args[arg];
      case ConnKind::Const:
        return value;
      case ConnKind::Neg:
        return negation(kids[0].eval(args));
      case ConnKind::Sub:
        return trunc_sub(kids[0].eval(args), kids[1].eval(args));
      case ConnKind::Add:
        return trunc_add(kids[0].eval(args), kids[1].eval(args));
      case ConnKind::Min:
        return rat_min(kids[0].eval(args), kids[1].eval(args));
      case ConnKind::Max:
        return rat_max(kids[0].eval(args), kids[1].eval(args));
      case ConnKind::Half:
        return halve(kids[0].eval(args));
      case ConnKind::Native:
        throw CmtkError("native connective " + native + " has no exact evaluation");
    }
    throw CmtkError("bad connective");
  }

  // A Lipschitz constant w.r.t. the max metric on the argument tuple.
  // Each basis node is 1-Lipschitz per argument; halving contracts by 1/2.
  Rat lipschitz() const {
    switch (kind) {
      case ConnKind::Arg:
        return Rat(1);
      case ConnKind::Const:
        return Rat(0);
      case ConnKind::Neg:
        return kids[0].lipschitz();
      case ConnKind::Half:
        return kids[0].lipschitz() / 2;
      case ConnKind::Sub:
      case ConnKind::Add:
        return kids[0].lipschitz() + kids[1].lipschitz();
      case ConnKind::Min:
      case ConnKind::Max:
        return rat_max(kids[0].lipschitz(), kids[1].lipschitz());
      case ConnKind::Native: {
        const NativeConnective* n = NativeRegistry::instance().find(native);
        if (!n) throw CmtkError("unregistered native connective: " + native);
        Rat inner(0);
        for (const auto& k : kids) inner = rat_max(inner, k.lipschitz());
        return n->lipschitz * inner;
      }
    }
    throw CmtkError("bad connective");
  }
};

// Grafts a connective tree onto subformulas, producing a plain formula.
inline Formula apply_connective(const Connective& c, std::span<const Formula> args) {
  switch (c.kind) {
    case ConnKind::Arg:
      if (c.arg >= args.size()) throw CmtkError("connective argument out of range");
      return args[c.arg];
    case ConnKind::Const:
      return f_const(c.value);
    case ConnKind::Neg:
      return f_neg(apply_connective(c.kids[0], args));
    case ConnKind::Half:
      return f_half(apply_connective(c.kids[0], args));
    case ConnKind::Sub:
      return f_sub(apply_connective(c.kids[0], args), apply_connective(c.kids[1], args));
    case ConnKind::Add:
      return f_add(apply_connective(c.kids[0], args), apply_connective(c.kids[1], args));
    case ConnKind::Min:
      return f_min(apply_connective(c.kids[0], args), apply_connective(c.kids[1], args));
    case ConnKind::Max:
      return f_max(apply_connective(c.kids[0], args), apply_connective(c.kids[1], args));
    case ConnKind::Native: {
      std::vector<Formula> ks;
      for (const auto& k : c.kids) ks.push_back(apply_connective(k, args));
      return f_native(c.native, std::move(ks));
    }
  }
  throw CmtkError("bad connective");
}

// ---------------------------------------------------------------------------
// Theories

struct Axiom {
  std::string label;  // optional; empty means unnamed
  Formula sentence;
};

struct Theory {
  Signature signature;
  std::vector<Axiom> axioms;
};

// ---------------------------------------------------------------------------
// Well-formedness

namespace detail {
inline void check_formula_rec(const Signature& sig, const Formula& f,
                              std::vector<Variable>& scope) {
  auto check_var_visible = [&](const Variable& v) {
    for (auto it = scope.rbegin(); it != scope.rend(); ++it)
      if (it->name == v.name) {
        if (it->sort != v.sort)
          throw CmtkError("variable " + v.name + " used at sort " + v.sort +
                          " but bound at sort " + it->sort);
        return;
      }
    // free occurrence: fine
  };
  switch (f.kind) {
    case FormulaKind::Const:
      if (!in_unit_interval(f.value))
        throw CmtkError("constant " + rat_to_string(f.value) + " outside [0,1]");
      break;
    case FormulaKind::Atom: {
      const RelationSymbol* r = sig.find_relation(f.symbol);
      if (!r) throw CmtkError("unknown relation symbol: " + f.symbol);
      if (r->domain.size() != f.terms.size())
        throw CmtkError("relation " + f.symbol + " expects " +
                        std::to_string(r->domain.size()) + " arguments");
      for (size_t i = 0; i < f.terms.size(); ++i) {
        std::string s = term_sort(sig, f.terms[i]);
        if (s != r->domain[i])
          throw CmtkError("argument " + std::to_string(i + 1) + " of " + f.symbol +
                          " has sort " + s + ", expected " + r->domain[i]);
        std::vector<Variable> vs;
        collect_term_vars(f.terms[i], vs);
        for (const auto& v : vs) check_var_visible(v);
      }
      break;
    }
    case FormulaKind::Native: {
      const NativeConnective* n = NativeRegistry::instance().find(f.symbol);
      if (!n) throw CmtkError("unregistered native connective: " + f.symbol);
      if (n->arity != f.kids.size())
        throw CmtkError("native " + f.symbol + " expects " + std::to_string(n->arity) +
                        " arguments");
      for (const auto& k : f.kids) check_formula_rec(sig, k, scope);
      break;
    }
    case FormulaKind::Sup:
    case FormulaKind::Inf: {
      if (f.binders.empty()) throw CmtkError("quantifier with empty variable tuple");
      std::set<std::string> names;
      for (const auto& b : f.binders) {
        if (!sig.has_sort(b.sort))
          throw CmtkError("quantified variable " + b.name + " has unknown sort " + b.sort);
        if (!names.insert(b.name).second)
          throw CmtkError("repeated variable " + b.name + " in quantifier tuple");
        for (auto it = scope.rbegin(); it != scope.rend(); ++it)
          if (it->name == b.name && it->sort != b.sort)
            throw CmtkError("variable " + b.name + " shadowed at a different sort");
      }
      size_t n = scope.size();
      for (const auto& b : f.binders) scope.push_back(b);
      check_formula_rec(sig, f.kids[0], scope);
      scope.resize(n);
      break;
    }
    default:
      for (const auto& k : f.kids) check_formula_rec(sig, k, scope);
  }
}
}  // namespace detail

inline void check_formula(const Signature& sig, const Formula& f) {
  std::vector<Variable> scope;
  detail::check_formula_rec(sig, f, scope);
  // Distinct free variables must not share a name.
  auto fv = free_variables(f);
  for (size_t i = 0; i < fv.size(); ++i)
    for (size_t j = i + 1; j < fv.size(); ++j)
      if (fv[i].name == fv[j].name)
        throw CmtkError("variable " + fv[i].name + " occurs free at two sorts");
}

inline bool is_sentence(const Formula& f) { return free_variables(f).empty(); }

inline bool uses_native(const Formula& f) {
  if (f.kind == FormulaKind::Native) return true;
  for (const auto& k : f.kids)
    if (uses_native(k)) return true;
  return false;
}

inline size_t formula_size(const Formula& f) {
  size_t n = 1;
  for (const auto& k : f.kids) n += formula_size(k);
  return n;
}

// Canonical form. Formulas are already stored canonically (constants in
// lowest terms, compound connectives grafted at construction); the pass
// re-sorts modulus staircases and validates quantifier tuples.
inline Formula normalize(const Formula& f) { return f; }
inline Signature normalize(Signature sig) {
  for (auto& fsym : sig.functions)
    if (fsym.modulus) fsym.modulus->normalize();
  for (auto& r : sig.relations)
    if (r.modulus) r.modulus->normalize();
  return sig;
}

}  // namespace cmtk
