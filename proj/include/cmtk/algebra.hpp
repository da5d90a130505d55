#pragma once

#include "cmtk/parse.hpp"
#include "cmtk/report.hpp"
#include "cmtk/semantics.hpp"

#include <algorithm>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace cmtk {

// Interprets a formula as a table over all assignments of a context.
inline std::vector<Rat> eval_table(const FiniteStructure& M, const Formula& f,
                                   std::span<const Variable> context) {
  for (const auto& fv : free_variables(f))
    if (std::find(context.begin(), context.end(), fv) == context.end())
      throw CmtkError("free variable " + fv.name + " outside the algebra context");
  TupleSpace sp;
  for (const auto& v : context) sp.radices.push_back(M.carrier(v.sort).size());
  std::vector<Rat> table(sp.size());
  Env env;
  std::vector<size_t> t(context.size(), 0);
  size_t flat = 0;
  do {
    env.bound.clear();
    for (size_t i = 0; i < context.size(); ++i) env.push(context[i], t[i]);
    Value v = eval_formula(M, f, env);
    if (!v.is_exact) throw CmtkError("algebra elements must be exact (basis-only) tables");
    table[flat++] = v.exact;
  } while (sp.next(t));
  return table;
}

// A finitely generated algebra of interpreted formulas over one context,
// represented by its element tables. Generated on demand, not the full
// function space.
struct FormulaAlgebra {
  const FiniteStructure* base = nullptr;
  std::vector<Variable> context;
  std::vector<std::vector<Rat>> elements;
  std::vector<std::string> labels;

  TupleSpace space() const {
    std::vector<std::string> sorts;
    for (const auto& v : context) sorts.push_back(v.sort);
    return base->space(sorts);
  }
  size_t size() const { return elements.size(); }

  std::optional<size_t> index_of(const std::vector<Rat>& table) const {
    for (size_t i = 0; i < elements.size(); ++i)
      if (elements[i] == table) return i;
    return std::nullopt;
  }

  size_t add(std::vector<Rat> table, std::string label) {
    if (auto i = index_of(table)) return *i;
    elements.push_back(std::move(table));
    labels.push_back(std::move(label));
    return elements.size() - 1;
  }
};

// Pointwise lattice order: a <= b means a = min(a, b).
inline bool table_leq(std::span<const Rat> a, std::span<const Rat> b) {
  for (size_t i = 0; i < a.size(); ++i)
    if (a[i] > b[i]) return false;
  return true;
}

inline FormulaAlgebra build_algebra(const FiniteStructure& M, std::vector<Variable> context,
                                    std::span<const Formula> seeds) {
  FormulaAlgebra A;
  A.base = &M;
  A.context = std::move(context);
  size_t n = A.space().size();
  A.add(std::vector<Rat>(n, Rat(0)), "0");
  A.add(std::vector<Rat>(n, Rat(1)), "1");
  for (const auto& s : seeds) A.add(eval_table(M, s, A.context), print_formula(s));
  return A;
}

// Closes under the basis connectives, breadth-first, up to a size cap.
inline void close_under_basis(FormulaAlgebra& A, size_t max_elements) {
  auto add = [&](std::vector<Rat> table, std::string label) {
    if (A.size() < max_elements) A.add(std::move(table), std::move(label));
  };
  size_t round_start = 0;
  while (A.size() < max_elements) {
    size_t round_end = A.size();
    if (round_start == round_end) break;  // nothing new last round
    for (size_t i = round_start; i < round_end && A.size() < max_elements; ++i) {
      std::vector<Rat> neg(A.elements[i]), half(A.elements[i]);
      for (auto& v : neg) v = negation(v);
      for (auto& v : half) v = halve(v);
      add(std::move(neg), "~(" + A.labels[i] + ")");
      add(std::move(half), "(" + A.labels[i] + ")/2");
    }
    for (size_t i = 0; i < round_end && A.size() < max_elements; ++i)
      for (size_t j = 0; j < round_end && A.size() < max_elements; ++j) {
        if (i < round_start && j < round_start) continue;  // already combined
        std::vector<Rat> sub(A.elements[i].size()), sum(sub.size()), mn(sub.size()),
            mx(sub.size());
        for (size_t k = 0; k < sub.size(); ++k) {
          sub[k] = trunc_sub(A.elements[i][k], A.elements[j][k]);
          sum[k] = trunc_add(A.elements[i][k], A.elements[j][k]);
          mn[k] = rat_min(A.elements[i][k], A.elements[j][k]);
          mx[k] = rat_max(A.elements[i][k], A.elements[j][k]);
        }
        add(std::move(sub), "(" + A.labels[i] + ") -. (" + A.labels[j] + ")");
        add(std::move(sum), "(" + A.labels[i] + ") + (" + A.labels[j] + ")");
        add(std::move(mn), "min(" + A.labels[i] + ", " + A.labels[j] + ")");
        add(std::move(mx), "max(" + A.labels[i] + ", " + A.labels[j] + ")");
      }
    round_start = round_end;
  }
}

// Standardness: no element other than 0 lies below every positive constant.
// Over finite rational tables this always holds; the scan exists to validate
// imported algebras through the same interface.
inline bool is_standard(const FormulaAlgebra& A) {
  if (!A.context.empty())
    throw CmtkError("standardness applies to algebras over the empty context");
  for (const auto& e : A.elements) {
    Rat top(0);
    for (const auto& v : e) top = rat_max(top, v);
    if (top == 0) continue;  // this element is 0
    Rat witness = top / 2;   // a positive constant the element does not sit below
    bool below_all = top <= witness;
    if (below_all) return false;
  }
  return true;
}

// Imported symbolic algebras: a finite order presentation in which an
// element may be declared infinitesimal (formally below every positive
// constant). Standard iff every such element is identified with 0.
struct SymbolicAlgebra {
  std::vector<std::string> elements;
  std::map<std::string, Rat> constants;                     // named rational constants
  std::vector<std::pair<std::string, std::string>> leq;     // declared order pairs
  std::set<std::string> infinitesimals;
};

inline bool is_standard(const SymbolicAlgebra& A) {
  auto equal_to_zero = [&](const std::string& e) {
    auto c = A.constants.find(e);
    if (c != A.constants.end() && c->second == 0) return true;
    for (const auto& [lo, hi] : A.leq) {
      if (lo != e) continue;
      auto z = A.constants.find(hi);
      if (z != A.constants.end() && z->second == 0) return true;  // e <= 0 forces e = 0
    }
    return false;
  };
  for (const auto& e : A.infinitesimals)
    if (!equal_to_zero(e)) return false;
  return true;
}

// ---------------------------------------------------------------------------
// Projections and the quantifier adjunction

struct Projection {
  std::vector<Variable> source;
  std::vector<Variable> target;
  std::vector<size_t> positions;  // index of each target variable inside source

  static Projection onto(std::vector<Variable> source, std::vector<Variable> target) {
    Projection p;
    p.source = std::move(source);
    p.target = std::move(target);
    for (const auto& t : p.target) {
      auto it = std::find(p.source.begin(), p.source.end(), t);
      if (it == p.source.end())
        throw CmtkError("projection target variable " + t.name + " not in the source context");
      p.positions.push_back(static_cast<size_t>(it - p.source.begin()));
    }
    return p;
  }
};

namespace detail {
inline TupleSpace ctx_space(const FiniteStructure& M, std::span<const Variable> ctx) {
  std::vector<std::string> sorts;
  for (const auto& v : ctx) sorts.push_back(v.sort);
  return M.space(sorts);
}
}  // namespace detail

// L(pi): precomposition with the projection, an algebra embedding.
inline std::vector<Rat> embed_table(const FiniteStructure& M, const Projection& pi,
                                    std::span<const Rat> target_table) {
  TupleSpace src = detail::ctx_space(M, pi.source);
  TupleSpace dst = detail::ctx_space(M, pi.target);
  std::vector<Rat> out(src.size());
  std::vector<size_t> proj(pi.target.size());
  for (size_t flat = 0; flat < src.size(); ++flat) {
    auto t = src.decode(flat);
    for (size_t i = 0; i < pi.positions.size(); ++i) proj[i] = t[pi.positions[i]];
    out[flat] = target_table[dst.encode(proj)];
  }
  return out;
}

// forall_pi(g)(y) = sup{ g(a) : pi(a) = y }, fiberwise.
inline std::vector<Rat> forall_table(const FiniteStructure& M, const Projection& pi,
                                     std::span<const Rat> g) {
  TupleSpace src = detail::ctx_space(M, pi.source);
  TupleSpace dst = detail::ctx_space(M, pi.target);
  std::vector<Rat> out(dst.size(), Rat(0));
  std::vector<size_t> proj(pi.target.size());
  for (size_t flat = 0; flat < src.size(); ++flat) {
    auto t = src.decode(flat);
    for (size_t i = 0; i < pi.positions.size(); ++i) proj[i] = t[pi.positions[i]];
    size_t d = dst.encode(proj);
    out[d] = rat_max(out[d], g[flat]);
  }
  return out;
}

inline std::vector<Rat> exists_table(const FiniteStructure& M, const Projection& pi,
                                     std::span<const Rat> g) {
  TupleSpace src = detail::ctx_space(M, pi.source);
  TupleSpace dst = detail::ctx_space(M, pi.target);
  std::vector<Rat> out(dst.size(), Rat(1));
  std::vector<size_t> proj(pi.target.size());
  for (size_t flat = 0; flat < src.size(); ++flat) {
    auto t = src.decode(flat);
    for (size_t i = 0; i < pi.positions.size(); ++i) proj[i] = t[pi.positions[i]];
    size_t d = dst.encode(proj);
    out[d] = rat_min(out[d], g[flat]);
  }
  return out;
}

// The dual must agree with 1 -. forall(1 -. g) exactly.
inline bool exists_duality_exact(const FiniteStructure& M, const Projection& pi,
                                 std::span<const Rat> g) {
  std::vector<Rat> negated(g.begin(), g.end());
  for (auto& v : negated) v = negation(v);
  std::vector<Rat> dual = forall_table(M, pi, negated);
  for (auto& v : dual) v = negation(v);
  return dual == exists_table(M, pi, g);
}

struct AdjunctionResult {
  bool forall_side = false;  // forall_pi(g) <= h  iff  g <= L(pi)(h)
  bool exists_side = false;  // h <= exists_pi(g)  iff  L(pi)(h) <= g
  bool duality = false;      // exists_pi(g) == 1 -. forall_pi(1 -. g)
  bool ok() const { return forall_side && exists_side && duality; }
};

inline AdjunctionResult check_adjunction(const FiniteStructure& M, const Projection& pi,
                                         std::span<const Rat> g, std::span<const Rat> h) {
  AdjunctionResult r;
  std::vector<Rat> fg = forall_table(M, pi, g);
  std::vector<Rat> eg = exists_table(M, pi, g);
  std::vector<Rat> eh = embed_table(M, pi, h);
  r.forall_side = table_leq(fg, h) == table_leq(g, eh);
  r.exists_side = table_leq(h, eg) == table_leq(eh, g);
  r.duality = exists_duality_exact(M, pi, g);
  return r;
}

// Injectivity plus commutation with every basis connective, over the
// elements of a generated target algebra.
inline Report check_embedding(const FiniteStructure& M, const Projection& pi,
                              const FormulaAlgebra& target) {
  Report rep;
  rep.command = "check";
  rep.what = "embedding";
  std::vector<std::vector<Rat>> images;
  for (const auto& e : target.elements) images.push_back(embed_table(M, pi, e));

  std::vector<std::string> inj;
  for (size_t i = 0; i < images.size(); ++i)
    for (size_t j = i + 1; j < images.size(); ++j)
      if (images[i] == images[j] && target.elements[i] != target.elements[j])
        inj.push_back("elements " + std::to_string(i) + " and " + std::to_string(j) +
                      " collapse under the embedding");
  rep.add_check("injective", inj.empty(), "", inj);

  std::vector<std::string> hom;
  auto expect = [&](const std::vector<Rat>& got, const std::vector<Rat>& want,
                    const std::string& what) {
    if (got != want) hom.push_back("embedding does not commute with " + what);
  };
  for (size_t i = 0; i < target.size(); ++i) {
    std::vector<Rat> neg(target.elements[i]);
    for (auto& v : neg) v = negation(v);
    std::vector<Rat> img_neg(images[i]);
    for (auto& v : img_neg) v = negation(v);
    expect(embed_table(M, pi, neg), img_neg, "negation");
    std::vector<Rat> half(target.elements[i]);
    for (auto& v : half) v = halve(v);
    std::vector<Rat> img_half(images[i]);
    for (auto& v : img_half) v = halve(v);
    expect(embed_table(M, pi, half), img_half, "halving");
  }
  for (size_t i = 0; i < target.size(); ++i)
    for (size_t j = 0; j < target.size(); ++j) {
      std::vector<Rat> op(target.elements[i].size()), img_op(images[i].size());
      auto both = [&](auto fn, const char* what) {
        for (size_t k = 0; k < op.size(); ++k) op[k] = fn(target.elements[i][k], target.elements[j][k]);
        for (size_t k = 0; k < img_op.size(); ++k) img_op[k] = fn(images[i][k], images[j][k]);
        expect(embed_table(M, pi, op), img_op, what);
      };
      both([](const Rat& a, const Rat& b) { return trunc_sub(a, b); }, "truncated subtraction");
      both([](const Rat& a, const Rat& b) { return trunc_add(a, b); }, "truncated addition");
      both([](const Rat& a, const Rat& b) { return rat_min(a, b); }, "min");
      both([](const Rat& a, const Rat& b) { return rat_max(a, b); }, "max");
    }
  rep.add_check("homomorphism", hom.empty(), "", hom);
  return rep;
}

// ---------------------------------------------------------------------------
// The A7 quantifier axiom, evaluated exactly.

inline Formula a7_instance(const Formula& psi, const Formula& phi,
                           std::vector<Variable> xs) {
  Formula sup_psi = f_sup(xs, psi);
  Formula sup_phi = f_sup(xs, phi);
  Formula sup_diff = f_sup(std::move(xs), f_sub(psi, phi));
  return f_sub(f_sub(std::move(sup_psi), std::move(sup_phi)), std::move(sup_diff));
}

struct A7Result {
  Rat max_value;
  Formula instance;
};

// Evaluates (sup_x psi -. sup_x phi) -. sup_x (psi -. phi) at every
// assignment of the remaining free variables; the soundness of A7 demands
// an exact 0.
inline A7Result check_A7(const FiniteStructure& M, const Formula& psi, const Formula& phi,
                         std::vector<Variable> xs) {
  A7Result r{Rat(0), a7_instance(psi, phi, std::move(xs))};
  auto ys = free_variables(r.instance);
  std::vector<Rat> table = eval_table(M, r.instance, ys);
  for (const auto& v : table) r.max_value = rat_max(r.max_value, v);
  return r;
}

}  // namespace cmtk
