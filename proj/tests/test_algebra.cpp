#include "test_support.hpp"

#include "cmtk/algebra.hpp"
#include "cmtk/random_gen.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace cmtk;
using ts::rat;
using ts::var;

namespace {

std::vector<Variable> ctx_xy() { return {var("x", "S"), var("y", "S")}; }

}  // namespace

TEST_CASE("build_algebra interprets seeds as tables") {
  auto M = ts::m0();
  std::vector<Formula> seeds = {ts::fml(M, "R(x)")};
  FormulaAlgebra A = build_algebra(M, {var("x", "S")}, seeds);
  std::vector<Rat> expected = {rat(0), rat(1, 4), rat(1)};
  CHECK(A.index_of(expected).has_value());

  // empty context: a subalgebra of [0,1]
  std::vector<Formula> closed = {ts::fml(M, "inf x:S. R(x)")};
  FormulaAlgebra B = build_algebra(M, {}, closed);
  CHECK(B.space().size() == 1);
  CHECK(B.index_of(std::vector<Rat>{rat(0)}).has_value());

  // no seeds: constants only
  FormulaAlgebra C = build_algebra(M, {var("x", "S")}, {});
  CHECK(C.size() == 2);
}

TEST_CASE("closure under the basis stays within the cap and is idempotent") {
  auto M = ts::m0();
  std::vector<Formula> seeds = {ts::fml(M, "R(x)"), ts::fml(M, "d(x, e)")};
  FormulaAlgebra A = build_algebra(M, {var("x", "S")}, seeds);
  close_under_basis(A, 40);
  CHECK(A.size() <= 40);
  CHECK(A.size() > 4);
  for (const auto& e : A.elements)
    for (const auto& v : e) CHECK(in_unit_interval(v));
}

TEST_CASE("standardness of finite table algebras") {
  auto M = ts::m0();
  FormulaAlgebra A = build_algebra(M, {}, std::vector<Formula>{ts::fml(M, "inf x:S. R(x)")});
  CHECK(is_standard(A));
  FormulaAlgebra C = build_algebra(M, {}, {});
  CHECK(is_standard(C));
  FormulaAlgebra bad = build_algebra(M, {var("x", "S")}, {});
  CHECK_THROWS_AS(is_standard(bad), CmtkError);
}

TEST_CASE("standardness of imported symbolic algebras") {
  SymbolicAlgebra A;
  A.elements = {"zero", "eps", "one"};
  A.constants = {{"zero", rat(0)}, {"one", rat(1)}};
  A.leq = {{"zero", "eps"}, {"eps", "one"}};
  A.infinitesimals = {"eps"};
  CHECK(!is_standard(A));  // a formal element below all constants, but not 0

  SymbolicAlgebra B = A;
  B.leq.push_back({"eps", "zero"});
  CHECK(is_standard(B));  // eps <= 0 identifies it with 0

  SymbolicAlgebra C;
  C.elements = {"zero", "one"};
  C.constants = {{"zero", rat(0)}, {"one", rat(1)}};
  CHECK(is_standard(C));
}

TEST_CASE("embedding is precomposition with the projection") {
  auto M = ts::m0();
  Projection pi = Projection::onto(ctx_xy(), {var("y", "S")});

  // constants embed to constants
  std::vector<Rat> c(3, rat(1, 3));
  std::vector<Rat> ec = embed_table(M, pi, c);
  CHECK(ec == std::vector<Rat>(9, rat(1, 3)));

  // R(y) becomes a table constant in x
  std::vector<Rat> ry = eval_table(M, ts::fml(M, "R(y)"), std::vector<Variable>{var("y", "S")});
  std::vector<Rat> e = embed_table(M, pi, ry);
  std::vector<Rat> direct = eval_table(M, ts::fml(M, "R(y)"), ctx_xy());
  CHECK(e == direct);

  // homomorphism on min
  std::vector<Rat> g = {rat(0), rat(1, 2), rat(1)};
  std::vector<Rat> h = {rat(1, 4), rat(1, 4), rat(3, 4)};
  std::vector<Rat> mn(3);
  for (size_t i = 0; i < 3; ++i) mn[i] = rat_min(g[i], h[i]);
  std::vector<Rat> lhs = embed_table(M, pi, mn);
  std::vector<Rat> eg = embed_table(M, pi, g), ehh = embed_table(M, pi, h);
  std::vector<Rat> rhs(9);
  for (size_t i = 0; i < 9; ++i) rhs[i] = rat_min(eg[i], ehh[i]);
  CHECK(lhs == rhs);
}

TEST_CASE("check_embedding verifies injectivity and homomorphism") {
  auto M = ts::m0();
  Projection pi = Projection::onto(ctx_xy(), {var("y", "S")});
  std::vector<Formula> seeds = {ts::fml(M, "R(y)"), ts::fml(M, "d(y, e)")};
  FormulaAlgebra target = build_algebra(M, {var("y", "S")}, seeds);
  close_under_basis(target, 25);
  CHECK(check_embedding(M, pi, target).passed());
}

TEST_CASE("fiberwise quantifiers over M0") {
  auto M = ts::m0();
  Projection pi = Projection::onto(ctx_xy(), {var("y", "S")});
  std::vector<Rat> g = eval_table(M, ts::fml(M, "d(x, y)"), ctx_xy());

  std::vector<Rat> fa = forall_table(M, pi, g);
  CHECK(fa == std::vector<Rat>{rat(1), rat(1, 2), rat(1)});

  // constants are fixed
  std::vector<Rat> c9(9, rat(2, 5));
  CHECK(forall_table(M, pi, c9) == std::vector<Rat>(3, rat(2, 5)));

  // exists onto the empty context: min over the carrier
  Projection to_point = Projection::onto({var("x", "S")}, {});
  std::vector<Rat> r = eval_table(M, ts::fml(M, "R(x)"), std::vector<Variable>{var("x", "S")});
  std::vector<Rat> ex = exists_table(M, to_point, r);
  CHECK(ex == std::vector<Rat>{rat(0)});
  CHECK(exists_duality_exact(M, to_point, r));
}

TEST_CASE("adjunction biconditionals on the running examples") {
  auto M = ts::m0();
  Projection pi = Projection::onto(ctx_xy(), {var("y", "S")});
  std::vector<Rat> g = eval_table(M, ts::fml(M, "d(x, y)"), ctx_xy());

  // unit of the adjunction: g = embed(h)
  std::vector<Rat> h = eval_table(M, ts::fml(M, "R(y)"), std::vector<Variable>{var("y", "S")});
  std::vector<Rat> eh = embed_table(M, pi, h);
  AdjunctionResult unit = check_adjunction(M, pi, eh, h);
  CHECK(unit.ok());
  CHECK(table_leq(forall_table(M, pi, eh), h) == table_leq(eh, embed_table(M, pi, h)));

  std::vector<Rat> one(3, rat(1));
  AdjunctionResult top = check_adjunction(M, pi, g, one);
  CHECK(top.ok());
  CHECK(table_leq(forall_table(M, pi, g), one));

  std::vector<Rat> half_const(3, rat(1, 2));
  AdjunctionResult mid = check_adjunction(M, pi, g, half_const);
  CHECK(mid.ok());  // both sides false, biconditional holds
  CHECK(!table_leq(forall_table(M, pi, g), half_const));
  CHECK(!table_leq(g, embed_table(M, pi, half_const)));
}

TEST_CASE("adjunction laws hold across generated algebras") {
  Rng rng(314);
  for (int iter = 0; iter < 25; ++iter) {
    auto sig = random_signature(rng);
    FiniteStructure M = random_structure(rng, sig);
    Variable x{"x", sig->sorts[rng.pick(sig->sorts.size())]};
    Variable y{"y", sig->sorts[rng.pick(sig->sorts.size())]};
    std::vector<Variable> src = {x, y}, dst = {y};
    Projection pi = Projection::onto(src, dst);

    std::vector<Formula> gseeds, hseeds;
    for (int k = 0; k < 3; ++k) gseeds.push_back(random_formula(rng, *sig, src, 2));
    for (int k = 0; k < 3; ++k) hseeds.push_back(random_formula(rng, *sig, dst, 2));
    FormulaAlgebra G = build_algebra(M, src, gseeds);
    FormulaAlgebra H = build_algebra(M, dst, hseeds);
    close_under_basis(G, 25);
    close_under_basis(H, 25);

    for (const auto& g : G.elements)
      for (const auto& h : H.elements) {
        AdjunctionResult r = check_adjunction(M, pi, g, h);
        REQUIRE(r.ok());
      }

    // order preservation: g <= g' implies forall(g) <= forall(g')
    for (size_t i = 0; i + 1 < G.size(); ++i) {
      std::vector<Rat> meet(G.elements[i].size());
      for (size_t k = 0; k < meet.size(); ++k)
        meet[k] = rat_min(G.elements[i][k], G.elements[i + 1][k]);
      REQUIRE(table_leq(forall_table(M, pi, meet), forall_table(M, pi, G.elements[i])));
    }
  }
}

TEST_CASE("A7 instances evaluate to exactly zero") {
  auto M = ts::m0();
  Formula R = ts::fml(M, "R(x)");
  std::vector<Variable> xs = {var("x", "S")};

  CHECK(check_A7(M, R, R, xs).max_value == rat(0));

  // (sup R -. sup 0) -. sup (R -. 0) = 1 -. 1
  CHECK(check_A7(M, R, ts::fml(M, "0"), xs).max_value == rat(0));

  Rng rng(999);
  for (int iter = 0; iter < 50; ++iter) {
    std::vector<Variable> ctx = {var("x", "S"), var("y", "S")};
    Formula psi = random_formula(rng, *M.sig, ctx, 3);
    Formula phi = random_formula(rng, *M.sig, ctx, 3);
    A7Result r = check_A7(M, psi, phi, xs);
    if (r.max_value != 0) {
      CAPTURE(print_formula(psi), print_formula(phi));
      REQUIRE(r.max_value == rat(0));
    }
  }
}
