#include "test_support.hpp"

#include "cmtk/eqcons.hpp"
#include "cmtk/random_gen.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace cmtk;
using ts::rat;
using ts::var;

namespace {

// The canonical-parameter example: two slices agree, one differs.
FiniteStructure slice_structure() {
  auto sig = std::make_shared<Signature>();
  sig->sorts = {"X", "Y"};
  RelationSymbol dX;
  dX.name = "dX";
  dX.domain = {"X", "X"};
  dX.metric_for = "X";
  sig->relations.push_back(dX);
  RelationSymbol dY;
  dY.name = "dY";
  dY.domain = {"Y", "Y"};
  dY.metric_for = "Y";
  sig->relations.push_back(dY);
  RelationSymbol F;
  F.name = "F";
  F.domain = {"X", "Y"};
  sig->relations.push_back(F);
  sig->validate();

  FiniteStructure M;
  M.sig = sig;
  M.carriers["X"] = {"p", "q"};
  M.carriers["Y"] = {"b1", "b2", "b3"};
  auto discrete = [](size_t n) {
    std::vector<Rat> t(n * n, Rat(1));
    for (size_t i = 0; i < n; ++i) t[i * n + i] = Rat(0);
    return t;
  };
  M.relations["dX"] = discrete(2);
  M.relations["dY"] = discrete(3);
  M.relations["F"] = {Rat(0), Rat(0), Rat(1),   // F(p, b1..b3)
                      Rat(1), Rat(1), Rat(0)};  // F(q, b1..b3)
  M.validate();
  return M;
}

CanParamSpec spec_of(const FiniteStructure& M, const std::string& text,
                     std::vector<Variable> xs, std::vector<Variable> ys) {
  return CanParamSpec{ts::fml(M, text), std::move(xs), std::move(ys)};
}

}  // namespace

TEST_CASE("product sorts carry the scaled-sum metric") {
  auto M = ts::m0();
  EqExpansion e = build_product(M, {"S", "S"}, 2, "P");
  CHECK(e.verification.passed());
  const FiniteStructure& E = e.expansion;
  CHECK(E.carrier("P").size() == 9);
  CHECK(e.truncation_error == rat(1, 4));

  size_t aa = E.elem_index("P", "(a,a)");
  size_t bc = E.elem_index("P", "(b,c)");
  CHECK(E.metric("P", aa, bc) == rat(1, 2));  // (1/2)/2 + 1/4
  CHECK(E.metric("P", aa, aa) == rat(0));

  EqExpansion e1 = build_product(M, {"S"}, 1, "Q");
  CHECK(e1.verification.passed());
  for (size_t i = 0; i < 3; ++i)
    for (size_t j = 0; j < 3; ++j)
      CHECK(e1.expansion.metric("Q", i, j) == M.metric("S", i, j) / 2);
}

TEST_CASE("product truncation between consecutive depths") {
  auto M = ts::m0();
  EqExpansion e2 = build_product(M, {"S", "S", "S"}, 2, "P2");
  EqExpansion e3 = build_product(M, {"S", "S", "S"}, 3, "P3");
  CHECK(e2.verification.passed());
  CHECK(e3.verification.passed());
  size_t n3 = e3.expansion.carrier("P3").size();
  for (size_t x = 0; x < n3; ++x)
    for (size_t y = 0; y < n3; ++y) {
      Rat m3 = e3.expansion.metric("P3", x, y);
      Rat m2 = e2.expansion.metric("P2", x / 3, y / 3);
      CHECK(abs_diff(m3, m2) <= rat(1, 8));
    }
}

TEST_CASE("defset sorts carve out zero sets") {
  auto M = ts::m0();
  auto A = DefinablePredicate::single(ts::fml(M, "d(x, e)"), {var("x", "S")});
  EqExpansion e = build_defset_sort(M, A, "D");
  CHECK(e.verification.passed());
  CHECK(e.expansion.carrier("D") == std::vector<std::string>{"a"});

  auto whole = DefinablePredicate::single(ts::fml(M, "0"), {var("x", "S")});
  EqExpansion e2 = build_defset_sort(M, whole, "W");
  CHECK(e2.verification.passed());
  CHECK(e2.expansion.carrier("W").size() == 3);
  for (size_t i = 0; i < 3; ++i)
    for (size_t j = 0; j < 3; ++j)
      CHECK(e2.expansion.metric("W", i, j) == M.metric("S", i, j));

  auto R = DefinablePredicate::single(ts::fml(M, "R(x)"), {var("x", "S")});
  CHECK_THROWS_AS(build_defset_sort(M, R, "B"), PrerequisiteError);
}

TEST_CASE("defset over a two-point zero set inherits the metric") {
  auto base = ts::m0_signature();
  auto sig = std::make_shared<Signature>(*base);
  FunctionSymbol cb;
  cb.name = "cb";
  cb.codomain = "S";
  sig->functions.push_back(cb);
  sig->validate();
  FiniteStructure M = ts::m0();
  M.sig = sig;
  M.functions["cb"] = {1};
  M.validate();

  auto A = DefinablePredicate::single(ts::fml(M, "min(d(x, e), d(x, cb))"), {var("x", "S")});
  EqExpansion e = build_defset_sort(M, A, "D2");
  CHECK(e.verification.passed());
  REQUIRE(e.expansion.carrier("D2").size() == 2);
  CHECK(e.expansion.metric("D2", 0, 1) == rat(1, 2));
}

TEST_CASE("defset over a multi-variable context gets coordinate projections") {
  // note: d(x, y) itself is not definable as a pair predicate; its value at
  // (a, c) is 1 but the max-metric distance to the diagonal is 1/2 via b.
  auto base = ts::m0_signature();
  auto sig = std::make_shared<Signature>(*base);
  FunctionSymbol cb;
  cb.name = "cb";
  cb.codomain = "S";
  sig->functions.push_back(cb);
  sig->validate();
  FiniteStructure M = ts::m0();
  M.sig = sig;
  M.functions["cb"] = {1};
  M.validate();

  // distance to the two pairs (a,a) and (b,b)
  auto A = DefinablePredicate::single(
      ts::fml(M, "min(max(d(x, e), d(y, e)), max(d(x, cb), d(y, cb)))"),
      {var("x", "S"), var("y", "S")});
  EqExpansion e = build_defset_sort(M, A, "Diag");
  CHECK(e.verification.passed());
  const FiniteStructure& E = e.expansion;
  REQUIRE(E.carrier("Diag") == std::vector<std::string>{"(a,a)", "(b,b)"});
  for (size_t i = 0; i < 2; ++i) {
    size_t c1 = E.fn_value("f1_Diag", std::vector<size_t>{i});
    size_t c2 = E.fn_value("f2_Diag", std::vector<size_t>{i});
    CHECK(c1 == c2);
    CHECK(c1 == i);
  }
  CHECK(E.metric("Diag", 0, 1) == rat(1, 2));  // max of the coordinate metrics

  // a one-point zero set over two coordinates
  auto corner = DefinablePredicate::single(ts::fml(M, "max(d(x, e), d(y, e))"),
                                           {var("x", "S"), var("y", "S")});
  EqExpansion e2 = build_defset_sort(M, corner, "Pt");
  CHECK(e2.verification.passed());
  CHECK(e2.expansion.carrier("Pt") == std::vector<std::string>{"(a,a)"});
}

TEST_CASE("canonical parameters over tuple parameter contexts") {
  auto M = ts::m0();
  // phi(x; y1, y2) = min(d(x,y1), d(x,y2)): unordered pairs with equal slices merge
  CanParamSpec spec{ts::fml(M, "min(d(x, y1), d(x, y2))"),
                    {var("x", "S")},
                    {var("y1", "S"), var("y2", "S")}};
  CanParamResult r = build_canparam(M, spec, "CP");
  CHECK(r.expansion.verification.passed());
  const FiniteStructure& E = r.expansion.expansion;
  // 9 ordered pairs; (u,v) and (v,u) always share a slice; no other merges
  // happen here because distinct unordered pairs give distinct tables
  CHECK(E.carrier("CP").size() == 6);
  // pi is binary on the parameter sorts
  CHECK(E.sig->find_function("pi_CP")->domain == std::vector<std::string>{"S", "S"});
  size_t ab = E.fn_value("pi_CP", std::vector<size_t>{0, 1});
  size_t ba = E.fn_value("pi_CP", std::vector<size_t>{1, 0});
  CHECK(ab == ba);
}

TEST_CASE("three-member unions generate all cross axioms") {
  auto M = ts::m0();
  std::vector<CanParamSpec> specs = {
      spec_of(M, "0", {var("x", "S")}, {var("y", "S")}),
      spec_of(M, "1/2", {var("x", "S")}, {var("y", "S")}),
      spec_of(M, "1", {var("x", "S")}, {var("y", "S")}),
  };
  UnionResult u = build_union_from_specs(M, specs, "U3");
  CHECK(u.expansion.verification.passed());
  const FiniteStructure& E = u.expansion.expansion;
  REQUIRE(E.carrier("U3").size() == 3);
  // the constant slices sit at their pairwise sup-distances
  size_t c0 = E.fn_value("i1_U3", std::vector<size_t>{0});
  size_t c1 = E.fn_value("i2_U3", std::vector<size_t>{0});
  size_t c2 = E.fn_value("i3_U3", std::vector<size_t>{0});
  CHECK(E.metric("U3", c0, c1) == rat(1, 2));
  CHECK(E.metric("U3", c0, c2) == rat(1));
  CHECK(E.metric("U3", c1, c2) == rat(1, 2));
  size_t cross = 0;
  for (const auto& ax : u.expansion.axioms)
    if (ax.label.find("_cross_") != std::string::npos) ++cross;
  CHECK(cross == 9);
}

TEST_CASE("tower levels may hold several approximant families") {
  auto M = ts::m0();
  CanParamSpec sd = spec_of(M, "d(x, y)", {var("x", "S")}, {var("y", "S")});
  CanParamSpec half = spec_of(M, "d(x, y)/2", {var("x", "S")}, {var("y", "S")});
  // level 1 must approximate within 1/2: the halved metric slices suffice
  // (|d - d/2| = d/2 <= 1/2); level 2 needs the exact family
  std::vector<std::vector<CanParamSpec>> levels = {{half, sd}, {sd}};
  TowerResult t = build_canparam_tower(M, sd, levels, "T3");
  CHECK(t.expansion.verification.passed());
  CHECK(t.separation_ok);
  CanParamResult direct = build_canparam(M, sd, "C3");
  CHECK(t.expansion.expansion.carrier("T3").size() ==
        direct.expansion.expansion.carrier("C3").size());
}

TEST_CASE("canonical parameters quotient by slice equality") {
  FiniteStructure M = slice_structure();
  CanParamResult r =
      build_canparam(M, spec_of(M, "F(x, y)", {var("x", "X")}, {var("y", "Y")}), "C");
  CHECK(r.expansion.verification.passed());
  const FiniteStructure& E = r.expansion.expansion;
  REQUIRE(E.carrier("C").size() == 2);
  CHECK(r.expansion.class_of == std::vector<size_t>{0, 0, 1});
  CHECK(E.metric("C", 0, 1) == rat(1));
  CHECK(E.carrier("C")[0] == "[b1]");

  // phi constant in the parameters: a one-point sort
  CanParamResult c =
      build_canparam(M, spec_of(M, "1/2", {var("x", "X")}, {var("y", "Y")}), "K");
  CHECK(c.expansion.verification.passed());
  CHECK(c.expansion.expansion.carrier("K").size() == 1);
}

TEST_CASE("canonical parameters of the metric reproduce the sort") {
  auto M = ts::m0();
  CanParamResult r =
      build_canparam(M, spec_of(M, "d(x, y)", {var("x", "S")}, {var("y", "S")}), "C");
  CHECK(r.expansion.verification.passed());
  const FiniteStructure& E = r.expansion.expansion;
  REQUIRE(E.carrier("C").size() == 3);  // d separates points
  for (size_t i = 0; i < 3; ++i)
    for (size_t j = 0; j < 3; ++j)
      CHECK(E.metric("C", i, j) == M.metric("S", i, j));  // rho = d by the triangle inequality
}

TEST_CASE("union glues identical slices and keeps distinct ones apart") {
  auto M = ts::m0();
  CanParamSpec sd = spec_of(M, "d(x, y)", {var("x", "S")}, {var("y", "S")});

  UnionResult same = build_union_from_specs(M, std::vector<CanParamSpec>{sd, sd}, "U");
  CHECK(same.expansion.verification.passed());
  CHECK(same.expansion.expansion.carrier("U").size() == 3);  // one copy

  CanParamSpec zero = spec_of(M, "0", {var("x", "S")}, {var("y", "S")});
  CanParamSpec one = spec_of(M, "1", {var("x", "S")}, {var("y", "S")});
  UnionResult two = build_union_from_specs(M, std::vector<CanParamSpec>{zero, one}, "V");
  CHECK(two.expansion.verification.passed());
  const FiniteStructure& E = two.expansion.expansion;
  REQUIRE(E.carrier("V").size() == 2);
  CHECK(E.metric("V", 0, 1) == rat(1));

  UnionResult single = build_union_from_specs(M, std::vector<CanParamSpec>{sd}, "W");
  CHECK(single.expansion.verification.passed());
  CanParamResult direct = build_canparam(M, sd, "W2");
  CHECK(single.expansion.expansion.carrier("W").size() ==
        direct.expansion.expansion.carrier("W2").size());
}

TEST_CASE("flim follows the clamped recursion") {
  CHECK(flim(std::vector<Rat>{rat(1, 3), rat(1, 3), rat(1, 3)}).value == rat(1, 3));

  CHECK(flim(std::vector<Rat>{rat(1), rat(0), rat(0), rat(0)}).value == rat(0));

  std::vector<Rat> geo;
  for (unsigned n = 0; n < 8; ++n) geo.push_back(pow2_inv(n + 1));
  FlimResult r = flim(geo);
  CHECK(r.value <= pow2_inv(7));
  CHECK(r.error_bound == pow2_inv(7));

  CHECK_THROWS_AS(flim(std::vector<Rat>{}), CmtkError);
}

TEST_CASE("flim continuity surrogate on random probes") {
  Rng rng(41);
  for (int iter = 0; iter < 300; ++iter) {
    size_t n = 1 + rng.pick(6);
    std::vector<Rat> a(n), b(n);
    for (size_t i = 0; i < n; ++i) {
      a[i] = rng.unit_rat(16);
      b[i] = rng.unit_rat(16);
    }
    Rat lhs = abs_diff(flim(a).value, flim(b).value);
    Rat rhs(0);
    for (size_t i = 0; i < n; ++i) rhs += abs_diff(a[i], b[i]);
    REQUIRE(lhs <= rhs);
  }
}

TEST_CASE("towers with exact approximants reproduce canonical parameters") {
  auto M = ts::m0();
  CanParamSpec sd = spec_of(M, "d(x, y)", {var("x", "S")}, {var("y", "S")});
  std::vector<std::vector<CanParamSpec>> levels = {{sd}, {sd}};
  TowerResult t = build_canparam_tower(M, sd, levels, "T");
  CHECK(t.expansion.verification.passed());
  CHECK(t.separation_ok);

  CanParamResult direct = build_canparam(M, sd, "C");
  const FiniteStructure& E = t.expansion.expansion;
  REQUIRE(E.carrier("T").size() == direct.expansion.expansion.carrier("C").size());
  // the induced map respects the canonical-parameter metric
  for (size_t b = 0; b < 3; ++b)
    for (size_t c = 0; c < 3; ++c)
      CHECK(E.metric("T", t.f_phi[b], t.f_phi[c]) ==
            direct.expansion.expansion.metric("C", direct.expansion.class_of[b],
                                              direct.expansion.class_of[c]));
}

TEST_CASE("towers of a constant formula collapse to a point") {
  auto M = ts::m0();
  CanParamSpec konst = spec_of(M, "1/4", {var("x", "S")}, {var("y", "S")});
  std::vector<std::vector<CanParamSpec>> levels = {{konst}};
  TowerResult t = build_canparam_tower(M, konst, levels, "T1");
  CHECK(t.expansion.verification.passed());
  CHECK(t.expansion.expansion.carrier("T1").size() == 1);
  CHECK(t.separation_ok);
}

TEST_CASE("tower approximation-rate violations carry witnesses") {
  auto M = ts::m0();
  CanParamSpec sd = spec_of(M, "d(x, y)", {var("x", "S")}, {var("y", "S")});
  CanParamSpec zero = spec_of(M, "0", {var("x", "S")}, {var("y", "S")});
  std::vector<std::vector<CanParamSpec>> levels = {{zero}};
  try {
    build_canparam_tower(M, sd, levels, "T2");
    FAIL("expected an approximation-rate violation");
  } catch (const PrerequisiteError& e) {
    bool witnessed = false;
    for (const auto& c : e.report.checks)
      for (const auto& w : c.witnesses)
        if (w.find("level 1") != std::string::npos) witnessed = true;
    CHECK(witnessed);
  }
}

TEST_CASE("stable embeddedness by exhaustive search") {
  auto M = ts::m0();
  std::vector<std::string> base = {"S"};
  Formula phi = ts::fml(M, "d(x, y)");
  std::vector<Variable> xs = {var("x", "S")}, ys = {var("y", "S")}, zs = {var("z", "S")};
  Formula phi_z = ts::fml(M, "d(x, z)");

  CHECK(check_stably_embedded(M, base, rat(0), phi, xs, ys, phi_z, zs).passed());
  CHECK(check_stably_embedded(M, base, rat(1), phi, xs, ys, ts::fml(M, "R(x)"), zs).passed());

  Report fail = check_stably_embedded(M, base, rat(1, 4), phi, xs, ys, ts::fml(M, "R(x)"), zs);
  CHECK(!fail.passed());
  bool saw_b = false;
  for (const auto& c : fail.checks)
    for (const auto& w : c.witnesses)
      if (w.find("parameter b") != std::string::npos) saw_b = true;
  CHECK(saw_b);

  // parameters from a genuine eq sort restrict to base formulas exactly
  EqExpansion prod = build_product(M, {"S", "S"}, 2, "P");
  const FiniteStructure& E = prod.expansion;
  Formula phi_eq = parse_formula("d(x, pi1_P(y))", *E.sig);
  std::vector<Variable> yP = {var("y", "P")};
  CHECK(check_stably_embedded(E, base, rat(0), phi_eq, xs, yP, phi_z, zs).passed());

  Report err = check_stably_embedded(E, std::vector<std::string>{"S"}, rat(0), phi_eq, yP, ys,
                                     phi_z, zs);
  CHECK(err.status == "error");  // x must range over base sorts
}

TEST_CASE("conservativity of every constructor") {
  auto M = ts::m0();
  std::vector<Formula> sentences = {ts::fml(M, "inf x:S. R(x)"), ts::fml(M, "sup x:S. R(x)"),
                                    ts::fml(M, "sup x:S. d(x, f(x))")};
  auto check = [&](const EqExpansion& e) {
    Report rep = check_conservative(M, e, sentences);
    CHECK(rep.passed());
  };
  check(build_product(M, {"S", "S"}, 2, "P"));
  check(build_defset_sort(
      M, DefinablePredicate::single(ts::fml(M, "d(x, e)"), {var("x", "S")}), "D"));
  CanParamSpec sd = spec_of(M, "d(x, y)", {var("x", "S")}, {var("y", "S")});
  check(build_canparam(M, sd, "C").expansion);
  check(build_union_from_specs(M, std::vector<CanParamSpec>{sd, sd}, "U").expansion);
}

TEST_CASE("eqspec files run end to end") {
  auto M = ts::m0();
  std::string text =
      "let A(x : S) = d(x, e);\n"
      "eqsort P = product(S, S) depth 2;\n"
      "eqsort D = defset(A);\n"
      "eqsort C = canparam(d(x, y); x : S; y : S);\n"
      "eqsort C2 = canparam(R(x) -. d(x, y); x : S; y : S);\n"
      "eqsort U = union(C, C2);\n";
  EqSpecFile file = parse_eqspec(text, *M.sig);
  EqRunResult r = run_eqspec(M, file);
  CHECK(r.report.passed());
  CHECK(r.structure.carrier("P").size() == 9);
  CHECK(r.structure.carrier("D").size() == 1);
  CHECK(r.structure.carrier("C").size() == 3);
  CHECK(std::find(r.new_sorts.begin(), r.new_sorts.end(), "U") != r.new_sorts.end());

  // the grown structure round-trips through JSON against its own signature
  Json j = save_structure(r.structure);
  FiniteStructure back = load_structure(r.structure.sig, j);
  CHECK(back.relations == r.structure.relations);
}
