#include "test_support.hpp"

#include "cmtk/random_gen.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <thread>

using namespace cmtk;
using ts::rat;
using ts::var;

TEST_CASE("term evaluation composes tables") {
  auto M = ts::m0();
  Env env;
  CHECK(eval_term(M, Term::make_app("e"), env) == 0);                       // a
  CHECK(eval_term(M, Term::make_app("f", {Term::make_app("e")}), env) == 1);  // b
  env.push(var("x", "S"), 0);
  Term ffx = Term::make_app("f", {Term::make_app("f", {Term::make_var(var("x", "S"))})});
  CHECK(eval_term(M, ffx, env) == 2);  // c
  CHECK_THROWS_AS(eval_term(M, Term::make_var(var("z", "S")), env), CmtkError);
}

TEST_CASE("formula evaluation on the running structure") {
  auto M = ts::m0();
  CHECK(ts::eval(M, "inf x:S. R(x)") == rat(0));
  CHECK(ts::eval(M, "sup x:S. R(x)") == rat(1));
  CHECK(ts::eval(M, "d(x, x)", {{"x", "b"}}) == rat(0));
  CHECK(ts::eval(M, "R(x) -. 1/8", {{"x", "b"}}) == rat(1, 8));
  CHECK(ts::eval(M, "R(x) + R(x)", {{"x", "c"}}) == rat(1));  // truncated at 1
  CHECK(ts::eval(M, "~R(x)", {{"x", "b"}}) == rat(3, 4));
  CHECK(ts::eval(M, "R(x)/2", {{"x", "c"}}) == rat(1, 2));
  CHECK(ts::eval(M, "|R(x) - d(x, e)|", {{"x", "b"}}) == rat(1, 4));
}

TEST_CASE("satisfaction: 0 is true, tolerance is exact") {
  auto M = ts::m0();
  auto r1 = satisfies(M, ts::fml(M, "inf x:S. R(x)"));
  CHECK(r1.satisfied);
  CHECK(r1.value.exact == rat(0));
  auto r2 = satisfies(M, ts::fml(M, "sup x:S. R(x)"));
  CHECK(!r2.satisfied);
  CHECK(r2.value.exact == rat(1));
  CHECK(satisfies(M, ts::fml(M, "0")).satisfied);
  CHECK(satisfies(M, ts::fml(M, "sup x:S. R(x)"), rat(1)).satisfied);
  CHECK_THROWS_AS(satisfies(M, ts::fml(M, "R(x)")), CmtkError);
}

TEST_CASE("native connectives yield flagged approximate values") {
  NativeRegistry::instance().register_connective(
      {"sq", 1, rat(2), 1e-12, [](std::span<const double> a) { return a[0] * a[0]; }});
  auto M = ts::m0();
  Formula f = f_native("sq", {ts::fml(M, "R(x)")});
  Value v = eval_at(M, f, {{"x", "b"}});
  CHECK(!v.is_exact);
  CHECK(v.approx == Catch::Approx(1.0 / 16));
  Formula closed = f_sup({var("x", "S")}, f);
  auto sat = satisfies(M, closed, rat(1));
  CHECK(sat.approximate);
  CHECK(sat.satisfied);
  NativeRegistry::instance().clear();
  CHECK_THROWS_AS(eval_at(M, f, {{"x", "b"}}), CmtkError);
}

TEST_CASE("pseudo-metric check passes on M0 and witnesses violations") {
  auto M = ts::m0();
  Report rep = check_pseudo_metric(M, "d");
  CHECK(rep.passed());

  FiniteStructure bad = M;
  bad.relations["d"] = {rat(0), rat(1), rat(0),  //
                        rat(1), rat(0), rat(0),  //
                        rat(0), rat(0), rat(0)};
  Report rep2 = check_pseudo_metric(bad, "d");
  CHECK(!rep2.passed());
  bool saw_triangle = false;
  for (const auto& c : rep2.checks)
    if (c.name == "triangle" && c.status == "fail") saw_triangle = !c.witnesses.empty();
  CHECK(saw_triangle);

  FiniteStructure one = M;
  one.carriers["S"] = {"a"};
  one.relations["d"] = {rat(0)};
  one.relations["R"] = {rat(0)};
  one.functions["f"] = {0};
  one.functions["e"] = {0};
  CHECK(check_pseudo_metric(one, "d").passed());
}

TEST_CASE("modulus check: strict-delta staircase semantics") {
  auto M = ts::m0();
  Modulus m1;
  m1.pairs = {{rat(3, 5), rat(3, 5)}};
  Report r1 = check_modulus(M, "R", m1);
  CHECK(!r1.passed());
  REQUIRE(r1.checks.size() == 1);
  REQUIRE(r1.checks[0].witnesses.size() == 1);
  CHECK(r1.checks[0].witnesses[0].find("b vs c") != std::string::npos);

  Modulus m2;
  m2.pairs = {{rat(2, 5), rat(1)}};
  CHECK(check_modulus(M, "R", m2).passed());

  // functions compare images through the codomain metric
  CHECK(check_modulus(M, "f", m1).passed());

  // distances exactly at delta are not constrained (strict <)
  Modulus m3;
  m3.pairs = {{rat(1, 2), rat(0)}};
  CHECK(check_modulus(M, "R", m3).passed());
}

TEST_CASE("best_modulus produces the empirical staircase") {
  auto M = ts::m0();
  Formula R = ts::fml(M, "R(x)");
  std::vector<Variable> ctx = {var("x", "S")};
  ModulusEstimate est = best_modulus(M, R, ctx);
  CHECK(est.max_difference == rat(1));
  REQUIRE(est.staircase.pairs.size() == 2);
  Modulus expect;
  expect.pairs = {{rat(1, 2), rat(0)}, {rat(1), rat(3, 4)}};
  expect.normalize();
  CHECK(est.staircase == expect);

  ModulusEstimate cst = best_modulus(M, ts::fml(M, "1/2"), ctx);
  CHECK(cst.max_difference == rat(0));
  for (const auto& [d, e] : cst.staircase.pairs) CHECK(e == rat(0));

  // the metric itself is 1-Lipschitz: every level satisfies eps <= delta
  std::vector<Variable> ctx2 = {var("x", "S"), var("y", "S")};
  ModulusEstimate met = best_modulus(M, ts::fml(M, "d(x, y)"), ctx2);
  for (const auto& [delta, eps] : met.staircase.pairs) CHECK(eps <= delta);
  CHECK(met.max_difference == rat(1));
}

TEST_CASE("quotient completion identifies zero-distance points") {
  auto sig = ts::m0_signature();
  FiniteStructure M;
  M.sig = sig;
  M.carriers["S"] = {"a", "a2"};
  M.relations["d"] = {rat(0), rat(0), rat(0), rat(0)};
  M.relations["R"] = {rat(1, 4), rat(1, 4)};
  M.functions["f"] = {1, 1};
  M.functions["e"] = {0};
  M.validate();

  auto res = quotient_completion(M);
  REQUIRE(res.ok);
  CHECK(res.quotient.carrier("S") == std::vector<std::string>{"a"});
  CHECK(res.quotient.relations["R"] == std::vector<Rat>{rat(1, 4)});

  auto M0 = ts::m0();
  Formula ax = ts::fml(M0, "inf x:S. R(x)");
  auto res0 = quotient_completion(M0, std::vector<Formula>{ax});
  REQUIRE(res0.ok);
  CHECK(res0.quotient.carrier("S") == M0.carrier("S"));
  CHECK(res0.quotient.relations == M0.relations);

  // non-congruent relation blocks the quotient
  FiniteStructure bad = M;
  bad.relations["R"] = {rat(1, 4), rat(3, 4)};
  auto res2 = quotient_completion(bad);
  CHECK(!res2.ok);
  REQUIRE(!res2.report.checks.empty());
  CHECK(res2.report.checks[0].status == "fail");
}

TEST_CASE("quotient preserves sentence values on random structures") {
  Rng rng(2026);
  int preserved = 0;
  for (int iter = 0; iter < 40; ++iter) {
    auto sig = random_signature(rng);
    FiniteStructure M = random_structure(rng, sig);
    std::vector<Formula> sentences;
    for (int k = 0; k < 3; ++k) sentences.push_back(random_sentence(rng, *sig, 3));
    auto res = quotient_completion(M, sentences);
    if (!res.ok) continue;  // congruence may genuinely fail on random tables
    ++preserved;
    for (const auto& s : sentences) {
      Env env;
      Value a = eval_formula(M, s, env);
      Value b = eval_formula(res.quotient, s, env);
      REQUIRE(a.exact == b.exact);
    }
  }
  CHECK(preserved > 0);
}

TEST_CASE("exactness: evaluation order of sup/inf cannot matter") {
  // reversing every carrier induces a permuted but value-equal evaluation
  Rng rng(7);
  for (int iter = 0; iter < 40; ++iter) {
    auto sig = random_signature(rng);
    FiniteStructure M = random_structure(rng, sig);
    FiniteStructure Mrev;
    Mrev.sig = M.sig;
    std::map<std::string, std::vector<size_t>> perm;
    for (const auto& s : sig->sorts) {
      std::vector<std::string> c = M.carrier(s);
      std::reverse(c.begin(), c.end());
      Mrev.carriers[s] = c;
      std::vector<size_t> p(c.size());
      for (size_t i = 0; i < c.size(); ++i) p[i] = c.size() - 1 - i;
      perm[s] = p;  // new index -> old index
    }
    for (const auto& r : sig->relations) {
      TupleSpace sp = Mrev.space(r.domain);
      std::vector<Rat> table(sp.size());
      for (size_t flat = 0; flat < sp.size(); ++flat) {
        auto t = sp.decode(flat);
        std::vector<size_t> orig(t.size());
        for (size_t i = 0; i < t.size(); ++i) orig[i] = perm[r.domain[i]][t[i]];
        table[flat] = M.rel_value(r.name, orig);
      }
      Mrev.relations[r.name] = std::move(table);
    }
    for (const auto& f : sig->functions) {
      TupleSpace sp = Mrev.space(f.domain);
      std::vector<uint32_t> table(sp.size());
      for (size_t flat = 0; flat < sp.size(); ++flat) {
        auto t = sp.decode(flat);
        std::vector<size_t> orig(t.size());
        for (size_t i = 0; i < t.size(); ++i) orig[i] = perm[f.domain[i]][t[i]];
        size_t img = M.fn_value(f.name, orig);
        table[flat] = static_cast<uint32_t>(perm[f.codomain].size() - 1 - img);
      }
      Mrev.functions[f.name] = std::move(table);
    }
    Formula s = random_sentence(rng, *sig, 4);
    Env env;
    REQUIRE(eval_formula(M, s, env).exact == eval_formula(Mrev, s, env).exact);
  }
}

TEST_CASE("monotone quantifiers: pointwise order is preserved") {
  Rng rng(11);
  for (int iter = 0; iter < 60; ++iter) {
    auto sig = random_signature(rng);
    FiniteStructure M = random_structure(rng, sig);
    Variable x{"x", sig->sorts[rng.pick(sig->sorts.size())]};
    std::vector<Variable> ctx = {x};
    Formula phi = random_formula(rng, *sig, ctx, 3);
    Formula chi = random_formula(rng, *sig, ctx, 2);
    Formula psi = f_min(phi, chi);  // psi <= phi pointwise
    Env env;
    Value sup_psi = eval_formula(M, f_sup({x}, psi), env);
    Value sup_phi = eval_formula(M, f_sup({x}, phi), env);
    Value inf_psi = eval_formula(M, f_inf({x}, psi), env);
    Value inf_phi = eval_formula(M, f_inf({x}, phi), env);
    REQUIRE(sup_psi.exact <= sup_phi.exact);
    REQUIRE(inf_psi.exact <= inf_phi.exact);
  }
}

TEST_CASE("equal terms have distance zero") {
  auto M = ts::m0();
  // identical tables: t = f(f(x)), s = f(f(x)) and also the pointwise-equal pair
  Formula same = ts::fml(M, "sup x:S. d(f(f(x)), f(f(x)))");
  CHECK(satisfies(M, same).value.exact == rat(0));

  Rng rng(23);
  for (int iter = 0; iter < 60; ++iter) {
    auto sig = random_signature(rng);
    FiniteStructure M2 = random_structure(rng, sig);
    Variable x{"x", sig->sorts[rng.pick(sig->sorts.size())]};
    std::vector<Variable> ctx = {x};
    auto t = random_term(rng, *sig, ctx, sig->sorts[rng.pick(sig->sorts.size())], 2);
    auto s = random_term(rng, *sig, ctx, t ? term_sort(*sig, *t) : sig->sorts[0], 2);
    if (!t || !s) continue;
    if (term_sort(*sig, *t) != term_sort(*sig, *s)) continue;
    const std::string sort = term_sort(*sig, *t);
    // compare induced element tables
    bool equal = true;
    for (size_t i = 0; i < M2.carrier(x.sort).size() && equal; ++i) {
      Env env;
      env.push(x, i);
      equal = eval_term(M2, *t, env) == eval_term(M2, *s, env);
    }
    if (!equal) continue;
    Formula dist = f_sup({x}, f_atom(*M2.sig->metric_of(sort), {*t, *s}));
    REQUIRE(satisfies(M2, dist).value.exact == rat(0));
  }
}

TEST_CASE("concurrent evaluation shares structures without interference") {
  auto M = ts::m0();
  Formula f = ts::fml(M, "sup x:S. inf y:S. d(x, y) + R(y)");
  Env env0;
  Rat expected = eval_formula(M, f, env0).exact;
  std::vector<std::thread> threads;
  std::vector<Rat> results(8);
  for (int i = 0; i < 8; ++i)
    threads.emplace_back([&, i] {
      Env env;
      results[i] = eval_formula(M, f, env).exact;
    });
  for (auto& t : threads) t.join();
  for (const auto& r : results) CHECK(r == expected);
}

TEST_CASE("structure JSON round trip and validation errors") {
  auto M = ts::m0();
  Json j = save_structure(M);
  FiniteStructure M2 = load_structure(M.sig, j);
  CHECK(M2.carriers == M.carriers);
  CHECK(M2.relations == M.relations);
  CHECK(M2.functions == M.functions);
  CHECK(save_structure(M2) == j);

  Json gap = j;
  gap["relations"]["R"] = Json::array({Json::array({"a", "0"})});
  CHECK_THROWS_AS(load_structure(M.sig, gap), CmtkError);

  Json empty = j;
  empty["sorts"]["S"] = Json::array();
  CHECK_THROWS_AS(load_structure(M.sig, empty), CmtkError);

  Json out_of_range = j;
  out_of_range["relations"]["R"] = Json::array(
      {Json::array({"a", "3/2"}), Json::array({"b", "0"}), Json::array({"c", "0"})});
  CHECK_THROWS_AS(load_structure(M.sig, out_of_range), CmtkError);

  // the documented structure shape parses
  std::string text = R"({
    "sorts": {"S": ["a", "b", "c"]},
    "metrics": {"d": [["a","b","1/2"], ["a","c","1"], ["b","c","1/2"]]},
    "relations": {"R": [["a","0"], ["b","1/4"], ["c","1"]]},
    "functions": {"f": {"a":"b", "b":"c", "c":"c"}, "e": "a"}
  })";
  FiniteStructure M3 = load_structure_text(M.sig, text);
  CHECK(M3.relations == M.relations);
  CHECK(M3.functions == M.functions);
}
