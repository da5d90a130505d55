#include "test_support.hpp"

#include "cmtk/defcat.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace cmtk;
using ts::rat;
using ts::var;

namespace {

Theory m0_theory() {
  Theory th;
  th.signature = *ts::m0_signature();
  auto M = ts::m0();
  th.axioms.push_back(Axiom{"r_min", ts::fml(M, "inf x:S. R(x)")});
  return th;
}

DefCategory m0_category() { return make_defcat(m0_theory(), {ts::m0()}); }

}  // namespace

TEST_CASE("a single object yields a one-object category with identity") {
  DefCategory cat = make_defcat(m0_theory(), {ts::m0()});
  CHECK(cat.build_report.passed());
  auto M = ts::m0();
  size_t a = add_object(cat, "A", DefinablePredicate::single(ts::fml(M, "d(x, e)"),
                                                             {var("x", "S")}));
  add_identity(cat, a);
  Report laws = check_category_laws(cat);
  CHECK(laws.passed());
  CHECK(cat.objects.size() == 2);  // the empty product plus A
}

TEST_CASE("objects failing the criterion are rejected") {
  DefCategory cat = m0_category();
  auto M = ts::m0();
  CHECK_THROWS_AS(
      add_object(cat, "B", DefinablePredicate::single(ts::fml(M, "R(x)"), {var("x", "S")})),
      PrerequisiteError);
}

TEST_CASE("binary products satisfy the category laws and universal property") {
  DefCategory cat = m0_category();
  auto M = ts::m0();
  Variable x{"x", "S"};
  size_t sobj = add_object(cat, "[S]",
                           DefinablePredicate::single(ts::fml(M, "d(x, x)"), {x}));
  add_identity(cat, sobj);
  ProductInfo prod = add_product(cat, sobj, sobj);
  CHECK(cat.objects[prod.object].pred.context.size() == 2);

  // the product object's metric data: zero set is the full square
  ZeroSet z = zero_set(ts::m0(), cat.objects[prod.object].pred);
  CHECK(z.members.size() == 9);

  size_t gf = add_morphism(cat, "gf", sobj, sobj, ts::fml(M, "d(f(x), x')"));
  Report uni = check_product_universal(cat, prod, gf, cat.identity_of[sobj]);
  CHECK(uni.passed());
  Report laws = check_category_laws(cat);
  CHECK(laws.passed());
}

TEST_CASE("empty object list leaves only the terminal object") {
  DefCategory cat = m0_category();
  REQUIRE(cat.objects.size() == 1);
  CHECK(cat.objects[0].name == "1");
  add_identity(cat, 0);
  CHECK(check_category_laws(cat).passed());
}

TEST_CASE("canonical interpretation of the running structure") {
  CanonicalInterpretation ci = canonical_interpretation(m0_theory(), {ts::m0()});
  DefCategory& cat = ci.category;

  // sorts become [d(x,x)], whose zero set is all of S
  size_t sobj = ci.sort_object.at("S");
  ZeroSet z = zero_set(cat.suite[0], cat.objects[sobj].pred);
  CHECK(z.members.size() == 3);

  // the function symbol's graph induces f's table
  size_t fm = ci.fn_morphism.at("f");
  FunctionCheck ck = check_definable_function(cat.suite_ptrs(), cat.morphisms[fm].fn);
  REQUIRE(ck.ok);
  CHECK(ck.per_model[0].mapping == std::vector<size_t>{1, 2, 2});

  // the constant e lands as a morphism from the empty product
  size_t em = ci.fn_morphism.at("e");
  CHECK(cat.objects[cat.morphisms[em].src].name == "1");
  FunctionCheck ck2 = check_definable_function(cat.suite_ptrs(), cat.morphisms[em].fn);
  REQUIRE(ck2.ok);
  CHECK(ck2.per_model[0].mapping == std::vector<size_t>{0});

  // R registers as a quotient-algebra element over [S]
  REQUIRE(ci.rel_elements.size() == 1);
  CHECK(ci.rel_elements[0].label == "R");
  CHECK(object_quotient_equal(cat, sobj, ci.rel_elements[0].formula,
                              ts::fml(cat.suite[0], "R(x)")));
  CHECK(!object_quotient_equal(cat, sobj, ci.rel_elements[0].formula,
                               ts::fml(cat.suite[0], "0")));

  CHECK(check_category_laws(cat).passed());
  CHECK(check_metric_logical_category(cat).passed());
}

TEST_CASE("interpretations compose and transport structures") {
  auto M = ts::m0();
  InterpretationMap I = identity_interpretation(*M.sig);
  FiniteStructure back = forgetful(I, M.sig, M);
  CHECK(back.relations == M.relations);
  CHECK(back.functions == M.functions);

  // the inclusion of the base theory into a product expansion
  EqExpansion prod = build_product(M, {"S", "S"}, 2, "P");
  InterpretationMap inc = identity_interpretation(*M.sig);
  FiniteStructure reduct = forgetful(inc, M.sig, prod.expansion);
  CHECK(reduct.carriers == M.carriers);
  CHECK(reduct.relations == M.relations);
  CHECK(reduct.functions == M.functions);

  // sentence transport: values agree through the translation
  Theory th = m0_theory();
  for (const auto& ax : th.axioms) {
    Value direct = satisfies(reduct, ax.sentence).value;
    Value via = satisfies(prod.expansion, translate(inc, ax.sentence)).value;
    CHECK(direct.exact == via.exact);
  }
  CHECK(check_interpretation(inc, th, std::vector<FiniteStructure>{prod.expansion}).passed());

  // a three-theory chain: (J after I)* = I* after J*
  InterpretationMap J = identity_interpretation(*M.sig);
  InterpretationMap JI = compose_interpretations(I, J);
  FiniteStructure lhs = forgetful(JI, M.sig, M);
  FiniteStructure rhs = forgetful(I, M.sig, forgetful(J, M.sig, M));
  CHECK(lhs.relations == rhs.relations);
  CHECK(lhs.functions == rhs.functions);
}

TEST_CASE("a nontrivial interpretation maps symbols to formulas") {
  // interpret a single-relation theory inside M0's theory by sending the
  // relation to a compound formula
  Signature src;
  src.sorts = {"T"};
  RelationSymbol dT;
  dT.name = "dT";
  dT.domain = {"T", "T"};
  dT.metric_for = "T";
  src.relations.push_back(dT);
  RelationSymbol Q;
  Q.name = "Q";
  Q.domain = {"T"};
  src.relations.push_back(Q);
  src.validate();
  auto src_sig = std::make_shared<Signature>(src);

  auto M = ts::m0();
  InterpretationMap I;
  I.sort_map["T"] = "S";
  {
    InterpretationMap::RelImage img;
    img.params = {var("v1", "S"), var("v2", "S")};
    img.body = ts::fml(M, "d(v1, v2)");
    I.rel_map["dT"] = img;
  }
  {
    InterpretationMap::RelImage img;
    img.params = {var("v1", "S")};
    img.body = ts::fml(M, "min(R(v1), d(v1, e))");
    I.rel_map["Q"] = img;
  }
  FiniteStructure N = forgetful(I, src_sig, M);
  CHECK(N.carrier("T") == M.carrier("S"));
  CHECK(N.relations.at("Q") == std::vector<Rat>{rat(0), rat(1, 4), rat(1)});

  Formula sigma = parse_formula("inf t:T. Q(t)", *src_sig);
  Value direct = satisfies(N, sigma).value;
  Value via = satisfies(M, translate(I, sigma)).value;
  CHECK(direct.exact == via.exact);

  // composing a nontrivial interpretation with the identity changes nothing
  InterpretationMap J0 = identity_interpretation(*M.sig);
  InterpretationMap K = compose_interpretations(I, J0);
  FiniteStructure N2 = forgetful(K, src_sig, M);
  CHECK(N2.relations == N.relations);
  CHECK(satisfies(M, translate(K, sigma)).value.exact == direct.exact);
}

TEST_CASE("internal language of a one-object fragment") {
  DefCategory cat = m0_category();
  auto M = ts::m0();
  Variable x{"x", "S"};
  size_t sobj = add_object(cat, "A", DefinablePredicate::single(ts::fml(M, "d(x, x)"), {x}));
  size_t idm = add_identity(cat, sobj);

  InternalLanguage il = internal_language(cat, {});
  CHECK(il.fragment.signature.sorts == std::vector<std::string>{"S_A"});
  CHECK(il.morphism_fn.at(cat.morphisms[idm].name) == "f_id_A");
  bool has_identity_axiom = false;
  for (const auto& ax : il.fragment.axioms)
    if (ax.label == "identity_A") has_identity_axiom = true;
  CHECK(has_identity_axiom);

  FiniteStructure taut = tautological_model(il, 0);
  CHECK(validate_fragment_model(il, taut).passed());
}

TEST_CASE("internal language generates composition axioms") {
  DefCategory cat = m0_category();
  auto M = ts::m0();
  Variable x{"x", "S"};
  size_t sobj = add_object(cat, "A", DefinablePredicate::single(ts::fml(M, "d(x, x)"), {x}));
  add_identity(cat, sobj);
  size_t gf = add_morphism(cat, "gf", sobj, sobj, ts::fml(M, "d(f(x), x')"));
  size_t comp = compose_in(cat, gf, gf);
  CHECK(comp != gf);  // f after f is a genuinely new class

  std::vector<AlgebraElement> elems = {{"R", sobj, ts::fml(M, "R(x)")}};
  InternalLanguage il = internal_language(cat, elems);
  bool has_comp_axiom = false;
  for (const auto& ax : il.fragment.axioms)
    if (ax.label.rfind("composition_", 0) == 0) has_comp_axiom = true;
  CHECK(has_comp_axiom);
  CHECK(il.element_rel.count("R") == 1);

  FiniteStructure taut = tautological_model(il, 0);
  CHECK(validate_fragment_model(il, taut).passed());
  CHECK(taut.relations.at("R_R") == std::vector<Rat>{rat(0), rat(1, 4), rat(1)});
}

TEST_CASE("internal language of no data is empty") {
  DefCategory cat = m0_category();
  InternalLanguage il = internal_language(cat, {});
  CHECK(il.fragment.signature.sorts.empty());
  CHECK(il.fragment.signature.functions.empty());
  CHECK(il.fragment.signature.relations.empty());
  CHECK(il.fragment.axioms.empty());
}

TEST_CASE("model <-> functor round trip is the identity") {
  DefCategory cat = m0_category();
  auto M = ts::m0();
  Variable x{"x", "S"};
  size_t sobj = add_object(cat, "A", DefinablePredicate::single(ts::fml(M, "d(x, x)"), {x}));
  add_identity(cat, sobj);
  add_morphism(cat, "gf", sobj, sobj, ts::fml(M, "d(f(x), x')"));
  std::vector<AlgebraElement> elems = {{"R", sobj, ts::fml(M, "R(x)")}};
  InternalLanguage il = internal_language(cat, elems);

  FiniteStructure taut = tautological_model(il, 0);
  FunctorData F = model_to_functor(il, taut);
  CHECK(F.objects.at("A").first == std::vector<std::string>{"a", "b", "c"});
  FiniteStructure back = functor_to_model(il, F);
  CHECK(back.carriers == taut.carriers);
  CHECK(back.relations == taut.relations);
  CHECK(back.functions == taut.functions);

  // violating a fragment axiom is rejected
  FiniteStructure broken = taut;
  broken.functions["f_id_A"] = {1, 2, 0};
  CHECK_THROWS_AS(model_to_functor(il, broken), PrerequisiteError);
}

TEST_CASE("logical transformations from elementary maps") {
  DefCategory cat = m0_category();
  auto M = ts::m0();
  Variable x{"x", "S"};
  size_t sobj = add_object(cat, "A", DefinablePredicate::single(ts::fml(M, "d(x, x)"), {x}));
  add_identity(cat, sobj);
  add_morphism(cat, "gf", sobj, sobj, ts::fml(M, "d(f(x), x')"));
  InternalLanguage il = internal_language(cat, {{"R", sobj, ts::fml(M, "R(x)")}});
  FiniteStructure taut = tautological_model(il, 0);

  std::map<std::string, std::vector<uint32_t>> h;
  h["S_A"] = {0, 1, 2};  // the identity map is elementary
  TransformationData t = transformation_from_map(il, taut, taut, h);
  CHECK(t.report.passed());
  CHECK(t.epsilon_pullbacks.at("R") == std::vector<Rat>{rat(0), rat(1, 4), rat(1)});

  std::map<std::string, std::vector<uint32_t>> bad;
  bad["S_A"] = {1, 0, 2};  // swaps a and b: breaks both squares and R
  TransformationData t2 = transformation_from_map(il, taut, taut, bad);
  CHECK(!t2.report.passed());
}

TEST_CASE("separation warnings on an undersized suite") {
  // one-point structure: every morphism collapses
  auto sig = ts::m0_signature();
  FiniteStructure one;
  one.sig = sig;
  one.carriers["S"] = {"a"};
  one.relations["d"] = {rat(0)};
  one.relations["R"] = {rat(0)};
  one.functions["f"] = {0};
  one.functions["e"] = {0};
  one.validate();

  Theory th;
  th.signature = *sig;
  DefCategory cat = make_defcat(th, {one});
  Variable x{"x", "S"};
  size_t sobj = add_object(cat, "A", DefinablePredicate::single(
                                         parse_formula("d(x, x)", *sig), {x}));
  add_morphism(cat, "m1", sobj, sobj, parse_formula("d(f(x), x')", *sig));
  add_morphism(cat, "m2", sobj, sobj, parse_formula("d(x, x')", *sig));
  CHECK(cat.morphisms.size() == 1);  // identified: the suite cannot tell them apart

  Report rep = check_metric_logical_category(cat);
  bool warned = false;
  for (const auto& c : rep.checks)
    if (c.name == "separation")
      for (const auto& w : c.witnesses)
        if (w.find("identified") != std::string::npos) warned = true;
  CHECK(warned);
}
