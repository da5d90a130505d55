// cmtk: a workbench for continuous [0,1]-valued first-order logic over
// finite pseudo-metric structures. Reports are JSON on stdout, a short
// human summary goes to stderr; exit 0 iff the report status is "pass",
// 2 on parse or usage errors, 1 otherwise.

#include "cmtk/algebra.hpp"
#include "cmtk/defcat.hpp"
#include "cmtk/definability.hpp"
#include "cmtk/eqcons.hpp"
#include "cmtk/parse.hpp"
#include "cmtk/random_gen.hpp"
#include "cmtk/report.hpp"
#include "cmtk/semantics.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace cmtk;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw CmtkError("cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Inline text, or the contents of an existing file.
std::string text_or_file(const std::string& arg) {
  if (fs::exists(arg) && fs::is_regular_file(arg)) return slurp(arg);
  return arg;
}

uint32_t seed_from_env() {
  if (const char* s = std::getenv("CMTK_SEED")) {
    try {
      return static_cast<uint32_t>(std::stoul(s));
    } catch (...) {
      throw CmtkError("CMTK_SEED must be an unsigned integer");
    }
  }
  return 2718u;
}

std::map<std::string, std::string> parse_assignment(const std::string& s) {
  std::map<std::string, std::string> out;
  if (s.empty()) return out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    auto eq = item.find('=');
    if (eq == std::string::npos) throw CmtkError("bad assignment entry: " + item);
    out[item.substr(0, eq)] = item.substr(eq + 1);
  }
  return out;
}

std::vector<Variable> parse_context(const std::string& s, const Signature& sig) {
  std::vector<Variable> out;
  if (s.empty()) return out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    auto colon = item.find(':');
    if (colon == std::string::npos) throw CmtkError("bad context entry: " + item);
    auto trim = [](std::string t) {
      t.erase(0, t.find_first_not_of(" \t"));
      t.erase(t.find_last_not_of(" \t") + 1);
      return t;
    };
    Variable v{trim(item.substr(0, colon)), trim(item.substr(colon + 1))};
    if (!sig.has_sort(v.sort)) throw CmtkError("unknown sort " + v.sort + " in context");
    out.push_back(v);
  }
  return out;
}

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(item);
  return out;
}

// Bare relation names elaborate to atoms with fresh variables x1, x2, ...
Formula parse_formula_arg(const std::string& arg, const Signature& sig) {
  std::string text = text_or_file(arg);
  if (const RelationSymbol* r = sig.find_relation(text)) {
    if (!r->domain.empty()) {
      std::string elaborated = text + "(";
      for (size_t i = 0; i < r->domain.size(); ++i) {
        if (i) elaborated += ", ";
        elaborated += "x" + std::to_string(i + 1);
      }
      text = elaborated + ")";
    }
  }
  return parse_formula(text, sig);
}

int emit(Report rep, bool decimal_rendering, int decimals) {
  if (decimal_rendering) {
    rep.approximate_rendering = true;
    if (!rep.value.empty())
      if (auto q = rat_from_string(rep.value)) rep.value = rat_to_decimal(*q, decimals);
  }
  std::cout << rep.to_json().dump(2) << "\n";
  std::cerr << "cmtk " << rep.command << (rep.what.empty() ? "" : " " + rep.what) << ": "
            << rep.status << "\n";
  for (const auto& c : rep.checks)
    if (c.status != "pass") std::cerr << "  " << c.name << ": " << c.status << "\n";
  return rep.exit_code();
}

int emit_error(const std::string& command, const std::string& msg) {
  Report rep;
  rep.command = command;
  rep.status = "error";
  rep.witnesses.push_back(msg);
  std::cout << rep.to_json().dump(2) << "\n";
  std::cerr << "cmtk " << command << ": error: " << msg << "\n";
  return 2;
}

struct LoadedModel {
  std::shared_ptr<Signature> sig;
  Theory theory;  // empty axioms when only a signature was given
  std::vector<FiniteStructure> structures;
};

LoadedModel load_model(const std::string& sig_path, const std::vector<std::string>& structs) {
  LoadedModel m;
  std::string text = slurp(sig_path);
  bool is_theory = text.find("axiom") != std::string::npos;
  if (is_theory) {
    m.theory = parse_theory(text);
    m.sig = std::make_shared<Signature>(m.theory.signature);
  } else {
    m.sig = std::make_shared<Signature>(parse_signature(text));
    m.theory.signature = *m.sig;
  }
  for (const auto& s : structs)
    m.structures.push_back(load_structure_text(m.sig, slurp(s)));
  return m;
}

// ---------------------------------------------------------------------------
// category description files

struct CategoryFile {
  LoadedModel model;
  DefCategory cat;
  std::vector<AlgebraElement> elements;
};

CategoryFile load_category(const std::string& path) {
  fs::path base = fs::path(path).parent_path();
  Json j = Json::parse(slurp(path));
  CategoryFile out;
  std::vector<std::string> suite_paths;
  for (const auto& s : j.at("suite")) suite_paths.push_back((base / s.get<std::string>()).string());
  std::string sig_path = (base / j.at("signature").get<std::string>()).string();
  out.model = load_model(sig_path, suite_paths);
  out.cat = make_defcat(out.model.theory, out.model.structures);

  if (j.contains("objects"))
    for (const auto& o : j["objects"]) {
      std::vector<Variable> ctx =
          parse_context(o.at("context").get<std::string>(), *out.model.sig);
      Formula f = parse_formula(o.at("formula").get<std::string>(), *out.model.sig);
      add_object(out.cat, o.at("name").get<std::string>(),
                 DefinablePredicate::single(std::move(f), std::move(ctx)));
    }
  std::vector<std::string> identities;
  if (j.contains("identities"))
    identities = j["identities"].get<std::vector<std::string>>();
  else
    for (const auto& o : out.cat.objects) identities.push_back(o.name);
  for (const auto& name : identities) add_identity(out.cat, out.cat.object_index(name));

  std::map<std::string, ProductInfo> products;
  if (j.contains("products"))
    for (const auto& p : j["products"]) {
      size_t a = out.cat.object_index(p.at(0).get<std::string>());
      size_t b = out.cat.object_index(p.at(1).get<std::string>());
      ProductInfo info = add_product(out.cat, a, b);
      products[out.cat.objects[info.object].name] = info;
    }
  if (j.contains("morphisms"))
    for (const auto& m : j["morphisms"]) {
      size_t src = out.cat.object_index(m.at("source").get<std::string>());
      size_t dst = out.cat.object_index(m.at("target").get<std::string>());
      Formula graph = parse_formula(m.at("graph").get<std::string>(), *out.model.sig);
      add_morphism(out.cat, m.at("name").get<std::string>(), src, dst, graph);
    }
  if (j.contains("compositions"))
    for (const auto& c : j["compositions"]) {
      auto f = out.cat.morphism_index(c.at(0).get<std::string>());
      auto g = out.cat.morphism_index(c.at(1).get<std::string>());
      if (!f || !g) throw CmtkError("composition references an unknown morphism");
      compose_in(out.cat, *f, *g);
    }
  if (j.contains("elements"))
    for (const auto& e : j["elements"]) {
      size_t obj = out.cat.object_index(e.at("object").get<std::string>());
      Formula f = parse_formula(e.at("formula").get<std::string>(), *out.model.sig);
      out.elements.push_back(AlgebraElement{e.at("name").get<std::string>(), obj, std::move(f)});
    }
  return out;
}

// ---------------------------------------------------------------------------
// randomized law suites (CMTK_SEED fixes generation)

Report random_a7_suite(size_t count) {
  Report rep;
  rep.command = "check";
  rep.what = "a7";
  Rng rng(seed_from_env());
  size_t failures = 0;
  std::vector<std::string> bad;
  for (size_t i = 0; i < count; ++i) {
    auto sig = random_signature(rng);
    FiniteStructure M = random_structure(rng, sig);
    Variable x{"x", sig->sorts[rng.pick(sig->sorts.size())]};
    Variable y{"y", sig->sorts[rng.pick(sig->sorts.size())]};
    std::vector<Variable> ctx = {x, y};
    Formula psi = random_formula(rng, *sig, ctx, 4);
    Formula phi = random_formula(rng, *sig, ctx, 4);
    A7Result r = check_A7(M, psi, phi, {x});
    if (r.max_value != 0) {
      ++failures;
      if (bad.size() < 5)
        bad.push_back("instance " + std::to_string(i) + ": value " + rat_to_string(r.max_value));
    }
  }
  rep.add_check("a7 instances (" + std::to_string(count) + ")", failures == 0,
                failures == 0 ? "0" : std::to_string(failures) + " failures", bad);
  rep.add_field("seed", std::to_string(seed_from_env()));
  return rep;
}

Report random_adjunction_suite(size_t count) {
  Report rep;
  rep.command = "check";
  rep.what = "adjunction";
  Rng rng(seed_from_env());
  size_t failures = 0;
  std::vector<std::string> bad;
  for (size_t i = 0; i < count; ++i) {
    auto sig = random_signature(rng);
    FiniteStructure M = random_structure(rng, sig);
    Variable x{"x", sig->sorts[rng.pick(sig->sorts.size())]};
    Variable y{"y", sig->sorts[rng.pick(sig->sorts.size())]};
    std::vector<Variable> src = {x, y}, dst = {y};
    Projection pi = Projection::onto(src, dst);
    std::vector<Formula> gs, hs;
    for (int k = 0; k < 2; ++k) gs.push_back(random_formula(rng, *sig, src, 2));
    for (int k = 0; k < 2; ++k) hs.push_back(random_formula(rng, *sig, dst, 2));
    FormulaAlgebra G = build_algebra(M, src, gs);
    FormulaAlgebra H = build_algebra(M, dst, hs);
    close_under_basis(G, 20);
    close_under_basis(H, 20);
    for (const auto& g : G.elements)
      for (const auto& h : H.elements)
        if (!check_adjunction(M, pi, g, h).ok()) {
          ++failures;
          if (bad.size() < 5) bad.push_back("structure " + std::to_string(i));
        }
  }
  rep.add_check("adjunction pairs over " + std::to_string(count) + " structures", failures == 0,
                failures == 0 ? "0" : std::to_string(failures) + " failures", bad);
  rep.add_field("seed", std::to_string(seed_from_env()));
  return rep;
}

// ---------------------------------------------------------------------------
// subcommand bodies

int cmd_eval(const std::string& sig_path, const std::string& structure,
             const std::string& formula_arg, const std::string& assign, const std::string& tol_s,
             bool decimal, int decimals) {
  LoadedModel m = load_model(sig_path, {structure});
  Formula f = parse_formula_arg(formula_arg, *m.sig);
  Rat tol(0);
  if (!tol_s.empty()) {
    auto q = rat_from_string(tol_s);
    if (!q || *q < 0) throw CmtkError("bad tolerance: " + tol_s);
    tol = *q;
  }
  auto assignment = parse_assignment(assign);
  Value v = eval_at(m.structures[0], f, assignment);

  Report rep;
  rep.command = "eval";
  rep.value = v.is_exact ? rat_to_string(v.exact) : std::to_string(v.approx);
  bool ok;
  if (v.is_exact) {
    ok = v.exact <= tol;
  } else {
    ok = v.approx <= rat_to_double(tol) + v.error;
    rep.merge_status("approximate");
  }
  rep.add_field("formula", print_formula(f));
  rep.add_field("tolerance", rat_to_string(tol));
  if (!ok) rep.merge_status("fail");
  return emit(std::move(rep), decimal, decimals);
}

int cmd_check_metric(const LoadedModel& m, const std::string& symbol) {
  Report rep;
  rep.command = "check";
  rep.what = "metric";
  for (const auto& r : m.sig->relations) {
    if (!r.metric_for) continue;
    if (!symbol.empty() && r.name != symbol) continue;
    Report sub = check_pseudo_metric(m.structures[0], r.name);
    for (auto& c : sub.checks) {
      c.name = r.name + "." + c.name;
      rep.add_check(std::move(c));
    }
  }
  if (rep.checks.empty()) throw CmtkError("no metric symbols to check");
  return emit(std::move(rep), false, 0);
}

int cmd_check_modulus(const LoadedModel& m, const std::string& symbol) {
  Report rep;
  rep.command = "check";
  rep.what = "modulus";
  auto run = [&](const std::string& name) {
    Report sub = check_modulus(m.structures[0], name);
    rep.merge_status(sub.status);
    for (auto& c : sub.checks) {
      c.name = name + ": " + c.name;
      rep.add_check(std::move(c));
    }
  };
  if (!symbol.empty()) {
    run(symbol);
  } else {
    for (const auto& f : m.sig->functions)
      if (f.modulus) run(f.name);
    for (const auto& r : m.sig->relations)
      if (r.modulus) run(r.name);
  }
  if (rep.checks.empty()) throw CmtkError("no declared moduli to check");
  return emit(std::move(rep), false, 0);
}

int cmd_check_definable(const LoadedModel& m, const std::string& formula_arg,
                        const std::string& context) {
  // either a serialized predicate (JSON with a "formulas" list) or a formula
  DefinablePredicate p;
  std::string text = text_or_file(formula_arg);
  bool is_predicate = false;
  if (!text.empty() && text.find('{') != std::string::npos) {
    Json j = Json::parse(text, nullptr, false);
    if (!j.is_discarded() && j.contains("formulas")) {
      p = predicate_from_json(*m.sig, j);
      is_predicate = true;
    }
  }
  if (!is_predicate) {
    Formula f = parse_formula_arg(formula_arg, *m.sig);
    std::vector<Variable> ctx =
        context.empty() ? free_variables(f) : parse_context(context, *m.sig);
    p = DefinablePredicate::single(std::move(f), std::move(ctx));
  }
  std::vector<const FiniteStructure*> suite;
  for (const auto& s : m.structures) suite.push_back(&s);
  DefinabilityCheck res = check_syntactic_definability(suite, p);
  return emit(std::move(res.report), false, 0);
}

int cmd_check_a7(const LoadedModel* m, const std::string& psi_s, const std::string& phi_s,
                 const std::string& over, size_t count) {
  if (psi_s.empty() && phi_s.empty()) return emit(random_a7_suite(count), false, 0);
  if (!m) throw CmtkError("--sig and --structure are required for explicit a7 checks");
  Formula psi = parse_formula_arg(psi_s, *m->sig);
  Formula phi = parse_formula_arg(phi_s, *m->sig);
  std::vector<Variable> xs = parse_context(over, *m->sig);
  if (xs.empty()) throw CmtkError("--over must name the quantified variables, e.g. x:S");
  A7Result r = check_A7(m->structures[0], psi, phi, xs);
  Report rep;
  rep.command = "check";
  rep.what = "a7";
  rep.value = rat_to_string(r.max_value);
  rep.add_field("instance", print_formula(r.instance));
  rep.add_check("a7", r.max_value == 0, rat_to_string(r.max_value));
  return emit(std::move(rep), false, 0);
}

int cmd_check_adjunction(const LoadedModel* m, const std::string& g_s, const std::string& h_s,
                         const std::string& context, const std::string& onto, size_t count) {
  if (g_s.empty() && h_s.empty()) return emit(random_adjunction_suite(count), false, 0);
  if (!m) throw CmtkError("--sig and --structure are required for explicit adjunction checks");
  std::vector<Variable> src = parse_context(context, *m->sig);
  std::vector<std::string> onto_names = split_commas(onto);
  std::vector<Variable> dst;
  for (const auto& v : src)
    if (std::find(onto_names.begin(), onto_names.end(), v.name) != onto_names.end())
      dst.push_back(v);
  Projection pi = Projection::onto(src, dst);
  const FiniteStructure& M = m->structures[0];
  std::vector<Rat> g = eval_table(M, parse_formula_arg(g_s, *m->sig), src);
  std::vector<Rat> h = eval_table(M, parse_formula_arg(h_s, *m->sig), dst);
  AdjunctionResult r = check_adjunction(M, pi, g, h);
  Report rep;
  rep.command = "check";
  rep.what = "adjunction";
  rep.add_check("forall biconditional", r.forall_side);
  rep.add_check("exists biconditional", r.exists_side);
  rep.add_check("exists duality", r.duality);
  return emit(std::move(rep), false, 0);
}

int cmd_check_category(const std::string& catfile) {
  CategoryFile cf = load_category(catfile);
  Report rep;
  rep.command = "check";
  rep.what = "category";
  for (auto& c : cf.cat.build_report.checks) rep.add_check(std::move(c));
  Report laws = check_category_laws(cf.cat);
  for (auto& c : laws.checks) rep.add_check(std::move(c));
  Report mlc = check_metric_logical_category(cf.cat);
  for (auto& c : mlc.checks) rep.add_check(std::move(c));
  return emit(std::move(rep), false, 0);
}

int cmd_check_conservative(const std::string& sig_path, const std::string& structure,
                           const std::string& eqspec) {
  LoadedModel m = load_model(sig_path, {structure});
  EqSpecFile file = parse_eqspec(slurp(eqspec), *m.sig);
  EqRunResult run = run_eqspec(m.structures[0], file);

  Report rep;
  rep.command = "check";
  rep.what = "conservative";
  std::vector<Formula> sentences;
  for (const auto& ax : m.theory.axioms) sentences.push_back(ax.sentence);
  for (size_t i = 0; i < sentences.size(); ++i) {
    Value before = satisfies(m.structures[0], sentences[i]).value;
    Value after = satisfies(run.structure, sentences[i]).value;
    bool ok = before.is_exact && after.is_exact && before.exact == after.exact;
    rep.add_check("axiom " + std::to_string(i), ok,
                  before.str() + (ok ? "" : " -> " + after.str()));
  }
  for (auto& c : run.report.checks) rep.add_check(std::move(c));
  return emit(std::move(rep), false, 0);
}

int cmd_check_stable(const std::string& sig_path, const std::string& structure,
                     const std::string& phi_s, const std::string& psi_s, const std::string& xctx,
                     const std::string& yctx, const std::string& zctx, const std::string& eps_s,
                     const std::string& base) {
  LoadedModel m = load_model(sig_path, {structure});
  auto eps = rat_from_string(eps_s);
  if (!eps) throw CmtkError("bad epsilon: " + eps_s);
  std::vector<Variable> xs = parse_context(xctx, *m.sig);
  std::vector<Variable> ys = parse_context(yctx, *m.sig);
  std::vector<Variable> zs = parse_context(zctx, *m.sig);
  std::vector<std::string> base_sorts = base.empty() ? m.sig->sorts : split_commas(base);
  Formula phi = parse_formula_arg(phi_s, *m.sig);
  Formula psi = parse_formula_arg(psi_s, *m.sig);
  Report rep =
      check_stably_embedded(m.structures[0], base_sorts, *eps, phi, xs, ys, psi, zs);
  return emit(std::move(rep), false, 0);
}

int cmd_eq(const std::string& sig_path, const std::string& structure, const std::string& spec,
           const std::string& out_dir) {
  LoadedModel m = load_model(sig_path, {structure});
  EqSpecFile file = parse_eqspec(slurp(spec), *m.sig);
  EqRunResult run = run_eqspec(m.structures[0], file);

  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    std::ofstream sig_out(fs::path(out_dir) / "signature.cms");
    sig_out << print_signature(*run.structure.sig);
    std::ofstream st_out(fs::path(out_dir) / "structure.json");
    st_out << save_structure(run.structure).dump(2) << "\n";
    std::ofstream ax_out(fs::path(out_dir) / "axioms.cmt");
    ax_out << print_signature(*run.structure.sig);
    for (const auto& ax : run.axioms)
      ax_out << "axiom " << ax.label << " : " << print_formula(ax.sentence) << ";\n";
    run.report.add_field("out", out_dir);
  }
  for (const auto& s : run.new_sorts) run.report.add_field("sort", s);
  return emit(std::move(run.report), false, 0);
}

int cmd_defcat(const std::string& catfile, const std::string& out_dir) {
  CategoryFile cf = load_category(catfile);
  Report rep;
  rep.command = "defcat";
  for (auto& c : cf.cat.build_report.checks) rep.add_check(std::move(c));
  Report laws = check_category_laws(cf.cat);
  for (auto& c : laws.checks) rep.add_check(std::move(c));
  Report mlc = check_metric_logical_category(cf.cat);
  for (auto& c : mlc.checks) rep.add_check(std::move(c));

  InternalLanguage il = internal_language(cf.cat, cf.elements);
  for (size_t mi = 0; mi < cf.cat.suite.size(); ++mi) {
    FiniteStructure taut = tautological_model(il, mi);
    Report frag = validate_fragment_model(il, taut);
    rep.add_check("tautological model " + std::to_string(mi) + " satisfies the fragment",
                  frag.passed());
    FunctorData F = model_to_functor(il, taut);
    FiniteStructure back = functor_to_model(il, F);
    bool roundtrip = back.carriers == taut.carriers && back.relations == taut.relations &&
                     back.functions == taut.functions;
    rep.add_check("model/functor round trip " + std::to_string(mi), roundtrip);
    if (!out_dir.empty()) {
      fs::create_directories(out_dir);
      std::ofstream st(fs::path(out_dir) / ("tautological_" + std::to_string(mi) + ".json"));
      st << save_structure(taut).dump(2) << "\n";
    }
  }
  if (!out_dir.empty()) {
    std::ofstream th(fs::path(out_dir) / "fragment.cmt");
    th << print_theory(il.fragment);
    rep.add_field("out", out_dir);
  }
  return emit(std::move(rep), false, 0);
}

int cmd_parse(const std::string& sig_path, const std::string& formula_arg,
              const std::string& theory_path, const std::string& structure_path,
              const std::string& eqspec_path, bool roundtrip) {
  Report rep;
  rep.command = "parse";
  if (!theory_path.empty()) {
    Theory th = parse_theory(slurp(theory_path));
    std::string printed = print_theory(th);
    if (roundtrip) {
      Theory again = parse_theory(printed);
      rep.add_check("theory roundtrip", print_theory(again) == printed);
    }
    rep.add_field("normal", printed);
  } else if (!structure_path.empty()) {
    LoadedModel m = load_model(sig_path, {structure_path});
    Json j = save_structure(m.structures[0]);
    if (roundtrip) {
      FiniteStructure again = load_structure(m.sig, j);
      rep.add_check("structure roundtrip", save_structure(again) == j);
    }
    rep.add_field("normal", j.dump(2));
  } else if (!eqspec_path.empty()) {
    LoadedModel m = load_model(sig_path, {});
    EqSpecFile f = parse_eqspec(slurp(eqspec_path), *m.sig);
    rep.add_field("eqsorts", std::to_string(f.sorts.size()));
  } else if (!formula_arg.empty()) {
    LoadedModel m = load_model(sig_path, {});
    Formula f = parse_formula_arg(formula_arg, *m.sig);
    std::string printed = print_formula(f);
    if (roundtrip) {
      Formula again = parse_formula(printed, *m.sig);
      rep.add_check("formula roundtrip", again == f && print_formula(again) == printed);
    }
    rep.add_field("normal", printed);
  } else {
    LoadedModel m = load_model(sig_path, {});
    std::string printed = print_signature(*m.sig);
    if (roundtrip) {
      Signature again = parse_signature(printed);
      rep.add_check("signature roundtrip", print_signature(again) == printed);
    }
    rep.add_field("normal", printed);
  }
  return emit(std::move(rep), false, 0);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"continuous-logic workbench over finite pseudo-metric structures"};
  app.require_subcommand(1);

  std::string sig_path, structure, formula, assign, tol, psi, phi, over, g_s, h_s, context, onto;
  std::string what, symbol, catfile, eqspec, out_dir, theory_path, eqspec_path, structure_path;
  std::string xctx, yctx, zctx, eps, base;
  std::vector<std::string> structures;
  bool decimal_flag = false, roundtrip = false;
  int decimals = 6;
  size_t count = 100;

  auto* eval_cmd = app.add_subcommand("eval", "evaluate a formula exactly");
  eval_cmd->add_option("--sig", sig_path, "signature or theory file")->required();
  eval_cmd->add_option("--structure", structure, "structure JSON")->required();
  eval_cmd->add_option("--formula", formula, "formula text or file")->required();
  eval_cmd->add_option("--assign", assign, "assignment x=a,y=b for free variables");
  eval_cmd->add_option("--tol", tol, "satisfaction tolerance (default 0)");
  eval_cmd->add_flag("--decimal", decimal_flag, "render values as decimals");
  eval_cmd->add_option("--digits", decimals, "digits for --decimal (default 6)");

  auto* check_cmd = app.add_subcommand("check", "run a verification");
  check_cmd
      ->add_option("--what", what,
                   "metric|modulus|definable|adjunction|a7|category|conservative|stable-embedded")
      ->required();
  check_cmd->add_option("--sig", sig_path, "signature or theory file");
  check_cmd->add_option("--structure", structures, "structure JSON (repeatable)");
  check_cmd->add_option("--symbol", symbol, "symbol to check (metric/modulus)");
  check_cmd->add_option("--formula", formula, "formula (definable)");
  check_cmd->add_option("--context", context, "context x:S,y:T");
  check_cmd->add_option("--psi", psi, "psi formula (a7, stable-embedded)");
  check_cmd->add_option("--phi", phi, "phi formula (a7, stable-embedded)");
  check_cmd->add_option("--over", over, "quantified variables (a7), e.g. x:S");
  check_cmd->add_option("--g", g_s, "g formula (adjunction)");
  check_cmd->add_option("--h-formula", h_s, "h formula (adjunction)");
  check_cmd->add_option("--onto", onto, "target variables of the projection (adjunction)");
  check_cmd->add_option("--count", count, "random suite size (a7/adjunction without formulas)");
  check_cmd->add_option("--catfile", catfile, "category description (category)");
  check_cmd->add_option("--eqspec", eqspec, "eqsort spec file (conservative)");
  check_cmd->add_option("--x", xctx, "x context (stable-embedded)");
  check_cmd->add_option("--y", yctx, "y context (stable-embedded)");
  check_cmd->add_option("--z", zctx, "z context (stable-embedded)");
  check_cmd->add_option("--eps", eps, "tolerance (stable-embedded)");
  check_cmd->add_option("--base", base, "base sorts, comma separated (stable-embedded)");

  auto* eq_cmd = app.add_subcommand("eq", "build eq-sort expansions");
  eq_cmd->add_option("--sig", sig_path, "signature or theory file")->required();
  eq_cmd->add_option("--structure", structure, "structure JSON")->required();
  eq_cmd->add_option("--spec", eqspec, "eqsort spec file")->required();
  eq_cmd->add_option("--out", out_dir, "output directory for the expansion");

  auto* defcat_cmd = app.add_subcommand("defcat", "build and check a definable-set category");
  defcat_cmd->add_option("--catfile", catfile, "category description file")->required();
  defcat_cmd->add_option("--out", out_dir, "output directory for the internal language");

  auto* parse_cmd = app.add_subcommand("parse", "parse and reprint");
  parse_cmd->add_option("--sig", sig_path, "signature file");
  parse_cmd->add_option("--formula", formula, "formula text or file");
  parse_cmd->add_option("--theory", theory_path, "theory file");
  parse_cmd->add_option("--structure", structure_path, "structure JSON (needs --sig)");
  parse_cmd->add_option("--eqspec", eqspec_path, "eqsort spec file (needs --sig)");
  parse_cmd->add_flag("--roundtrip", roundtrip, "verify parse(print(v)) stability");

  CLI11_PARSE(app, argc, argv);

  try {
    if (eval_cmd->parsed())
      return cmd_eval(sig_path, structure, formula, assign, tol, decimal_flag, decimals);
    if (check_cmd->parsed()) {
      std::optional<LoadedModel> m;
      if (!sig_path.empty()) m = load_model(sig_path, structures);
      if (what == "metric") {
        if (!m || m->structures.empty()) throw CmtkError("--sig and --structure required");
        return cmd_check_metric(*m, symbol);
      }
      if (what == "modulus") {
        if (!m || m->structures.empty()) throw CmtkError("--sig and --structure required");
        return cmd_check_modulus(*m, symbol);
      }
      if (what == "definable") {
        if (!m || m->structures.empty()) throw CmtkError("--sig and --structure required");
        return cmd_check_definable(*m, formula, context);
      }
      if (what == "a7") return cmd_check_a7(m ? &*m : nullptr, psi, phi, over, count);
      if (what == "adjunction")
        return cmd_check_adjunction(m ? &*m : nullptr, g_s, h_s, context, onto, count);
      if (what == "category") return cmd_check_category(catfile);
      if (what == "conservative") {
        if (structures.empty()) throw CmtkError("--structure required");
        return cmd_check_conservative(sig_path, structures[0], eqspec);
      }
      if (what == "stable-embedded") {
        if (structures.empty()) throw CmtkError("--structure required");
        return cmd_check_stable(sig_path, structures[0], phi, psi, xctx, yctx, zctx, eps, base);
      }
      throw CmtkError("unknown check: " + what);
    }
    if (eq_cmd->parsed()) return cmd_eq(sig_path, structure, eqspec, out_dir);
    if (defcat_cmd->parsed()) return cmd_defcat(catfile, out_dir);
    if (parse_cmd->parsed())
      return cmd_parse(sig_path, formula, theory_path, structure_path, eqspec_path, roundtrip);
  } catch (const PrerequisiteError& e) {
    Report rep = e.report;
    rep.status = "error";
    rep.witnesses.push_back(e.what());
    std::cout << rep.to_json().dump(2) << "\n";
    std::cerr << "cmtk: prerequisite failed: " << e.what() << "\n";
    return 2;
  } catch (const ParseError& e) {
    return emit_error("parse", e.what());
  } catch (const CmtkError& e) {
    return emit_error(app.get_subcommands().empty() ? "cmtk"
                                                    : app.get_subcommands()[0]->get_name(),
                      e.what());
  } catch (const Json::exception& e) {
    return emit_error("cmtk", std::string("json: ") + e.what());
  }
  return 2;
}
