#pragma once

#include "cmtk/syntax.hpp"

#include <json.hpp>

#include <cstdint>
#include <map>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <vector>

namespace cmtk {

using Json = nlohmann::ordered_json;

// Mixed-radix index space for argument tuples; first coordinate is most
// significant, so enumeration order is lexicographic in the carriers.
struct TupleSpace {
  std::vector<size_t> radices;

  size_t size() const {
    size_t n = 1;
    for (size_t r : radices) n *= r;
    return n;
  }
  size_t encode(std::span<const size_t> tuple) const {
    size_t idx = 0;
    for (size_t i = 0; i < radices.size(); ++i) idx = idx * radices[i] + tuple[i];
    return idx;
  }
  std::vector<size_t> decode(size_t flat) const {
    std::vector<size_t> tuple(radices.size());
    for (size_t i = radices.size(); i-- > 0;) {
      tuple[i] = flat % radices[i];
      flat /= radices[i];
    }
    return tuple;
  }
  // Odometer step in encode order; returns false after the last tuple.
  bool next(std::vector<size_t>& tuple) const {
    for (size_t i = radices.size(); i-- > 0;) {
      if (++tuple[i] < radices[i]) return true;
      tuple[i] = 0;
    }
    return false;
  }
};

// A finite structure: named carriers, total rational relation tables and
// function tables. Immutable once validated; evaluation never mutates.
struct FiniteStructure {
  std::shared_ptr<const Signature> sig;
  std::map<std::string, std::vector<std::string>> carriers;
  std::map<std::string, std::vector<uint32_t>> functions;  // flat tables of element indices
  std::map<std::string, std::vector<Rat>> relations;       // flat tables of values
  std::map<std::string, TupleSpace> symbol_spaces;         // filled by validate()

  const std::vector<std::string>& carrier(const std::string& sort) const {
    auto it = carriers.find(sort);
    if (it == carriers.end()) throw CmtkError("no carrier for sort " + sort);
    return it->second;
  }

  size_t elem_index(const std::string& sort, const std::string& name) const {
    const auto& c = carrier(sort);
    for (size_t i = 0; i < c.size(); ++i)
      if (c[i] == name) return i;
    throw CmtkError("element " + name + " not in carrier of sort " + sort);
  }

  TupleSpace space(std::span<const std::string> sorts) const {
    TupleSpace s;
    for (const auto& sort : sorts) s.radices.push_back(carrier(sort).size());
    return s;
  }

  const Rat& rel_value(const std::string& rel, std::span<const size_t> args) const {
    auto it = relations.find(rel);
    if (it == relations.end()) throw CmtkError("no table for relation " + rel);
    auto sp = symbol_spaces.find(rel);
    if (sp != symbol_spaces.end()) return it->second[sp->second.encode(args)];
    const RelationSymbol* r = sig->find_relation(rel);
    if (!r) throw CmtkError("unknown relation symbol: " + rel);
    return it->second[space(r->domain).encode(args)];
  }

  size_t fn_value(const std::string& fn, std::span<const size_t> args) const {
    auto it = functions.find(fn);
    if (it == functions.end()) throw CmtkError("no table for function " + fn);
    auto sp = symbol_spaces.find(fn);
    if (sp != symbol_spaces.end()) return it->second[sp->second.encode(args)];
    const FunctionSymbol* f = sig->find_function(fn);
    if (!f) throw CmtkError("unknown function symbol: " + fn);
    return it->second[space(f->domain).encode(args)];
  }

  // Metric value between two elements of a sort, via its designated metric.
  const Rat& metric(const std::string& sort, size_t i, size_t j) const {
    auto d = sig->metric_of(sort);
    if (!d) throw CmtkError("sort " + sort + " has no designated metric");
    size_t args[2] = {i, j};
    return rel_value(*d, args);
  }

  std::string tuple_name(std::span<const std::string> sorts, std::span<const size_t> tuple) const {
    if (sorts.size() == 1) return carrier(sorts[0])[tuple[0]];
    std::string s = "(";
    for (size_t i = 0; i < sorts.size(); ++i) {
      if (i) s += ",";
      s += carrier(sorts[i])[tuple[i]];
    }
    return s + ")";
  }

  void validate() {
    if (!sig) throw CmtkError("structure has no signature");
    sig->validate();
    symbol_spaces.clear();
    for (const auto& f : sig->functions) symbol_spaces.emplace(f.name, space(f.domain));
    for (const auto& r : sig->relations) symbol_spaces.emplace(r.name, space(r.domain));
    for (const auto& s : sig->sorts) {
      const auto& c = carrier(s);
      if (c.empty()) throw CmtkError("carrier of sort " + s + " is empty");
      std::set<std::string> seen;
      for (const auto& e : c)
        if (!seen.insert(e).second) throw CmtkError("duplicate element " + e + " in sort " + s);
    }
    for (const auto& f : sig->functions) {
      auto it = functions.find(f.name);
      if (it == functions.end()) throw CmtkError("missing table for function " + f.name);
      TupleSpace sp = space(f.domain);
      if (it->second.size() != sp.size())
        throw CmtkError("table gap: function " + f.name + " has " +
                        std::to_string(it->second.size()) + " entries, expected " +
                        std::to_string(sp.size()));
      size_t codSize = carrier(f.codomain).size();
      for (uint32_t v : it->second)
        if (v >= codSize) throw CmtkError("function " + f.name + " maps outside its codomain");
    }
    for (const auto& r : sig->relations) {
      auto it = relations.find(r.name);
      if (it == relations.end()) throw CmtkError("missing table for relation " + r.name);
      TupleSpace sp = space(r.domain);
      if (it->second.size() != sp.size())
        throw CmtkError("table gap: relation " + r.name + " has " +
                        std::to_string(it->second.size()) + " entries, expected " +
                        std::to_string(sp.size()));
      for (const Rat& v : it->second)
        if (!in_unit_interval(v))
          throw CmtkError("relation " + r.name + " has value " + rat_to_string(v) +
                          " outside [0,1]");
    }
  }
};

// Convenience builders used by tests and the eq constructors.
inline void set_relation_by(FiniteStructure& M, const std::string& rel,
                            const std::function<Rat(std::span<const size_t>)>& fn) {
  const RelationSymbol* r = M.sig->find_relation(rel);
  if (!r) throw CmtkError("unknown relation symbol: " + rel);
  TupleSpace sp = M.space(r->domain);
  std::vector<Rat> table(sp.size());
  for (size_t i = 0; i < sp.size(); ++i) {
    auto t = sp.decode(i);
    table[i] = fn(t);
  }
  M.relations[rel] = std::move(table);
}

inline void set_function_by(FiniteStructure& M, const std::string& fn_name,
                            const std::function<size_t(std::span<const size_t>)>& fn) {
  const FunctionSymbol* f = M.sig->find_function(fn_name);
  if (!f) throw CmtkError("unknown function symbol: " + fn_name);
  TupleSpace sp = M.space(f->domain);
  std::vector<uint32_t> table(sp.size());
  for (size_t i = 0; i < sp.size(); ++i) {
    auto t = sp.decode(i);
    table[i] = static_cast<uint32_t>(fn(t));
  }
  M.functions[fn_name] = std::move(table);
}

// ---------------------------------------------------------------------------
// JSON input/output. Rationals travel as strings ("1/2", "0.25") or numbers.

namespace detail {
inline Rat json_rat(const Json& j, const std::string& where) {
  if (j.is_string()) {
    auto q = rat_from_string(j.get<std::string>());
    if (!q) throw CmtkError("bad rational \"" + j.get<std::string>() + "\" in " + where);
    return *q;
  }
  if (j.is_number_integer()) return Rat(j.get<long>());
  if (j.is_number_float()) {
    // Decimal floats in JSON are accepted but converted through their
    // printed form to keep parsing exact for terminating decimals.
    auto q = rat_from_string(Json(j).dump());
    if (!q) throw CmtkError("bad numeric value in " + where);
    return *q;
  }
  throw CmtkError("expected rational value in " + where);
}
}  // namespace detail

inline FiniteStructure load_structure(std::shared_ptr<const Signature> sig, const Json& j) {
  FiniteStructure M;
  M.sig = std::move(sig);
  if (!j.contains("sorts")) throw CmtkError("structure JSON lacks \"sorts\"");
  for (const auto& s : M.sig->sorts) {
    if (!j["sorts"].contains(s)) throw CmtkError("structure JSON lacks carrier for sort " + s);
    M.carriers[s] = j["sorts"][s].get<std::vector<std::string>>();
  }

  auto rel_entry = [&](const RelationSymbol& r, const Json& rows) {
    TupleSpace sp = M.space(r.domain);
    std::vector<Rat> table(sp.size());
    std::vector<bool> seen(sp.size(), false);
    bool is_metric = r.metric_for.has_value();
    if (is_metric) {
      // metrics autofill the diagonal and the symmetric half
      size_t n = M.carrier(*r.metric_for).size();
      for (size_t i = 0; i < n; ++i) {
        size_t args[2] = {i, i};
        table[sp.encode(args)] = Rat(0);
        seen[sp.encode(args)] = true;
      }
    }
    for (const auto& row : rows) {
      if (!row.is_array() || row.size() != r.domain.size() + 1)
        throw CmtkError("bad row in table of " + r.name);
      std::vector<size_t> idx;
      for (size_t i = 0; i < r.domain.size(); ++i)
        idx.push_back(M.elem_index(r.domain[i], row[i].get<std::string>()));
      Rat v = detail::json_rat(row[r.domain.size()], "relation " + r.name);
      size_t flat = sp.encode(idx);
      if (seen[flat] && table[flat] != v)
        throw CmtkError("conflicting entries for " + r.name);
      table[flat] = v;
      seen[flat] = true;
      if (is_metric) {
        size_t mirror[2] = {idx[1], idx[0]};
        size_t mflat = sp.encode(mirror);
        if (seen[mflat] && table[mflat] != v)
          throw CmtkError("asymmetric entries for metric " + r.name);
        table[mflat] = v;
        seen[mflat] = true;
      }
    }
    for (size_t i = 0; i < sp.size(); ++i)
      if (!seen[i]) {
        auto t = sp.decode(i);
        throw CmtkError("table gap: " + r.name + " missing entry at " +
                        M.tuple_name(r.domain, t));
      }
    M.relations[r.name] = std::move(table);
  };

  for (const auto& r : M.sig->relations) {
    const char* section = r.metric_for ? "metrics" : "relations";
    if (!j.contains(section) || !j[section].contains(r.name))
      throw CmtkError("structure JSON lacks table for " + std::string(section) + " entry " +
                      r.name);
    rel_entry(r, j[section][r.name]);
  }

  for (const auto& f : M.sig->functions) {
    if (!j.contains("functions") || !j["functions"].contains(f.name))
      throw CmtkError("structure JSON lacks table for function " + f.name);
    const Json& body = j["functions"][f.name];
    TupleSpace sp = M.space(f.domain);
    std::vector<uint32_t> table(sp.size(), 0);
    std::vector<bool> seen(sp.size(), false);
    if (f.domain.empty()) {
      if (!body.is_string()) throw CmtkError("constant " + f.name + " must map to an element");
      table[0] = static_cast<uint32_t>(M.elem_index(f.codomain, body.get<std::string>()));
      seen[0] = true;
    } else if (body.is_object()) {
      if (f.domain.size() != 1)
        throw CmtkError("object form for function " + f.name + " needs arity 1");
      for (auto it = body.begin(); it != body.end(); ++it) {
        size_t a = M.elem_index(f.domain[0], it.key());
        table[a] = static_cast<uint32_t>(M.elem_index(f.codomain, it.value().get<std::string>()));
        seen[a] = true;
      }
    } else {
      for (const auto& row : body) {
        if (!row.is_array() || row.size() != f.domain.size() + 1)
          throw CmtkError("bad row in table of " + f.name);
        std::vector<size_t> idx;
        for (size_t i = 0; i < f.domain.size(); ++i)
          idx.push_back(M.elem_index(f.domain[i], row[i].get<std::string>()));
        table[sp.encode(idx)] = static_cast<uint32_t>(
            M.elem_index(f.codomain, row[f.domain.size()].get<std::string>()));
        seen[sp.encode(idx)] = true;
      }
    }
    for (size_t i = 0; i < sp.size(); ++i)
      if (!seen[i]) {
        auto t = sp.decode(i);
        throw CmtkError("table gap: " + f.name + " missing entry at " +
                        M.tuple_name(f.domain, t));
      }
    M.functions[f.name] = std::move(table);
  }

  M.validate();
  return M;
}

inline FiniteStructure load_structure_text(std::shared_ptr<const Signature> sig,
                                           const std::string& text) {
  return load_structure(std::move(sig), Json::parse(text));
}

inline Json save_structure(const FiniteStructure& M) {
  Json j;
  j["sorts"] = Json::object();
  for (const auto& s : M.sig->sorts) j["sorts"][s] = M.carrier(s);
  Json metrics = Json::object(), relations = Json::object();
  for (const auto& r : M.sig->relations) {
    Json rows = Json::array();
    TupleSpace sp = M.space(r.domain);
    const auto& table = M.relations.at(r.name);
    for (size_t flat = 0; flat < sp.size(); ++flat) {
      auto t = sp.decode(flat);
      if (r.metric_for && t[0] >= t[1]) continue;  // upper triangle only
      Json row = Json::array();
      for (size_t i = 0; i < t.size(); ++i) row.push_back(M.carrier(r.domain[i])[t[i]]);
      row.push_back(rat_to_string(table[flat]));
      rows.push_back(std::move(row));
    }
    (r.metric_for ? metrics : relations)[r.name] = std::move(rows);
  }
  j["metrics"] = std::move(metrics);
  j["relations"] = std::move(relations);
  Json functions = Json::object();
  for (const auto& f : M.sig->functions) {
    const auto& table = M.functions.at(f.name);
    if (f.domain.empty()) {
      functions[f.name] = M.carrier(f.codomain)[table[0]];
    } else if (f.domain.size() == 1) {
      Json obj = Json::object();
      const auto& dom = M.carrier(f.domain[0]);
      for (size_t i = 0; i < dom.size(); ++i)
        obj[dom[i]] = M.carrier(f.codomain)[table[i]];
      functions[f.name] = std::move(obj);
    } else {
      Json rows = Json::array();
      TupleSpace sp = M.space(f.domain);
      for (size_t flat = 0; flat < sp.size(); ++flat) {
        auto t = sp.decode(flat);
        Json row = Json::array();
        for (size_t i = 0; i < t.size(); ++i) row.push_back(M.carrier(f.domain[i])[t[i]]);
        row.push_back(M.carrier(f.codomain)[table[flat]]);
        rows.push_back(std::move(row));
      }
      functions[f.name] = std::move(rows);
    }
  }
  j["functions"] = std::move(functions);
  return j;
}

}  // namespace cmtk
