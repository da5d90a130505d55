#pragma once

#include "cmtk/rational.hpp"

#include <json.hpp>

#include <algorithm>
#include <string>
#include <utility>
#include <vector>

namespace cmtk {

// Machine-readable check results. Witness lists are sorted before emission
// so identical inputs produce byte-identical reports.
struct CheckEntry {
  std::string name;
  std::string status;  // pass | fail | approximate | error
  std::string value;
  std::vector<std::string> witnesses;
};

struct Report {
  std::string command;
  std::string what;
  std::string status = "pass";
  std::string value;
  std::vector<CheckEntry> checks;
  std::vector<std::string> witnesses;
  std::vector<std::pair<std::string, std::string>> fields;
  bool approximate_rendering = false;

  static int severity(const std::string& s) {
    if (s == "error") return 3;
    if (s == "fail") return 2;
    if (s == "approximate") return 1;
    return 0;
  }

  void merge_status(const std::string& s) {
    if (severity(s) > severity(status)) status = s;
  }

  void add_check(CheckEntry e) {
    std::sort(e.witnesses.begin(), e.witnesses.end());
    merge_status(e.status);
    checks.push_back(std::move(e));
  }

  void add_check(const std::string& name, bool ok, std::string value = "",
                 std::vector<std::string> witnesses = {}) {
    add_check(CheckEntry{name, ok ? "pass" : "fail", std::move(value), std::move(witnesses)});
  }

  void add_field(const std::string& k, const std::string& v) { fields.emplace_back(k, v); }

  bool passed() const { return status == "pass"; }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["command"] = command;
    if (!what.empty()) j["what"] = what;
    j["status"] = status;
    if (!value.empty()) j["value"] = value;
    if (approximate_rendering) j["rendering"] = "approximate";
    for (const auto& [k, v] : fields) j[k] = v;
    if (!checks.empty()) {
      auto arr = nlohmann::ordered_json::array();
      for (const auto& c : checks) {
        nlohmann::ordered_json cj;
        cj["name"] = c.name;
        cj["status"] = c.status;
        if (!c.value.empty()) cj["value"] = c.value;
        if (!c.witnesses.empty()) cj["witnesses"] = c.witnesses;
        arr.push_back(std::move(cj));
      }
      j["checks"] = std::move(arr);
    }
    if (!witnesses.empty()) {
      auto ws = witnesses;
      std::sort(ws.begin(), ws.end());
      j["witnesses"] = ws;
    }
    return j;
  }

  // Exit contract: 0 iff pass; 2 reserved for parse/sort errors.
  int exit_code() const { return status == "pass" ? 0 : (status == "error" ? 2 : 1); }
};

}  // namespace cmtk
