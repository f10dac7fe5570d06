#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "herdcast/core/error.hpp"

namespace herdcast::forecast {

// Validation failure carrying one message per offending field.
class ScenarioError : public ValidationError {
 public:
  explicit ScenarioError(std::vector<std::string> diagnostics)
      : ValidationError("invalid scenario: " + join(diagnostics)), diagnostics_(std::move(diagnostics)) {}
  const std::vector<std::string>& diagnostics() const { return diagnostics_; }

 private:
  static std::string join(const std::vector<std::string>& d) {
    std::string s;
    for (std::size_t i = 0; i < d.size(); ++i) s += (i ? "; " : "") + d[i];
    return s;
  }
  std::vector<std::string> diagnostics_;
};

struct ScenarioSpec {
  std::string name = "baseline";
  std::map<std::string, std::map<std::string, double>> deltas;  // county -> feature -> delta
  int horizon_start = 2026;
  int horizon_end = 2030;

  bool is_identity() const {
    for (const auto& [c, f] : deltas)
      for (const auto& [k, d] : f)
        if (d != 0.0) return false;
    return true;
  }

  ScenarioSpec zeroed() const {
    ScenarioSpec s = *this;
    for (auto& [c, f] : s.deltas)
      for (auto& [k, d] : f) d = 0.0;
    return s;
  }
};

// Structural parse; names are checked later against the artifact.
inline ScenarioSpec parse_scenario(const nlohmann::json& j) {
  std::vector<std::string> diag;
  ScenarioSpec s;
  if (!j.is_object()) throw ScenarioError({"body: expected a JSON object"});
  if (j.contains("name")) {
    if (j["name"].is_string())
      s.name = j["name"].get<std::string>();
    else
      diag.push_back("name: expected a string");
  }
  if (!j.contains("counties")) {
    diag.push_back("counties: required field missing");
  } else if (!j["counties"].is_object()) {
    diag.push_back("counties: expected an object of county -> {feature: delta}");
  } else {
    for (const auto& [county, feats] : j["counties"].items()) {
      if (!feats.is_object()) {
        diag.push_back("counties." + county + ": expected an object of feature -> delta");
        continue;
      }
      auto& dst = s.deltas[county];
      for (const auto& [feature, value] : feats.items()) {
        const std::string field = "counties." + county + "." + feature;
        if (!value.is_number()) {
          diag.push_back(field + ": expected a number");
          continue;
        }
        const double d = value.get<double>();
        if (!std::isfinite(d) || d <= -1.0) {
          diag.push_back(field + ": delta must be finite and greater than -1");
          continue;
        }
        dst[feature] = d;
      }
    }
  }
  if (j.contains("horizon")) {
    const auto& h = j["horizon"];
    if (!h.is_array() || h.size() != 2 || !h[0].is_number_integer() || !h[1].is_number_integer()) {
      diag.push_back("horizon: expected [first_year, last_year]");
    } else {
      s.horizon_start = h[0].get<int>();
      s.horizon_end = h[1].get<int>();
      if (s.horizon_end < s.horizon_start) diag.push_back("horizon: last year precedes first year");
    }
  }
  if (!diag.empty()) throw ScenarioError(diag);
  return s;
}

inline ScenarioSpec parse_scenario_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ScenarioError({std::string("body: malformed JSON (") + e.what() + ")"});
  }
  return parse_scenario(j);
}

inline ScenarioSpec load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open scenario file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario_text(ss.str());
}

inline nlohmann::json to_json(const ScenarioSpec& s) {
  nlohmann::json counties = nlohmann::json::object();
  for (const auto& [c, f] : s.deltas) {
    nlohmann::json fj = nlohmann::json::object();
    for (const auto& [k, d] : f) fj[k] = d;
    counties[c] = fj;
  }
  return {{"name", s.name}, {"counties", counties}, {"horizon", {s.horizon_start, s.horizon_end}}};
}

// counties x features matrix of deltas; every name must resolve.
inline Eigen::MatrixXd resolve_deltas(const ScenarioSpec& s, const std::vector<std::string>& counties,
                                      const std::vector<std::string>& features) {
  std::vector<std::string> diag;
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(counties.size()),
                                            static_cast<Eigen::Index>(features.size()));
  for (const auto& [county, feats] : s.deltas) {
    const auto ci = std::find(counties.begin(), counties.end(), county);
    if (ci == counties.end()) {
      diag.push_back("counties." + county + ": unknown county");
      continue;
    }
    for (const auto& [feature, delta] : feats) {
      const auto fi = std::find(features.begin(), features.end(), feature);
      if (fi == features.end()) {
        diag.push_back("counties." + county + "." + feature + ": unknown feature");
        continue;
      }
      d(ci - counties.begin(), fi - features.begin()) = delta;
    }
  }
  if (!diag.empty()) throw ScenarioError(diag);
  return d;
}

}  // namespace herdcast::forecast
