#pragma once

#include <charconv>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "herdcast/app/artifact.hpp"
#include "herdcast/forecast/scenario.hpp"
#include "herdcast/pca/pillars.hpp"

namespace herdcast::app {

struct Response {
  int status = 200;
  json body;
};

using Query = std::map<std::string, std::string>;

// Request handling over an immutable artifact. handle() is const and keeps no
// per-request state, so one instance serves concurrent requests.
class Service {
 public:
  explicit Service(ProjectArtifact artifact)
      : art_(std::move(artifact)), baseline_(default_forecast(art_, forecast::ScenarioSpec{})) {}

  const ProjectArtifact& artifact() const { return art_; }

  Response handle(const std::string& method, const std::string& path, const Query& query,
                  const std::string& body) const {
    try {
      if (path == "/scenario") {
        if (method != "POST") return method_not_allowed("POST");
        return scenario(body);
      }
      if (path == "/health" || path == "/counties" || path == "/scores" || path == "/forecast" || path == "/pillars") {
        if (method != "GET") return method_not_allowed("GET");
        if (path == "/health") return health();
        if (path == "/counties") return counties();
        if (path == "/scores") return scores(query);
        if (path == "/forecast") return forecast_view(query);
        return pillars();
      }
      return {404, {{"error", "no such endpoint '" + path + "'"}}};
    } catch (const forecast::ScenarioError& e) {
      return {400, {{"error", "malformed scenario"}, {"diagnostics", e.diagnostics()}}};
    } catch (const ValidationError& e) {
      return {400, {{"error", e.what()}}};
    } catch (const std::exception& e) {
      return {500, {{"error", e.what()}}};
    }
  }

 private:
  static Response method_not_allowed(const char* allowed) {
    return {405, {{"error", std::string("method not allowed; use ") + allowed}}};
  }

  Response unknown_county(const std::string& c) const {
    return {404, {{"error", "unknown county '" + c + "'"}, {"counties", art_.counties}}};
  }

  std::optional<std::size_t> county_index(const std::string& c) const {
    for (std::size_t i = 0; i < art_.counties.size(); ++i)
      if (art_.counties[i] == c) return i;
    return std::nullopt;
  }

  Response health() const {
    return {200, {{"status", "ok"}, {"model_hash", art_.hash}, {"schema_version", artifact_schema_version}}};
  }

  Response counties() const {
    json list = json::array();
    const auto last = art_.scores.cols() - 1;
    for (std::size_t i = 0; i < art_.counties.size(); ++i) {
      const auto& p = art_.centroids.points[i];
      list.push_back({{"county", art_.counties[i]},
                      {"lat", p.lat},
                      {"lon", p.lon},
                      {"latest_year", art_.years.back()},
                      {"latest_score", art_.scores(static_cast<Eigen::Index>(i), last)}});
    }
    return {200, {{"counties", list}}};
  }

  json score_series(std::size_t i) const {
    const auto r = static_cast<Eigen::Index>(i);
    return {{"county", art_.counties[i]},
            {"years", art_.years},
            {"scores", forecast::row_values(art_.scores, r)},
            {"index_raw", forecast::row_values(art_.index_raw, r)}};
  }

  Response scores(const Query& q) const {
    const auto it = q.find("county");
    if (it == q.end() || it->second.empty()) {
      json all = json::array();
      for (std::size_t i = 0; i < art_.counties.size(); ++i) all.push_back(score_series(i));
      return {200, {{"series", all}}};
    }
    const auto idx = county_index(it->second);
    if (!idx) return unknown_county(it->second);
    return {200, score_series(*idx)};
  }

  static std::optional<std::uint64_t> seed_of(const Query& q) {
    const auto it = q.find("seed");
    if (it == q.end()) return std::nullopt;
    std::uint64_t v = 0;
    const auto* b = it->second.data();
    const auto [p, ec] = std::from_chars(b, b + it->second.size(), v);
    if (ec != std::errc() || p != b + it->second.size()) throw ValidationError("seed must be a nonnegative integer");
    return v;
  }

  forecast::ForecastBundle run(const forecast::ScenarioSpec& s, std::optional<std::uint64_t> seed) const {
    if (!seed && s.deltas.empty() && s.horizon_end <= art_.forecast.last_year) return baseline_;
    ProjectArtifact const& a = art_;
    forecast::ForecastOptions o;
    o.last_year = std::max(a.forecast.last_year, s.horizon_end);
    o.sigma_feat = a.forecast.sigma_feat;
    o.trials = a.forecast.trials;
    o.sigma = a.forecast.sigma;
    o.feature_seed = seed ? derive_seed(*seed, {3}) : a.forecast.feature_seed;
    o.mc_seed = seed ? derive_seed(*seed, {4}) : a.forecast.mc_seed;
    return forecast::make_bundle(a.forecast_inputs(), s, o, a.hash);
  }

  Response forecast_view(const Query& q) const {
    std::vector<std::string> sel;
    const auto it = q.find("county");
    if (it != q.end() && !it->second.empty()) {
      if (!county_index(it->second)) return unknown_county(it->second);
      sel.push_back(it->second);
    }
    auto b = run(forecast::ScenarioSpec{}, seed_of(q));
    b.provenance.scenario = "baseline";
    return {200, forecast::to_json(forecast::select(b, art_.years.back() + 1, art_.forecast.last_year, sel))};
  }

  Response scenario(const std::string& body) const {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(body);
    } catch (const nlohmann::json::parse_error& e) {
      throw forecast::ScenarioError({std::string("body: malformed JSON (") + e.what() + ")"});
    }
    const auto spec = forecast::parse_scenario(j);
    std::optional<std::uint64_t> seed;
    if (j.contains("seed")) {
      if (!j["seed"].is_number_unsigned()) throw forecast::ScenarioError({"seed: expected a nonnegative integer"});
      seed = j["seed"].get<std::uint64_t>();
    }
    std::vector<std::string> sel;
    for (const auto& [c, f] : spec.deltas) {
      if (!county_index(c)) return unknown_county(c);
      sel.push_back(c);
    }
    // Unknown features are reported before any compute.
    forecast::resolve_deltas(spec, art_.counties, art_.feature_names);
    auto b = run(spec, seed);
    b.provenance.scenario = spec.name;
    // County order follows the artifact, as in /forecast.
    return {200, forecast::to_json(forecast::select(b, spec.horizon_start, spec.horizon_end, sel))};
  }

  Response pillars() const {
    const auto& m = art_.score.pillars;
    const auto& w = art_.score.weights;
    json features = json::array();
    for (int j = 0; j < m.p(); ++j) {
      json loadings = json::array(), oriented = json::array(), weights = json::array();
      for (int k = 0; k < m.k(); ++k) {
        loadings.push_back(m.loadings(j, k));
        oriented.push_back(m.orientation[static_cast<std::size_t>(k)] * m.loadings(j, k));
        weights.push_back(w.w(j, k) * w.sign(j, k));
      }
      features.push_back({{"feature", m.feature_names[static_cast<std::size_t>(j)]},
                          {"orientation", panel::to_string(art_.orientation[static_cast<std::size_t>(j)])},
                          {"loadings", loadings},
                          {"oriented_loadings", oriented},
                          {"signed_weights", weights}});
    }
    const auto ratios = pca::variance_ratios(m);
    std::vector<double> eig(m.eigenvalues.data(), m.eigenvalues.data() + m.eigenvalues.size());
    std::vector<double> rho(ratios.data(), ratios.data() + ratios.size());
    std::vector<double> omega(w.omega.data(), w.omega.data() + w.omega.size());
    return {200,
            {{"pillars", m.names},
             {"orientation", m.orientation},
             {"dominant", m.dominant},
             {"tau", m.tau},
             {"eigenvalues", eig},
             {"variance_ratios", rho},
             {"aggregation", scoring::to_string(w.aggregation)},
             {"omega", omega},
             {"features", features}}};
  }

  ProjectArtifact art_;
  forecast::ForecastBundle baseline_;
};

}  // namespace herdcast::app
