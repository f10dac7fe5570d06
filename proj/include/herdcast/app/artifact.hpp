#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "herdcast/core/error.hpp"
#include "herdcast/core/hash.hpp"
#include "herdcast/forecast/rollout.hpp"
#include "herdcast/forecast/trend.hpp"
#include "herdcast/geo/graph.hpp"
#include "herdcast/panel/scaler.hpp"
#include "herdcast/scoring/scoring.hpp"
#include "herdcast/stgnn/features.hpp"
#include "herdcast/stgnn/model.hpp"
#include "herdcast/stgnn/train.hpp"

namespace herdcast::app {

using Matrix = Eigen::MatrixXd;
using json = nlohmann::json;

inline constexpr int artifact_schema_version = 1;

struct TrainSummary {
  stgnn::SplitMetrics metrics;
  int best_epoch = 0;
  int epochs = 0;
  double learning_rate = 0.0;
  double lambda = 0.0;
  std::uint64_t seed = 0;
  std::vector<int> train_years, val_years, test_years;  // calendar years
  int augmented_sequences = 0;
};

struct ForecastDefaults {
  int last_year = 2030;
  double sigma_feat = 0.0;
  int trials = 100;
  double sigma = 0.01;
  std::uint64_t feature_seed = 0;
  std::uint64_t mc_seed = 0;
};

// Frozen, self-describing bundle of every fitted component. Numbers are
// serialized with shortest round-trip formatting, so loading reproduces
// predictions bit for bit.
struct ProjectArtifact {
  std::vector<std::string> feature_names;
  std::vector<panel::Orientation> orientation;
  std::vector<std::string> counties;
  std::vector<int> years;
  panel::ScalerParams minmax;
  scoring::ScoreModel score;
  geo::CentroidTable centroids;
  int k = 3;
  geo::SpatialGraph graph;  // rebuilt from centroids and k
  stgnn::StgnnParams stgnn;
  stgnn::LagScaler lag;
  forecast::TrendModel trends;
  Matrix history;  // min-max scaled features, panel row order
  Matrix scores;   // counties x years, rescaled index
  Matrix index_raw;  // counties x years, composite before rescaling
  TrainSummary training;
  ForecastDefaults forecast;
  json config;
  std::string hash;

  std::vector<Matrix> history_slices() const {
    std::vector<Matrix> out;
    const auto nc = static_cast<Eigen::Index>(counties.size());
    const auto T = static_cast<Eigen::Index>(years.size());
    for (Eigen::Index t = 0; t < T; ++t) {
      Matrix m(nc, history.cols());
      for (Eigen::Index c = 0; c < nc; ++c) m.row(c) = history.row(c * T + t);
      out.push_back(std::move(m));
    }
    return out;
  }

  forecast::ForecastInputs forecast_inputs() const {
    forecast::ForecastInputs in;
    in.params = &stgnn;
    in.scaler = lag;
    in.a_norm = graph.normalized;
    in.trends = trends;
    in.history = history_slices();
    in.scores = scores;
    in.years = years;
    in.counties = counties;
    in.features = feature_names;
    return in;
  }

  // Real-panel training sequence (lag from recorded scores).
  stgnn::Sequence real_sequence() const {
    const Matrix lag_std = lag.forward(stgnn::raw_lag(scores));
    return stgnn::assemble_sequence(history_slices(), lag_std, lag.forward(scores));
  }

  int year_index(int year) const {
    for (std::size_t t = 0; t < years.size(); ++t)
      if (years[t] == year) return static_cast<int>(t);
    throw ValidationError("year " + std::to_string(year) + " not in artifact history");
  }

  std::vector<int> year_indices(const std::vector<int>& cal) const {
    std::vector<int> out;
    for (int y : cal) out.push_back(year_index(y));
    return out;
  }
};

inline json centroids_json(const geo::CentroidTable& c) {
  json arr = json::array();
  for (std::size_t i = 0; i < c.size(); ++i) arr.push_back({{"county", c.names[i]}, {"lat", c.points[i].lat}, {"lon", c.points[i].lon}});
  return arr;
}

inline json body_json(const ProjectArtifact& a) {
  std::vector<std::string> orient;
  for (auto o : a.orientation) orient.emplace_back(panel::to_string(o));
  const auto& t = a.training;
  const auto& f = a.forecast;
  return {{"schema_version", artifact_schema_version},
          {"features", {{"names", a.feature_names}, {"orientation", orient}}},
          {"counties", a.counties},
          {"years", a.years},
          {"minmax", panel::to_json(a.minmax)},
          {"score_model", scoring::to_json(a.score)},
          {"graph", {{"k", a.k}, {"centroids", centroids_json(a.centroids)}, {"hash", geo::graph_hash(a.graph)}}},
          {"stgnn", stgnn::to_json(a.stgnn)},
          {"lag_scaler", stgnn::to_json(a.lag)},
          {"trends", forecast::to_json(a.trends)},
          {"history", {{"features", nn::matrix_to_json(a.history)},
                       {"scores", nn::matrix_to_json(a.scores)},
                       {"index_raw", nn::matrix_to_json(a.index_raw)}}},
          {"training",
           {{"metrics", stgnn::to_json(t.metrics)},
            {"best_epoch", t.best_epoch},
            {"epochs", t.epochs},
            {"learning_rate", t.learning_rate},
            {"lambda", t.lambda},
            {"seed", t.seed},
            {"train_years", t.train_years},
            {"val_years", t.val_years},
            {"test_years", t.test_years},
            {"augmented_sequences", t.augmented_sequences}}},
          {"forecast",
           {{"last_year", f.last_year},
            {"sigma_feat", f.sigma_feat},
            {"trials", f.trials},
            {"sigma", f.sigma},
            {"feature_seed", f.feature_seed},
            {"mc_seed", f.mc_seed}}},
          {"config", a.config}};
}

inline std::string compute_hash(const json& body) { return content_hash(body.dump()); }

inline json to_json(ProjectArtifact& a) {
  json body = body_json(a);
  a.hash = compute_hash(body);
  body["hash"] = a.hash;
  return body;
}

inline std::string serialize(ProjectArtifact& a) { return to_json(a).dump(1) + "\n"; }

inline void save_artifact(const std::string& path, ProjectArtifact& a) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write artifact " + path);
  out << serialize(a);
}

inline forecast::ForecastBundle default_forecast(const ProjectArtifact& a, const forecast::ScenarioSpec& s) {
  forecast::ForecastOptions o;
  o.last_year = std::max(a.forecast.last_year, s.horizon_end);
  o.sigma_feat = a.forecast.sigma_feat;
  o.feature_seed = a.forecast.feature_seed;
  o.trials = a.forecast.trials;
  o.sigma = a.forecast.sigma;
  o.mc_seed = a.forecast.mc_seed;
  return forecast::make_bundle(a.forecast_inputs(), s, o, a.hash);
}

inline ProjectArtifact artifact_from_json(const json& doc) {
  if (!doc.is_object()) throw ValidationError("artifact is not a JSON object");
  static const char* required[] = {"schema_version", "features", "counties",   "years",    "minmax",
                                   "score_model",    "graph",    "stgnn",      "lag_scaler", "trends",
                                   "history",        "training", "forecast",   "config",   "hash"};
  for (const char* key : required)
    if (!doc.contains(key)) throw ValidationError(std::string("artifact is missing component '") + key + "'");
  if (doc.at("schema_version").get<int>() != artifact_schema_version)
    throw ValidationError("unsupported artifact schema version " + doc.at("schema_version").dump());
  json body = doc;
  body.erase("hash");
  const std::string stored = doc.at("hash").get<std::string>();
  if (compute_hash(body) != stored) throw ValidationError("artifact hash mismatch: content was modified or corrupted");

  ProjectArtifact a;
  try {
    a.feature_names = doc.at("features").at("names").get<std::vector<std::string>>();
    for (const auto& o : doc.at("features").at("orientation")) a.orientation.push_back(panel::orientation_from_string(o));
    a.counties = doc.at("counties").get<std::vector<std::string>>();
    a.years = doc.at("years").get<std::vector<int>>();
    a.minmax = panel::scaler_from_json(doc.at("minmax"));
    a.score = scoring::score_model_from_json(doc.at("score_model"));
    const auto& g = doc.at("graph");
    a.k = g.at("k");
    for (const auto& c : g.at("centroids")) {
      a.centroids.names.push_back(c.at("county"));
      a.centroids.points.push_back({c.at("lat"), c.at("lon")});
    }
    a.graph = geo::knn_graph(a.centroids, a.k);
    if (geo::graph_hash(a.graph) != g.at("hash").get<std::string>())
      throw ValidationError("graph rebuilt from centroids does not match the stored graph hash");
    a.stgnn = stgnn::stgnn_from_json(doc.at("stgnn"));
    a.lag = stgnn::lag_scaler_from_json(doc.at("lag_scaler"));
    a.trends = forecast::trends_from_json(doc.at("trends"));
    a.history = nn::matrix_from_json(doc.at("history").at("features"));
    a.scores = nn::matrix_from_json(doc.at("history").at("scores"));
    a.index_raw = nn::matrix_from_json(doc.at("history").at("index_raw"));
    const auto& t = doc.at("training");
    a.training.metrics.train = stgnn::metrics_from_json(t.at("metrics").at("train"));
    a.training.metrics.val = stgnn::metrics_from_json(t.at("metrics").at("validation"));
    a.training.metrics.test = stgnn::metrics_from_json(t.at("metrics").at("test"));
    a.training.best_epoch = t.at("best_epoch");
    a.training.epochs = t.at("epochs");
    a.training.learning_rate = t.at("learning_rate");
    a.training.lambda = t.at("lambda");
    a.training.seed = t.at("seed");
    a.training.train_years = t.at("train_years").get<std::vector<int>>();
    a.training.val_years = t.at("val_years").get<std::vector<int>>();
    a.training.test_years = t.at("test_years").get<std::vector<int>>();
    a.training.augmented_sequences = t.at("augmented_sequences");
    const auto& f = doc.at("forecast");
    a.forecast = {f.at("last_year"), f.at("sigma_feat"), f.at("trials"), f.at("sigma"), f.at("feature_seed"), f.at("mc_seed")};
    a.config = doc.at("config");
  } catch (const json::exception& e) {
    throw ValidationError(std::string("artifact component malformed: ") + e.what());
  }
  a.hash = stored;

  const auto nc = static_cast<Eigen::Index>(a.counties.size());
  const auto T = static_cast<Eigen::Index>(a.years.size());
  const auto p = static_cast<Eigen::Index>(a.feature_names.size());
  if (a.history.rows() != nc * T || a.history.cols() != p) throw ValidationError("artifact history has the wrong shape");
  if (a.scores.rows() != nc || a.scores.cols() != T) throw ValidationError("artifact score history has the wrong shape");
  if (a.trends.slope.rows() != nc || a.trends.slope.cols() != p) throw ValidationError("artifact trend model has the wrong shape");
  if (a.graph.nodes() != a.counties.size() || a.graph.names != a.counties)
    throw ValidationError("artifact graph counties do not match the panel counties");
  if (a.stgnn.config.input_dim != p + 1) throw ValidationError("artifact model input width does not match the feature count");
  return a;
}

inline ProjectArtifact load_artifact(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open artifact " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  json doc;
  try {
    doc = json::parse(ss.str());
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("artifact is not valid JSON: ") + e.what());
  }
  return artifact_from_json(doc);
}

}  // namespace herdcast::app
