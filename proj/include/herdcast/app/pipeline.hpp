#pragma once

#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "herdcast/app/artifact.hpp"
#include "herdcast/core/csv.hpp"
#include "herdcast/panel/panel.hpp"
#include "herdcast/panel/scaler.hpp"
#include "herdcast/stgnn/baselines.hpp"
#include "herdcast/vae/utility.hpp"
#include "herdcast/vae/vae.hpp"
#include "herdcast/vae/validation.hpp"

namespace herdcast::app {

struct PipelineConfig {
  std::uint64_t seed = 0;
  scoring::ScoreConfig score;
  int k = 3;
  stgnn::StgnnConfig model;
  int epochs = 800;
  double learning_rate = 1e-3;
  double lambda = 1e-4;
  ForecastDefaults forecast;

  std::uint64_t init_seed() const { return derive_seed(seed, {1}); }
  std::uint64_t dropout_seed() const { return derive_seed(seed, {2}); }
  std::uint64_t feature_seed() const { return derive_seed(seed, {3}); }
  std::uint64_t mc_seed() const { return derive_seed(seed, {4}); }
};

inline json to_json(const PipelineConfig& c) {
  const auto& m = c.model;
  return {{"seed", c.seed},
          {"score",
           {{"components", c.score.components},
            {"percentile", c.score.percentile},
            {"aggregation", scoring::to_string(c.score.aggregation)},
            {"standardize_pillars", c.score.standardize_pillars},
            {"range", {c.score.lo, c.score.hi}}}},
          {"k", c.k},
          {"model",
           {{"spatial_layers", m.spatial_layers},
            {"hidden", m.hidden},
            {"spatial_dim", m.spatial_dim},
            {"key_dim", m.key_dim},
            {"value_dim", m.value_dim},
            {"head_hidden", m.head_hidden},
            {"dropout", m.dropout},
            {"window", m.window}}},
          {"epochs", c.epochs},
          {"learning_rate", c.learning_rate},
          {"lambda", c.lambda}};
}

// ---- augmentation -------------------------------------------------------

struct AugmentOutput {
  vae::VaeParams params;
  vae::TrainingLog log;
  vae::AugmentedSet set;
  Matrix synthetic_raw;  // synthetic rows mapped back to indicator units
  json validation;
};

inline AugmentOutput run_augment(const panel::IndicatorPanel& real, vae::VaeConfig cfg, int replicates) {
  const auto scaled = panel::minmax_fit_apply(real);
  auto trained = vae::train_vae(scaled.values, cfg);
  AugmentOutput out{trained.params, trained.log, {}, {}, {}};
  out.set = vae::augment_conditional(out.params, scaled.values, replicates, derive_seed(cfg.seed, {0xa116}));
  out.synthetic_raw = panel::minmax_inverse(out.set.synthetic, scaled.params);

  json moments = json::array();
  const auto gaps = vae::validate_moments(scaled.values, out.set.synthetic);
  for (std::size_t j = 0; j < gaps.size(); ++j)
    moments.push_back({{"feature", real.feature_names[j]}, {"mean_gap", gaps[j].mean_gap}, {"variance_gap", gaps[j].variance_gap}});
  json v = {{"moments", moments}};
  try {
    v["corr_frobenius"] = vae::corr_frobenius(scaled.values, out.set.synthetic, &real.feature_names);
  } catch (const ValidationError& e) {
    v["corr_frobenius"] = nullptr;
    v["corr_frobenius_error"] = e.what();
  }
  v["mmd_squared"] = vae::mmd_squared(scaled.values, out.set.synthetic);
  v["mmd_bandwidth"] = vae::median_pairwise_distance(scaled.values, out.set.synthetic);
  const auto& last = out.log.epochs.empty() ? vae::EpochRecord{} : out.log.epochs.back();
  v["training"] = {{"epochs", out.log.epochs.size()},
                   {"best_epoch", out.log.best_epoch},
                   {"final_train_accuracy", last.train_accuracy},
                   {"final_val_accuracy", last.val_accuracy}};
  v["rows"] = {{"real", out.set.real_rows}, {"synthetic", out.set.synthetic.rows()}, {"total", out.set.total_rows()}};
  out.validation = v;
  return out;
}

inline void write_augmented(std::ostream& out, const panel::IndicatorPanel& real, const AugmentOutput& aug) {
  panel::IndicatorPanel all = real;
  const auto n = real.values.rows();
  all.values.conservativeResize(n + aug.synthetic_raw.rows(), Eigen::NoChange);
  all.values.bottomRows(aug.synthetic_raw.rows()) = aug.synthetic_raw;
  std::vector<std::string> prov(static_cast<std::size_t>(n), "real");
  for (std::size_t i = 0; i < aug.set.provenance.size(); ++i) {
    all.keys.push_back(real.keys[aug.set.provenance[i].source]);
    prov.push_back(aug.set.provenance[i].tag());
  }
  panel::write_panel(out, all, &prov);
}

// Splits an augmented CSV into one panel per conditional replicate, each
// aligned row-for-row with `real`.
inline std::vector<panel::IndicatorPanel> read_augmented(const std::string& path, const panel::IndicatorPanel& real) {
  const auto table = csv::read_file(path);
  const auto find = [&](const std::string& n) -> long {
    const auto it = std::find(table.header.begin(), table.header.end(), n);
    return it == table.header.end() ? -1 : static_cast<long>(it - table.header.begin());
  };
  const long prov_col = find("provenance");
  if (prov_col < 0) throw SchemaError("augmented file has no 'provenance' column");
  std::vector<long> cols;
  for (const auto& f : real.feature_names) {
    const long c = find(f);
    if (c < 0) throw SchemaError("augmented file missing feature column '" + f + "'");
    cols.push_back(c);
  }
  std::map<std::size_t, std::map<std::size_t, Eigen::RowVectorXd>> reps;
  for (const auto& row : table.rows) {
    if (row.fields.size() != table.header.size()) throw ParseError(row.line, "wrong field count");
    const auto& tag = row.fields[static_cast<std::size_t>(prov_col)];
    if (tag.rfind("vae:", 0) != 0 || tag == "vae:unconditional") continue;
    const auto comma = tag.find(',');
    int src = 0, rep = 0;
    if (comma == std::string::npos || !csv::parse_int(tag.substr(4, comma - 4), src) ||
        !csv::parse_int(tag.substr(comma + 1), rep) || src < 0 || rep < 0)
      throw ParseError(row.line, "malformed provenance '" + tag + "'");
    if (static_cast<std::size_t>(src) >= real.rows()) throw ParseError(row.line, "provenance source index out of range");
    Eigen::RowVectorXd v(static_cast<Eigen::Index>(cols.size()));
    for (std::size_t j = 0; j < cols.size(); ++j)
      if (!csv::parse_double(row.fields[static_cast<std::size_t>(cols[j])], v(static_cast<Eigen::Index>(j))))
        throw ParseError(row.line, "invalid number");
    reps[static_cast<std::size_t>(rep)][static_cast<std::size_t>(src)] = v;
  }
  std::vector<panel::IndicatorPanel> out;
  for (const auto& [k, rows] : reps) {
    if (rows.size() != real.rows())
      throw ValidationError("augmented replicate " + std::to_string(k) + " does not cover every real row");
    Matrix values(static_cast<Eigen::Index>(real.rows()), real.values.cols());
    for (const auto& [src, v] : rows) values.row(static_cast<Eigen::Index>(src)) = v;
    out.push_back(real.with_values(values));
  }
  return out;
}

// ---- training ------------------------------------------------------------

inline stgnn::Sequence make_sequence(const panel::IndicatorPanel& raw, const panel::ScalerParams& minmax,
                                     const scoring::ScoreModel& score, const stgnn::LagScaler& lag) {
  const Matrix scaled = panel::minmax_apply(raw.values, minmax);
  const auto index = score.score(raw.values);
  const Matrix y = stgnn::to_grid(raw, index.scaled);
  return stgnn::assemble_sequence(stgnn::year_slices(raw.with_values(scaled)), lag.forward(stgnn::raw_lag(y)),
                                  lag.forward(y));
}

struct TrainOutput {
  ProjectArtifact artifact;
  std::vector<stgnn::StgnnEpoch> log;
};

inline std::vector<int> calendar(const std::vector<int>& idx, const std::vector<int>& years) {
  std::vector<int> out;
  for (int t : idx) out.push_back(years[static_cast<std::size_t>(t)]);
  return out;
}

inline TrainOutput train_project(const panel::IndicatorPanel& raw, const geo::CentroidTable& centroids,
                                 const std::vector<panel::IndicatorPanel>& augmented, const PipelineConfig& cfg) {
  if (!raw.is_regular()) throw ValidationError("training requires a regular panel");
  TrainOutput out;
  ProjectArtifact& a = out.artifact;
  a.feature_names = raw.feature_names;
  a.orientation = raw.orientation;
  a.counties = raw.county_names();
  a.years = raw.years();
  a.config = to_json(cfg);

  const auto scaled = panel::minmax_fit_apply(raw);
  a.minmax = scaled.params;
  a.history = scaled.values;
  const auto fit = scoring::fit_score_model(raw, cfg.score);
  a.score = fit.model;
  a.scores = stgnn::to_grid(raw, fit.index.scaled);
  a.index_raw = stgnn::to_grid(raw, fit.index.raw);

  a.centroids = centroids.aligned_to(a.counties);
  a.k = cfg.k;
  a.graph = geo::knn_graph(a.centroids, cfg.k);

  stgnn::TrainConfig tc;
  tc.learning_rate = cfg.learning_rate;
  tc.epochs = cfg.epochs;
  tc.lambda = cfg.lambda;
  tc.seed = cfg.dropout_seed();
  stgnn::default_split(tc, static_cast<int>(a.years.size()));

  const auto lagf = stgnn::build_lag_feature(a.scores, tc.train_years);
  a.lag = lagf.scaler;
  std::vector<stgnn::Sequence> seqs = {a.real_sequence()};
  for (const auto& p : augmented) seqs.push_back(make_sequence(p, a.minmax, a.score, a.lag));

  stgnn::StgnnConfig mc = cfg.model;
  mc.input_dim = static_cast<int>(a.feature_names.size()) + 1;
  mc.seed = cfg.init_seed();
  auto res = stgnn::train_stgnn(stgnn::init_stgnn(mc), seqs, a.graph.normalized, a.lag, tc);
  a.stgnn = res.params;
  out.log = std::move(res.log);
  a.training = {res.metrics,
                res.best_epoch,
                tc.epochs,
                tc.learning_rate,
                tc.lambda,
                tc.seed,
                calendar(tc.train_years, a.years),
                calendar(tc.val_years, a.years),
                calendar(tc.test_years, a.years),
                static_cast<int>(augmented.size())};

  a.trends = forecast::fit_trends(a.history_slices(), a.years);
  a.forecast = cfg.forecast;
  a.forecast.feature_seed = cfg.feature_seed();
  a.forecast.mc_seed = cfg.mc_seed();
  return out;
}

// ---- evaluation ----------------------------------------------------------

struct EvaluateOptions {
  stgnn::FfnnConfig ffnn;
  bool utility = false;
};

inline json evaluate_project(const ProjectArtifact& a, const std::vector<panel::IndicatorPanel>& augmented,
                             const EvaluateOptions& opt) {
  const auto real = a.real_sequence();
  const Matrix pred = stgnn::predict(a.stgnn, real.x, a.graph.normalized);
  const auto tr = a.year_indices(a.training.train_years);
  const auto va = a.year_indices(a.training.val_years);
  const auto te = a.year_indices(a.training.test_years);
  json out;
  out["stgnn"] = {{"train", stgnn::to_json(stgnn::split_metrics(pred, real.target, tr, a.lag))}};
  if (!va.empty()) out["stgnn"]["validation"] = stgnn::to_json(stgnn::split_metrics(pred, real.target, va, a.lag));
  if (!te.empty()) out["stgnn"]["test"] = stgnn::to_json(stgnn::split_metrics(pred, real.target, te, a.lag));
  out["stgnn"]["best_epoch"] = a.training.best_epoch;

  std::vector<int> held = va;
  held.insert(held.end(), te.begin(), te.end());
  out["baselines"] = stgnn::to_json(stgnn::run_baselines(real, tr, held, a.lag, opt.ffnn));

  if (opt.utility && !augmented.empty() && !te.empty()) {
    std::vector<stgnn::Sequence> aug = {real};
    for (const auto& p : augmented) aug.push_back(make_sequence(p, a.minmax, a.score, a.lag));
    stgnn::TrainConfig tc;
    tc.learning_rate = a.training.learning_rate;
    tc.epochs = a.training.epochs;
    tc.lambda = a.training.lambda;
    tc.seed = a.training.seed;
    tc.train_years = tr;
    tc.val_years = va;
    tc.test_years = te;
    const auto procedure = [&](const std::vector<stgnn::Sequence>& data) {
      auto res = stgnn::train_stgnn(stgnn::init_stgnn(a.stgnn.config), data, a.graph.normalized, a.lag, tc);
      const Matrix p = stgnn::predict(res.params, real.x, a.graph.normalized);
      std::vector<double> v;
      for (int t : te)
        for (Eigen::Index c = 0; c < p.rows(); ++c) v.push_back(a.lag.inverse(p(c, t)));
      return v;
    };
    std::vector<double> targets;
    for (int t : te)
      for (Eigen::Index c = 0; c < real.target.rows(); ++c) targets.push_back(a.lag.inverse(real.target(c, t)));
    const auto u = vae::utility_harness(std::vector<stgnn::Sequence>{real}, aug, procedure, targets);
    out["utility"] = {{"real", stgnn::to_json(u.real_only)},
                      {"augmented", stgnn::to_json(u.augmented)},
                      {"delta", {{"mae", u.delta_mae}, {"rmse", u.delta_rmse}, {"r2", u.delta_r2}}}};
  }
  return out;
}

}  // namespace herdcast::app
