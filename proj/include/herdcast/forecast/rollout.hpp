#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "herdcast/core/csv.hpp"
#include "herdcast/core/error.hpp"
#include "herdcast/core/rng.hpp"
#include "herdcast/core/stats.hpp"
#include "herdcast/forecast/scenario.hpp"
#include "herdcast/forecast/trend.hpp"
#include "herdcast/stgnn/features.hpp"
#include "herdcast/stgnn/model.hpp"

namespace herdcast::forecast {

// Everything the rollout needs from a trained project.
struct ForecastInputs {
  const stgnn::StgnnParams* params = nullptr;
  stgnn::LagScaler scaler;
  Matrix a_norm;
  TrendModel trends;
  std::vector<Matrix> history;  // operational features per observed year
  Matrix scores;                // counties x observed years, score scale
  std::vector<int> years;
  std::vector<std::string> counties;
  std::vector<std::string> features;
};

struct Trajectories {
  std::vector<int> years;
  Matrix baseline;  // counties x horizon
  Matrix scenario;
  std::vector<Matrix> baseline_features;  // projected, clipped
  std::vector<Matrix> scenario_features;
};

namespace detail {

// Predicts the score for the last year of ops, with lag columns built from
// the given score path.
inline Vector step(const ForecastInputs& in, const std::vector<Matrix>& ops, const Matrix& path) {
  const Matrix lag = in.scaler.forward(stgnn::raw_lag(path));
  const auto seq = stgnn::assemble_sequence(ops, lag, Matrix::Zero(path.rows(), path.cols()));
  // Only the last window of years can influence the final prediction.
  const auto w = static_cast<std::size_t>(in.params->config.window);
  const std::size_t start = seq.x.size() > w ? seq.x.size() - w : 0;
  const std::vector<Matrix> tail(seq.x.begin() + static_cast<std::ptrdiff_t>(start), seq.x.end());
  const Matrix pred = stgnn::predict(*in.params, tail, in.a_norm);
  return in.scaler.inverse(pred.col(pred.cols() - 1));
}

}  // namespace detail

inline void check_inputs(const ForecastInputs& in) {
  if (!in.params) throw ValidationError("forecast requires a trained model");
  if (in.history.empty() || in.history.size() != in.years.size()) throw ValidationError("forecast history is empty");
  if (in.scores.cols() != static_cast<Eigen::Index>(in.years.size())) throw ValidationError("score history length mismatch");
  for (std::size_t t = 1; t < in.years.size(); ++t)
    if (in.years[t] != in.years[t - 1] + 1) throw ValidationError("history years are not contiguous");
}

// Autoregressive baseline and scenario trajectories from the year after the
// history through `last_year`. Both paths share the feature-noise draws; the
// scenario multiplies target-county projections by (1 + delta) before clipping.
inline Trajectories rollout(const ForecastInputs& in, int last_year, const Matrix& deltas, double sigma_feat,
                            std::uint64_t seed) {
  check_inputs(in);
  const int first = in.years.back() + 1;
  if (last_year < first) throw ValidationError("forecast horizon must extend past the last observed year");
  if (deltas.rows() != in.scores.rows() || deltas.cols() != in.trends.slope.cols())
    throw ValidationError("scenario delta matrix has the wrong shape");

  Trajectories tr;
  std::vector<Matrix> ops_base = in.history, ops_scen = in.history;
  Matrix path_base = in.scores, path_scen = in.scores;
  const Matrix multiplier = (deltas.array() + 1.0).matrix();
  for (int year = first; year <= last_year; ++year) {
    const Matrix proj = project_unclipped(in.trends, year, sigma_feat, seed);
    const Matrix xb = clip(proj, in.trends.lo, in.trends.hi);
    const Matrix xs = clip(proj.cwiseProduct(multiplier), in.trends.lo, in.trends.hi);
    ops_base.push_back(xb);
    ops_scen.push_back(xs);
    path_base.conservativeResize(Eigen::NoChange, path_base.cols() + 1);
    path_scen.conservativeResize(Eigen::NoChange, path_scen.cols() + 1);
    path_base.col(path_base.cols() - 1).setZero();
    path_scen.col(path_scen.cols() - 1).setZero();
    path_base.col(path_base.cols() - 1) = detail::step(in, ops_base, path_base);
    path_scen.col(path_scen.cols() - 1) = detail::step(in, ops_scen, path_scen);
    tr.years.push_back(year);
    tr.baseline_features.push_back(xb);
    tr.scenario_features.push_back(xs);
  }
  const auto H = static_cast<Eigen::Index>(tr.years.size());
  tr.baseline = path_base.rightCols(H);
  tr.scenario = path_scen.rightCols(H);
  return tr;
}

struct Band {
  Matrix mean, q05, q95;
};

inline std::vector<double> simulate_trials(double base, int trials, double sigma, std::uint64_t stream) {
  Rng rng(stream);
  std::vector<double> out(static_cast<std::size_t>(trials));
  for (auto& v : out) v = base + sigma * rng.normal();
  return out;
}

// y_s = baseline + N(0, sigma^2), one stream per (county, year).
inline Band monte_carlo(const Matrix& baseline, const std::vector<int>& years, int trials, double sigma,
                        std::uint64_t seed) {
  if (trials < 1) throw ValidationError("Monte Carlo needs at least one trial");
  if (sigma < 0.0) throw ValidationError("Monte Carlo sigma must be nonnegative");
  if (static_cast<Eigen::Index>(years.size()) != baseline.cols()) throw ValidationError("band years mismatch");
  Band b{Matrix(baseline.rows(), baseline.cols()), Matrix(baseline.rows(), baseline.cols()),
         Matrix(baseline.rows(), baseline.cols())};
  for (Eigen::Index c = 0; c < baseline.rows(); ++c)
    for (Eigen::Index t = 0; t < baseline.cols(); ++t) {
      const auto stream = derive_seed(seed, {static_cast<std::uint64_t>(c), static_cast<std::uint64_t>(years[static_cast<std::size_t>(t)])});
      const auto draws = simulate_trials(baseline(c, t), trials, sigma, stream);
      b.mean(c, t) = stats::mean(draws);
      b.q05(c, t) = stats::percentile(draws, 5.0);
      b.q95(c, t) = stats::percentile(draws, 95.0);
    }
  return b;
}

struct Uplift {
  Matrix per_year;
  Vector cumulative;
};

inline Uplift uplift(const Matrix& baseline, const Matrix& scenario) {
  if (baseline.rows() != scenario.rows() || baseline.cols() != scenario.cols())
    throw ValidationError("trajectory shapes differ");
  Uplift u;
  u.per_year = scenario - baseline;
  u.cumulative = u.per_year.rowwise().sum();
  return u;
}

struct Provenance {
  std::string model_hash;
  std::string scenario = "baseline";
  std::uint64_t feature_seed = 0;
  std::uint64_t mc_seed = 0;
  int trials = 100;
  double sigma = 0.01;
  double sigma_feat = 0.0;
};

struct ForecastBundle {
  std::vector<std::string> counties;
  std::vector<int> years;
  Matrix baseline, scenario, mc_mean, q05, q95, uplift;
  Vector cumulative_uplift;
  Provenance provenance;
};

struct ForecastOptions {
  int last_year = 2030;
  double sigma_feat = 0.0;
  std::uint64_t feature_seed = 0;
  int trials = 100;
  double sigma = 0.01;
  std::uint64_t mc_seed = 0;
};

inline ForecastBundle make_bundle(const ForecastInputs& in, const ScenarioSpec& scenario, const ForecastOptions& opt,
                                  const std::string& model_hash) {
  const Matrix deltas = resolve_deltas(scenario, in.counties, in.features);
  const auto tr = rollout(in, opt.last_year, deltas, opt.sigma_feat, opt.feature_seed);
  const auto band = monte_carlo(tr.baseline, tr.years, opt.trials, opt.sigma, opt.mc_seed);
  const auto up = uplift(tr.baseline, tr.scenario);
  ForecastBundle b;
  b.counties = in.counties;
  b.years = tr.years;
  b.baseline = tr.baseline;
  b.scenario = tr.scenario;
  b.mc_mean = band.mean;
  b.q05 = band.q05;
  b.q95 = band.q95;
  b.uplift = up.per_year;
  b.cumulative_uplift = up.cumulative;
  b.provenance = {model_hash, scenario.name, opt.feature_seed, opt.mc_seed, opt.trials, opt.sigma, opt.sigma_feat};
  return b;
}

// Keeps the listed years (inclusive range) and, if given, the listed counties.
inline ForecastBundle select(const ForecastBundle& b, int first_year, int last_year,
                             const std::vector<std::string>& counties = {}) {
  std::vector<Eigen::Index> rows, cols;
  for (std::size_t c = 0; c < b.counties.size(); ++c)
    if (counties.empty() || std::find(counties.begin(), counties.end(), b.counties[c]) != counties.end())
      rows.push_back(static_cast<Eigen::Index>(c));
  for (std::size_t t = 0; t < b.years.size(); ++t)
    if (b.years[t] >= first_year && b.years[t] <= last_year) cols.push_back(static_cast<Eigen::Index>(t));
  auto pick = [&](const Matrix& m) {
    Matrix out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (std::size_t j = 0; j < cols.size(); ++j) out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = m(rows[i], cols[j]);
    return out;
  };
  ForecastBundle o;
  for (auto r : rows) o.counties.push_back(b.counties[static_cast<std::size_t>(r)]);
  for (auto c : cols) o.years.push_back(b.years[static_cast<std::size_t>(c)]);
  o.baseline = pick(b.baseline);
  o.scenario = pick(b.scenario);
  o.mc_mean = pick(b.mc_mean);
  o.q05 = pick(b.q05);
  o.q95 = pick(b.q95);
  o.uplift = pick(b.uplift);
  o.cumulative_uplift = o.uplift.rowwise().sum();
  o.provenance = b.provenance;
  return o;
}

inline void write_bundle_csv(std::ostream& out, const ForecastBundle& b) {
  csv::write_row(out, {"county", "year", "baseline", "scenario", "mc_mean", "q05", "q95", "uplift"});
  for (std::size_t c = 0; c < b.counties.size(); ++c)
    for (std::size_t t = 0; t < b.years.size(); ++t) {
      const auto i = static_cast<Eigen::Index>(c), j = static_cast<Eigen::Index>(t);
      csv::write_row(out, {b.counties[c], std::to_string(b.years[t]), csv::format(b.baseline(i, j)),
                           csv::format(b.scenario(i, j)), csv::format(b.mc_mean(i, j)), csv::format(b.q05(i, j)),
                           csv::format(b.q95(i, j)), csv::format(b.uplift(i, j))});
    }
}

inline std::vector<double> row_values(const Matrix& m, Eigen::Index r) {
  std::vector<double> v;
  for (Eigen::Index j = 0; j < m.cols(); ++j) v.push_back(m(r, j));
  return v;
}

inline nlohmann::json series_json(const ForecastBundle& b) {
  nlohmann::json series = nlohmann::json::array();
  for (std::size_t c = 0; c < b.counties.size(); ++c) {
    const auto i = static_cast<Eigen::Index>(c);
    series.push_back({{"county", b.counties[c]},
                      {"years", b.years},
                      {"baseline", row_values(b.baseline, i)},
                      {"scenario", row_values(b.scenario, i)},
                      {"mc_mean", row_values(b.mc_mean, i)},
                      {"q05", row_values(b.q05, i)},
                      {"q95", row_values(b.q95, i)},
                      {"uplift", row_values(b.uplift, i)},
                      {"cumulative_uplift", b.cumulative_uplift(i)}});
  }
  return series;
}

inline nlohmann::json to_json(const ForecastBundle& b) {
  const auto& p = b.provenance;
  return {{"schema_version", 1},
          {"provenance",
           {{"model_hash", p.model_hash},
            {"scenario", p.scenario},
            {"feature_seed", p.feature_seed},
            {"mc_seed", p.mc_seed},
            {"trials", p.trials},
            {"sigma", p.sigma},
            {"sigma_feat", p.sigma_feat}}},
          {"series", series_json(b)}};
}

}  // namespace herdcast::forecast
