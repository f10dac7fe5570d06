#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "herdcast/core/error.hpp"
#include "herdcast/core/stats.hpp"
#include "herdcast/panel/panel.hpp"

namespace herdcast::stgnn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Mean and std used for both the lag channel and the regression target.
struct LagScaler {
  double mean = 0.0;
  double std = 1.0;

  double forward(double y) const { return (y - mean) / std; }
  double inverse(double z) const { return z * std + mean; }
  Matrix forward(const Matrix& y) const { return (y.array() - mean) / std; }
  Matrix inverse(const Matrix& z) const { return (z.array() * std + mean).matrix(); }
};

// Rows of a regular panel reshaped to counties x years.
inline Matrix to_grid(const panel::IndicatorPanel& p, const Vector& v) {
  if (!p.is_regular()) throw ValidationError("panel is not regular");
  const auto nc = static_cast<Eigen::Index>(p.county_count());
  const auto T = static_cast<Eigen::Index>(p.years().size());
  if (v.size() != nc * T) throw ValidationError("vector length does not match panel rows");
  Matrix g(nc, T);
  for (Eigen::Index c = 0; c < nc; ++c)
    for (Eigen::Index t = 0; t < T; ++t) g(c, t) = v(c * T + t);
  return g;
}

inline Vector from_grid(const Matrix& g) {
  Vector v(g.size());
  for (Eigen::Index c = 0; c < g.rows(); ++c)
    for (Eigen::Index t = 0; t < g.cols(); ++t) v(c * g.cols() + t) = g(c, t);
  return v;
}

// Previous-year scores; column 0 repeats the first observed score.
inline Matrix raw_lag(const Matrix& y) {
  Matrix lag(y.rows(), y.cols());
  for (Eigen::Index t = 0; t < y.cols(); ++t) lag.col(t) = y.col(t == 0 ? 0 : t - 1);
  return lag;
}

struct LagFeature {
  Matrix lag;  // standardized, counties x years
  LagScaler scaler;
  std::vector<bool> self_lag;  // per year: true where the lag is the row's own score
};

// Stats are pooled over the lags of the training years (column indices).
inline LagFeature build_lag_feature(const Matrix& y, const std::vector<int>& train_years) {
  if (y.cols() == 0 || y.rows() == 0) throw ValidationError("no scores for lag construction");
  const Matrix raw = raw_lag(y);
  std::vector<double> pool;
  for (int t : train_years) {
    if (t < 0 || t >= y.cols()) throw ValidationError("training year index out of range");
    for (Eigen::Index c = 0; c < y.rows(); ++c) pool.push_back(raw(c, t));
  }
  if (pool.size() < 2) throw ValidationError("lag statistics need at least two training values");
  LagFeature f;
  f.scaler.mean = stats::mean(pool);
  f.scaler.std = stats::stddev(pool);
  if (!(f.scaler.std > 0.0)) throw ValidationError("lag scores have zero variance over the training years");
  f.lag = f.scaler.forward(raw);
  f.self_lag.assign(static_cast<std::size_t>(y.cols()), false);
  f.self_lag[0] = true;
  return f;
}

// One training sequence: per-year node features (counties x F) and
// standardized targets (counties x years).
struct Sequence {
  std::vector<Matrix> x;
  Matrix target;
};

inline Sequence assemble_sequence(const std::vector<Matrix>& operational, const Matrix& lag, const Matrix& target) {
  Sequence s;
  for (std::size_t t = 0; t < operational.size(); ++t) {
    Matrix xt(operational[t].rows(), operational[t].cols() + 1);
    xt << operational[t], lag.col(static_cast<Eigen::Index>(t));
    s.x.push_back(std::move(xt));
  }
  s.target = target;
  return s;
}

// Per-year county x feature slices of a regular panel (e.g. min-max scaled).
inline std::vector<Matrix> year_slices(const panel::IndicatorPanel& p) {
  std::vector<Matrix> out;
  for (int y : p.years()) out.push_back(p.year_slice(y));
  return out;
}

inline nlohmann::json to_json(const LagScaler& s) { return {{"mean", s.mean}, {"std", s.std}}; }
inline LagScaler lag_scaler_from_json(const nlohmann::json& j) { return {j.at("mean"), j.at("std")}; }

}  // namespace herdcast::stgnn
