#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "herdcast/core/error.hpp"
#include "herdcast/core/rng.hpp"
#include "herdcast/core/stats.hpp"
#include "herdcast/nn/adam.hpp"
#include "herdcast/nn/dense.hpp"
#include "herdcast/stgnn/features.hpp"
#include "herdcast/stgnn/metrics.hpp"

namespace herdcast::stgnn {

// Stacks the selected years of a sequence into (county, year) rows.
inline std::pair<Matrix, Vector> flatten_years(const Sequence& s, const std::vector<int>& years) {
  if (s.x.empty()) return {};
  const auto n = s.x.front().rows(), f = s.x.front().cols();
  Matrix x(n * static_cast<Eigen::Index>(years.size()), f);
  Vector y(x.rows());
  Eigen::Index r = 0;
  for (int t : years)
    for (Eigen::Index c = 0; c < n; ++c, ++r) {
      x.row(r) = s.x[static_cast<std::size_t>(t)].row(c);
      y(r) = s.target(c, t);
    }
  return {x, y};
}

struct FfnnConfig {
  std::vector<int> hidden = {32, 16};
  double learning_rate = 1e-3;
  int epochs = 800;
  double lambda = 1e-4;
  std::uint64_t seed = 0;
};

struct FfnnModel {
  nn::Mlp mlp;

  Vector predict(const Matrix& x) const {
    ad::Tape tape;
    std::vector<nn::ConstTensorRef> ts;
    mlp.append_tensors("ffnn", ts);
    const auto vars = nn::bind(tape, ts);
    return nn::mlp_forward(mlp, vars, 0, ad::constant(tape, x)).value().col(0);
  }
};

// Full-batch Adam on per-row features: no graph, no history.
inline FfnnModel train_ffnn(const Matrix& x, const Vector& y, const FfnnConfig& cfg) {
  if (x.rows() == 0 || x.rows() != y.size()) throw ValidationError("FFNN needs matching non-empty features and targets");
  Rng rng(derive_seed(cfg.seed, {0xff22}));
  std::vector<int> widths = {static_cast<int>(x.cols())};
  widths.insert(widths.end(), cfg.hidden.begin(), cfg.hidden.end());
  widths.push_back(1);
  FfnnModel m{nn::Mlp::make(widths, rng)};
  nn::Adam adam(nn::AdamConfig{cfg.learning_rate});
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    ad::Tape tape;
    std::vector<nn::TensorRef> refs;
    m.mlp.append_tensors("ffnn", refs);
    std::vector<nn::ConstTensorRef> crefs;
    m.mlp.append_tensors("ffnn", crefs);
    const auto vars = nn::bind(tape, crefs);
    const ad::Var pred = nn::mlp_forward(m.mlp, vars, 0, ad::constant(tape, x));
    const Matrix target = y;
    ad::Var loss = ad::scale(ad::sum_squares(ad::sub(pred, ad::constant(tape, target))), 1.0 / static_cast<double>(x.rows()));
    if (cfg.lambda > 0.0) {
      ad::Var reg = ad::sum_squares(vars.front());
      for (std::size_t i = 1; i < vars.size(); ++i) reg = ad::add(reg, ad::sum_squares(vars[i]));
      loss = ad::add(loss, ad::scale(reg, cfg.lambda));
    }
    if (!std::isfinite(loss.value()(0, 0))) throw NumericError("FFNN loss became non-finite at epoch " + std::to_string(epoch + 1));
    tape.backward(loss);
    std::vector<Matrix> grads;
    for (const auto& v : vars) grads.push_back(tape.gradient(v));
    adam.step(refs, grads);
  }
  return m;
}

inline double median_spacing(const Matrix& x) {
  std::vector<double> d;
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = i + 1; j < x.rows(); ++j) d.push_back((x.row(i) - x.row(j)).norm());
  if (d.empty()) return 1.0;
  const double m = stats::percentile(d, 50.0);
  return m > 0.0 ? m : 1.0;
}

// Nadaraya-Watson with a Gaussian kernel; weights are computed in log space
// so tiny bandwidths stay finite. bandwidth <= 0 selects the median heuristic.
inline Vector gkr_predict(const Matrix& train_x, const Vector& train_y, const Matrix& query, double bandwidth = 0.0) {
  if (train_x.rows() == 0 || train_x.rows() != train_y.size()) throw ValidationError("GKR needs matching training data");
  if (query.cols() != train_x.cols()) throw ValidationError("GKR query dimension mismatch");
  const double h = bandwidth > 0.0 ? bandwidth : median_spacing(train_x);
  Vector out(query.rows());
  std::vector<double> logw(static_cast<std::size_t>(train_x.rows()));
  for (Eigen::Index q = 0; q < query.rows(); ++q) {
    double mx = -std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < train_x.rows(); ++i) {
      logw[static_cast<std::size_t>(i)] = -(query.row(q) - train_x.row(i)).squaredNorm() / (2.0 * h * h);
      mx = std::max(mx, logw[static_cast<std::size_t>(i)]);
    }
    double num = 0.0, den = 0.0;
    for (Eigen::Index i = 0; i < train_x.rows(); ++i) {
      const double w = std::exp(logw[static_cast<std::size_t>(i)] - mx);
      num += w * train_y(i);
      den += w;
    }
    out(q) = num / den;
  }
  return out;
}

struct BaselineReport {
  MetricsReport ffnn_train, ffnn_test;
  MetricsReport gkr_train, gkr_test;
};

inline MetricsReport scaled_metrics(const Vector& y_std, const Vector& p_std, const LagScaler& s) {
  std::vector<double> y, p;
  for (Eigen::Index i = 0; i < y_std.size(); ++i) {
    y.push_back(s.inverse(y_std(i)));
    p.push_back(s.inverse(p_std(i)));
  }
  return metrics(y, p);
}

// Both baselines fit on the training years of the real sequence and are
// scored on the held-out years (validation and test pooled).
inline BaselineReport run_baselines(const Sequence& real, const std::vector<int>& train_years,
                                    const std::vector<int>& held_out, const LagScaler& scaler, const FfnnConfig& cfg) {
  const auto [xtr, ytr] = flatten_years(real, train_years);
  BaselineReport r;
  const FfnnModel f = train_ffnn(xtr, ytr, cfg);
  r.ffnn_train = scaled_metrics(ytr, f.predict(xtr), scaler);
  r.gkr_train = scaled_metrics(ytr, gkr_predict(xtr, ytr, xtr), scaler);
  if (!held_out.empty()) {
    const auto [xte, yte] = flatten_years(real, held_out);
    r.ffnn_test = scaled_metrics(yte, f.predict(xte), scaler);
    r.gkr_test = scaled_metrics(yte, gkr_predict(xtr, ytr, xte), scaler);
  }
  return r;
}

inline nlohmann::json to_json(const BaselineReport& r) {
  return {{"ffnn", {{"train", to_json(r.ffnn_train)}, {"held_out", to_json(r.ffnn_test)}}},
          {"gkr", {{"train", to_json(r.gkr_train)}, {"held_out", to_json(r.gkr_test)}}}};
}

}  // namespace herdcast::stgnn
