#pragma once

#include <cmath>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "herdcast/core/csv.hpp"
#include "herdcast/core/error.hpp"
#include "herdcast/nn/adam.hpp"
#include "herdcast/nn/gradcheck.hpp"
#include "herdcast/stgnn/metrics.hpp"
#include "herdcast/stgnn/model.hpp"

namespace herdcast::stgnn {

struct TrainConfig {
  double learning_rate = 1e-3;
  int epochs = 800;
  double lambda = 1e-4;
  std::uint64_t seed = 0;
  // Year column indices; disjoint.
  std::vector<int> train_years;
  std::vector<int> val_years;
  std::vector<int> test_years;
};

// Default split over T years: last for test, the one before for validation.
inline void default_split(TrainConfig& cfg, int years) {
  cfg.train_years.clear();
  cfg.val_years.clear();
  cfg.test_years.clear();
  if (years >= 3) {
    for (int t = 0; t < years - 2; ++t) cfg.train_years.push_back(t);
    cfg.val_years = {years - 2};
    cfg.test_years = {years - 1};
  } else {
    for (int t = 0; t < years; ++t) cfg.train_years.push_back(t);
  }
}

inline void check_split(const TrainConfig& cfg, int years) {
  std::vector<int> seen(static_cast<std::size_t>(years), 0);
  for (const auto* part : {&cfg.train_years, &cfg.val_years, &cfg.test_years})
    for (int t : *part) {
      if (t < 0 || t >= years) throw ValidationError("split year index " + std::to_string(t) + " out of range");
      if (seen[static_cast<std::size_t>(t)]++) throw ValidationError("train/validation/test splits overlap");
    }
  if (cfg.train_years.empty()) throw ValidationError("no training years");
  if (cfg.lambda < 0.0) throw ValidationError("weight decay must be nonnegative");
}

struct StgnnEpoch {
  int epoch = 0;
  double train_loss = 0.0;
  double train_r2 = 0.0;
  double val_r2 = 0.0;
};

struct SplitMetrics {
  MetricsReport train, val, test;
};

struct StgnnTrainResult {
  StgnnParams params;
  std::vector<StgnnEpoch> log;
  int best_epoch = 0;
  SplitMetrics metrics;
};

// Metrics on the original score scale for the selected years of one sequence.
inline MetricsReport split_metrics(const Matrix& pred_std, const Matrix& target_std, const std::vector<int>& years,
                                   const LagScaler& scaler) {
  std::vector<double> y, yh;
  for (int t : years)
    for (Eigen::Index c = 0; c < pred_std.rows(); ++c) {
      y.push_back(scaler.inverse(target_std(c, t)));
      yh.push_back(scaler.inverse(pred_std(c, t)));
    }
  return metrics(y, yh);
}

// Full-batch Adam: one step per epoch over the training years of every
// sequence. Sequence 0 is the real panel and drives validation.
inline StgnnTrainResult train_stgnn(StgnnParams params, const std::vector<Sequence>& seqs, const Matrix& a_norm,
                                    const LagScaler& scaler, const TrainConfig& cfg) {
  if (seqs.empty()) throw ValidationError("no training sequences");
  const int T = static_cast<int>(seqs.front().x.size());
  check_split(cfg, T);
  for (const auto& s : seqs)
    if (static_cast<int>(s.x.size()) != T || s.target.cols() != T) throw ValidationError("sequences differ in length");

  StgnnTrainResult res;
  nn::Adam adam(nn::AdamConfig{cfg.learning_rate});
  const auto& real = seqs.front();
  const std::vector<int>& monitor = cfg.val_years.empty() ? cfg.train_years : cfg.val_years;
  auto evaluate = [&](const StgnnParams& p) {
    const Matrix pred = predict(p, real.x, a_norm);
    return std::pair{split_metrics(pred, real.target, cfg.train_years, scaler),
                     split_metrics(pred, real.target, monitor, scaler)};
  };

  StgnnParams best = params;
  double best_val = std::numeric_limits<double>::infinity();
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    ad::Tape tape;
    const auto vars = nn::bind(tape, params.tensors());
    const auto ctx = [&](std::size_t s) {
      return ForwardContext{true, cfg.seed, static_cast<std::uint64_t>(epoch), static_cast<std::uint64_t>(s)};
    };
    const ad::Var loss = stgnn_loss(tape, vars, params, seqs, a_norm, cfg.train_years, cfg.lambda, ctx);
    const double lv = loss.value()(0, 0);
    if (!std::isfinite(lv)) throw NumericError("STGNN loss became non-finite at epoch " + std::to_string(epoch));
    tape.backward(loss);
    std::vector<Matrix> grads;
    for (const auto& v : vars) grads.push_back(tape.gradient(v));
    adam.step(params.tensors(), grads);

    const auto [tr, va] = evaluate(params);
    res.log.push_back({epoch, lv, tr.r2, va.r2});
    if (va.mse < best_val) {
      best_val = va.mse;
      best = params;
      res.best_epoch = epoch;
    }
  }
  if (cfg.epochs > 0) params = best;
  res.params = params;
  const Matrix pred = predict(res.params, real.x, a_norm);
  res.metrics.train = split_metrics(pred, real.target, cfg.train_years, scaler);
  if (!cfg.val_years.empty()) res.metrics.val = split_metrics(pred, real.target, cfg.val_years, scaler);
  if (!cfg.test_years.empty()) res.metrics.test = split_metrics(pred, real.target, cfg.test_years, scaler);
  return res;
}

inline void write_epoch_log(std::ostream& out, const std::vector<StgnnEpoch>& log) {
  csv::write_row(out, {"epoch", "train_loss", "train_r2", "val_r2"});
  for (const auto& e : log)
    csv::write_row(out, {std::to_string(e.epoch), csv::format(e.train_loss), csv::format(e.train_r2), csv::format(e.val_r2)});
}

inline nlohmann::json to_json(const SplitMetrics& m) {
  return {{"train", to_json(m.train)}, {"validation", to_json(m.val)}, {"test", to_json(m.test)}};
}

// Analytic loss gradient (dropout off) against central differences.
inline nn::GradCheckReport gradient_check(StgnnParams p, const std::vector<Sequence>& seqs, const Matrix& a_norm,
                                          const std::vector<int>& years, double lambda, double step = 1e-5) {
  const auto eval_ctx = [](std::size_t) { return ForwardContext{}; };
  ad::Tape tape;
  const auto vars = nn::bind(tape, p.tensors());
  const ad::Var loss = stgnn_loss(tape, vars, p, seqs, a_norm, years, lambda, eval_ctx);
  tape.backward(loss);
  std::vector<Matrix> grads;
  for (const auto& v : vars) grads.push_back(tape.gradient(v));
  auto value = [&]() {
    ad::Tape t2;
    const auto v2 = nn::bind(t2, p.tensors());
    return stgnn_loss(t2, v2, p, seqs, a_norm, years, lambda, eval_ctx).value()(0, 0);
  };
  return nn::check_gradients(p.tensors(), grads, value, step);
}

}  // namespace herdcast::stgnn
