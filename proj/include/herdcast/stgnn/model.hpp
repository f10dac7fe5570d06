#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "herdcast/ad/tape.hpp"
#include "herdcast/core/error.hpp"
#include "herdcast/core/rng.hpp"
#include "herdcast/nn/dense.hpp"
#include "herdcast/nn/tensors.hpp"
#include "herdcast/stgnn/features.hpp"

namespace herdcast::stgnn {

struct StgnnConfig {
  int input_dim = 17;
  int spatial_layers = 2;
  int hidden = 32;
  int spatial_dim = 32;
  int key_dim = 16;
  int value_dim = 16;
  int head_hidden = 8;
  double dropout = 0.1;
  int window = 5;
  std::uint64_t seed = 0;
};

// GCN weights are F_in x F_out (H <- A H W, no bias). Attention projections
// map F_sp to d (query, key) and d_v (value). The head is d_v -> hidden -> 1.
struct StgnnParams {
  StgnnConfig config;
  std::vector<Matrix> gcn;
  Matrix wq, wk, wv;
  nn::Mlp head;

  std::vector<nn::TensorRef> tensors() {
    std::vector<nn::TensorRef> out;
    for (std::size_t l = 0; l < gcn.size(); ++l) out.push_back({"gcn." + std::to_string(l), &gcn[l]});
    out.push_back({"attention.query", &wq});
    out.push_back({"attention.key", &wk});
    out.push_back({"attention.value", &wv});
    head.append_tensors("head", out);
    return out;
  }
  std::vector<nn::ConstTensorRef> tensors() const {
    std::vector<nn::ConstTensorRef> out;
    for (std::size_t l = 0; l < gcn.size(); ++l) out.push_back({"gcn." + std::to_string(l), &gcn[l]});
    out.push_back({"attention.query", &wq});
    out.push_back({"attention.key", &wk});
    out.push_back({"attention.value", &wv});
    head.append_tensors("head", out);
    return out;
  }
};

inline std::vector<int> gcn_widths(const StgnnConfig& c) {
  std::vector<int> w = {c.input_dim};
  for (int l = 0; l + 1 < c.spatial_layers; ++l) w.push_back(c.hidden);
  w.push_back(c.spatial_dim);
  return w;
}

inline StgnnParams init_stgnn(const StgnnConfig& cfg) {
  if (cfg.spatial_layers < 1) throw ValidationError("at least one spatial layer is required");
  if (cfg.window < 1) throw ValidationError("attention window must be at least 1");
  if (cfg.dropout < 0.0 || cfg.dropout >= 1.0) throw ValidationError("dropout must be in [0, 1)");
  Rng rng(derive_seed(cfg.seed, {0x57a1}));
  StgnnParams p;
  p.config = cfg;
  const auto w = gcn_widths(cfg);
  for (std::size_t l = 0; l + 1 < w.size(); ++l) p.gcn.push_back(nn::glorot_matrix(w[l], w[l + 1], rng));
  p.wq = nn::glorot_matrix(cfg.spatial_dim, cfg.key_dim, rng);
  p.wk = nn::glorot_matrix(cfg.spatial_dim, cfg.key_dim, rng);
  p.wv = nn::glorot_matrix(cfg.spatial_dim, cfg.value_dim, rng);
  p.head = nn::Mlp::make({cfg.value_dim, cfg.head_hidden, 1}, rng);
  return p;
}

inline double parameter_squared_norm(const StgnnParams& p) { return nn::squared_norm(p.tensors()); }

// sigma(A H W) for one layer, outside any tape.
inline Matrix gcn_forward(const Matrix& h, const Matrix& a_norm, const Matrix& w, nn::Activation act) {
  Matrix out = a_norm * h * w;
  if (act == nn::Activation::relu) out = out.cwiseMax(0.0);
  return out;
}

struct AttentionResult {
  Eigen::RowVectorXd h;
  Vector alpha;  // over the window, oldest first
  int first = 0;  // history index of alpha(0)
};

inline Vector softmax(const Vector& logits) {
  const double m = logits.maxCoeff();
  Vector e = (logits.array() - m).exp();
  return e / e.sum();
}

// Attention for one county: H_hist is T x F_sp, t the query row.
inline AttentionResult temporal_attention(const Matrix& h_hist, int t, const Matrix& wq, const Matrix& wk,
                                          const Matrix& wv, int window) {
  if (window < 1) throw ValidationError("attention window must be at least 1");
  if (t < 0 || t >= h_hist.rows()) throw ValidationError("query index out of range");
  const int first = std::max(0, t - window + 1);
  const int w = t - first + 1;
  const Eigen::RowVectorXd q = h_hist.row(t) * wq;
  Vector logits(w);
  const double scale = 1.0 / std::sqrt(static_cast<double>(wq.cols()));
  for (int i = 0; i < w; ++i) logits(i) = q.dot(h_hist.row(first + i) * wk) * scale;
  AttentionResult r;
  r.alpha = softmax(logits);
  r.first = first;
  r.h = Eigen::RowVectorXd::Zero(wv.cols());
  for (int i = 0; i < w; ++i) r.h += r.alpha(i) * (h_hist.row(first + i) * wv);
  return r;
}

struct ForwardContext {
  bool train = false;
  std::uint64_t seed = 0;
  std::uint64_t epoch = 0;
  std::uint64_t sequence = 0;
};

namespace detail {

inline Matrix dropout_mask(Eigen::Index r, Eigen::Index c, double rate, std::uint64_t seed) {
  Rng rng(seed);
  const double keep = 1.0 - rate;
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = rng.uniform() < keep ? 1.0 / keep : 0.0;
  return m;
}

inline ad::Var maybe_dropout(const ad::Var& x, const StgnnParams& p, const ForwardContext& ctx, std::uint64_t layer,
                             std::uint64_t year) {
  if (!ctx.train || p.config.dropout <= 0.0) return x;
  const auto seed = derive_seed(ctx.seed, {ctx.epoch, layer, year, ctx.sequence});
  return ad::mask(x, dropout_mask(x.rows(), x.cols(), p.config.dropout, seed));
}

}  // namespace detail

// Predictions for every year on a tape: counties x years, standardized scale.
// vars must come from nn::bind(tape, params.tensors()).
inline ad::Var forward(ad::Tape& tape, const std::vector<ad::Var>& vars, const StgnnParams& p,
                       const std::vector<Matrix>& x, const Matrix& a_norm, const ForwardContext& ctx = {}) {
  if (x.empty()) throw ValidationError("no years to forward");
  const std::size_t L = p.gcn.size();
  const std::size_t iq = L, ik = L + 1, iv = L + 2, ihead = L + 3;
  const double scale = 1.0 / std::sqrt(static_cast<double>(p.config.key_dim));
  std::vector<ad::Var> q, k, v;
  for (std::size_t t = 0; t < x.size(); ++t) {
    if (x[t].cols() != p.config.input_dim)
      throw ValidationError("node features have " + std::to_string(x[t].cols()) + " columns, model expects " +
                            std::to_string(p.config.input_dim));
    if (x[t].rows() != a_norm.rows()) throw ValidationError("node count does not match the graph");
    ad::Var h = ad::constant(tape, x[t]);
    for (std::size_t l = 0; l < L; ++l) {
      h = ad::matmul(a_norm, ad::matmul(h, vars[l]));
      if (l + 1 < L) h = detail::maybe_dropout(ad::relu(h), p, ctx, l, t);
    }
    q.push_back(ad::matmul(h, vars[iq]));
    k.push_back(ad::matmul(h, vars[ik]));
    v.push_back(ad::matmul(h, vars[iv]));
  }
  std::vector<ad::Var> preds;
  for (std::size_t t = 0; t < x.size(); ++t) {
    const std::size_t first = t + 1 > static_cast<std::size_t>(p.config.window) ? t + 1 - static_cast<std::size_t>(p.config.window) : 0;
    std::vector<ad::Var> logits;
    for (std::size_t s = first; s <= t; ++s) logits.push_back(ad::scale(ad::row_sum(ad::hadamard(q[t], k[s])), scale));
    ad::Var alpha = ad::softmax_rows(ad::hconcat(logits));
    ad::Var ctx_vec = ad::mul_col(v[first], ad::cols(alpha, 0, 1));
    for (std::size_t s = first + 1; s <= t; ++s)
      ctx_vec = ad::add(ctx_vec, ad::mul_col(v[s], ad::cols(alpha, static_cast<Eigen::Index>(s - first), 1)));
    auto hook = [&](ad::Var hv, std::size_t i) { return detail::maybe_dropout(hv, p, ctx, 100 + i, t); };
    preds.push_back(nn::mlp_forward(p.head, vars, ihead, ctx_vec, hook));
  }
  return ad::hconcat(preds);
}

// Evaluation-mode predictions, counties x years.
inline Matrix predict(const StgnnParams& p, const std::vector<Matrix>& x, const Matrix& a_norm) {
  ad::Tape tape;
  const auto vars = nn::bind(tape, p.tensors());
  return forward(tape, vars, p, x, a_norm).value();
}

// Sum of squared errors over (county, year) pairs with mask(c, t) = 1.
inline ad::Var masked_sse(const ad::Var& pred, const Matrix& target, const Matrix& mask) {
  return ad::sum_squares(ad::mask(ad::sub(pred, ad::constant(*pred.tape(), target)), mask));
}

inline ad::Var regularizer(const std::vector<ad::Var>& vars, double lambda) {
  ad::Var r = ad::sum_squares(vars.front());
  for (std::size_t i = 1; i < vars.size(); ++i) r = ad::add(r, ad::sum_squares(vars[i]));
  return ad::scale(r, lambda);
}

inline Matrix year_mask(Eigen::Index counties, Eigen::Index years, const std::vector<int>& selected) {
  Matrix m = Matrix::Zero(counties, years);
  for (int t : selected) m.col(t).setOnes();
  return m;
}

// MSE over the masked pairs of every sequence plus lambda * ||Theta||^2.
template <class Ctx>
ad::Var stgnn_loss(ad::Tape& tape, const std::vector<ad::Var>& vars, const StgnnParams& p,
                   const std::vector<Sequence>& seqs, const Matrix& a_norm, const std::vector<int>& years,
                   double lambda, Ctx&& context_for) {
  ad::Var total;
  double count = 0.0;
  for (std::size_t s = 0; s < seqs.size(); ++s) {
    const ad::Var pred = forward(tape, vars, p, seqs[s].x, a_norm, context_for(s));
    const Matrix m = year_mask(pred.rows(), pred.cols(), years);
    const ad::Var sse = masked_sse(pred, seqs[s].target, m);
    total = s == 0 ? sse : ad::add(total, sse);
    count += m.sum();
  }
  if (count == 0.0) throw ValidationError("loss has no (county, year) pairs");
  return ad::add(ad::scale(total, 1.0 / count), regularizer(vars, lambda));
}

// Plain-value form used by tests and finite differences.
inline double loss_value(double mse, double lambda, double theta_sq) { return mse + lambda * theta_sq; }

inline nlohmann::json to_json(const StgnnParams& p) {
  const auto& c = p.config;
  return {{"config",
           {{"input_dim", c.input_dim},
            {"spatial_layers", c.spatial_layers},
            {"hidden", c.hidden},
            {"spatial_dim", c.spatial_dim},
            {"key_dim", c.key_dim},
            {"value_dim", c.value_dim},
            {"head_hidden", c.head_hidden},
            {"dropout", c.dropout},
            {"window", c.window},
            {"seed", c.seed}}},
          {"tensors", nn::tensors_to_json(p.tensors())}};
}

inline StgnnParams stgnn_from_json(const nlohmann::json& j) {
  const auto& jc = j.at("config");
  StgnnConfig c;
  c.input_dim = jc.at("input_dim");
  c.spatial_layers = jc.at("spatial_layers");
  c.hidden = jc.at("hidden");
  c.spatial_dim = jc.at("spatial_dim");
  c.key_dim = jc.at("key_dim");
  c.value_dim = jc.at("value_dim");
  c.head_hidden = jc.at("head_hidden");
  c.dropout = jc.at("dropout");
  c.window = jc.at("window");
  c.seed = jc.at("seed");
  StgnnParams p = init_stgnn(c);
  nn::tensors_from_json(j.at("tensors"), p.tensors());
  return p;
}

}  // namespace herdcast::stgnn
