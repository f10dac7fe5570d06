#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "herdcast/ad/tape.hpp"
#include "herdcast/core/error.hpp"
#include "herdcast/core/rng.hpp"
#include "herdcast/nn/adam.hpp"
#include "herdcast/nn/dense.hpp"

namespace herdcast::vae {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct VaeConfig {
  int input_dim = 16;
  std::vector<int> hidden = {64, 32};  // encoder widths; decoder mirrors them
  int latent_dim = 80;
  double beta = 1.0;
  double learning_rate = 1e-3;
  int epochs = 300;
  int batch_size = 32;
  std::uint64_t seed = 0;
  double validation_fraction = 0.2;
};

struct LatentGaussian {
  Vector mu;
  Vector log_var;
};

// Encoder D -> hidden... -> 2L (mean and log-variance halves); decoder L -> mirrored hidden -> D.
struct VaeParams {
  VaeConfig config;
  nn::Mlp encoder;
  nn::Mlp decoder;

  int latent_dim() const { return config.latent_dim; }
  int input_dim() const { return config.input_dim; }

  std::vector<nn::TensorRef> tensors() {
    std::vector<nn::TensorRef> out;
    encoder.append_tensors("encoder", out);
    decoder.append_tensors("decoder", out);
    return out;
  }
  std::vector<nn::ConstTensorRef> tensors() const {
    std::vector<nn::ConstTensorRef> out;
    encoder.append_tensors("encoder", out);
    decoder.append_tensors("decoder", out);
    return out;
  }
};

inline VaeParams init_vae(const VaeConfig& cfg) {
  if (cfg.input_dim < 1 || cfg.latent_dim < 1) throw ValidationError("VAE dimensions must be positive");
  Rng rng(derive_seed(cfg.seed, {0x1a17}));
  std::vector<int> enc = {cfg.input_dim};
  enc.insert(enc.end(), cfg.hidden.begin(), cfg.hidden.end());
  enc.push_back(2 * cfg.latent_dim);
  std::vector<int> dec = {cfg.latent_dim};
  dec.insert(dec.end(), cfg.hidden.rbegin(), cfg.hidden.rend());
  dec.push_back(cfg.input_dim);
  VaeParams p{cfg, nn::Mlp::make(enc, rng), nn::Mlp::make(dec, rng)};
  return p;
}

// Zero weights and biases everywhere, for tests and as a neutral start.
inline VaeParams zero_vae(const VaeConfig& cfg) {
  VaeParams p = init_vae(cfg);
  for (auto& t : p.tensors()) t.value->setZero();
  return p;
}

namespace detail {

struct Forward {
  ad::Var mu, log_var, recon_sq, kl, loss, x_hat;
};

// Batch forward on a tape. eps has one row per sample.
inline Forward forward(ad::Tape& tape, const std::vector<ad::Var>& vars, const VaeParams& p, const Matrix& x,
                       const Matrix& eps, double beta) {
  const auto L = p.latent_dim();
  const double batch = static_cast<double>(x.rows());
  ad::Var xv = ad::constant(tape, x);
  ad::Var enc = nn::mlp_forward(p.encoder, vars, 0, xv);
  ad::Var mu = ad::cols(enc, 0, L);
  ad::Var log_var = ad::cols(enc, L, L);
  ad::Var sigma = ad::exp(ad::scale(log_var, 0.5));
  ad::Var z = ad::add(mu, ad::hadamard(sigma, ad::constant(tape, eps)));
  ad::Var x_hat = nn::mlp_forward(p.decoder, vars, p.encoder.tensor_count(), z);
  ad::Var recon = ad::scale(ad::sum_squares(ad::sub(xv, x_hat)), 1.0 / batch);
  ad::Var kl_terms = ad::add_scalar(ad::sub(ad::add(ad::square(mu), ad::exp(log_var)), log_var), -1.0);
  ad::Var kl = ad::scale(ad::sum(kl_terms), 0.5 / batch);
  ad::Var loss = ad::add(recon, ad::scale(kl, beta));
  return {mu, log_var, recon, kl, loss, x_hat};
}

inline void check_dim(Eigen::Index got, Eigen::Index want, const char* what) {
  if (got != want)
    throw ValidationError(std::string(what) + " has dimension " + std::to_string(got) + ", expected " +
                          std::to_string(want));
}

}  // namespace detail

inline std::pair<Matrix, Matrix> encode_batch(const VaeParams& p, const Matrix& x) {
  detail::check_dim(x.cols(), p.input_dim(), "input");
  ad::Tape tape;
  auto vars = nn::bind(tape, p.tensors());
  ad::Var enc = nn::mlp_forward(p.encoder, vars, 0, ad::constant(tape, x));
  const auto L = p.latent_dim();
  return {enc.value().leftCols(L), enc.value().rightCols(L)};
}

inline LatentGaussian encode(const Vector& x, const VaeParams& p) {
  if (!x.allFinite()) throw ValidationError("encode: non-finite input");
  auto [mu, lv] = encode_batch(p, x.transpose());
  return {mu.row(0).transpose(), lv.row(0).transpose()};
}

inline Vector reparameterize(const LatentGaussian& g, const Vector& eps) {
  detail::check_dim(eps.size(), g.mu.size(), "eps");
  detail::check_dim(g.log_var.size(), g.mu.size(), "log_var");
  return g.mu.array() + (0.5 * g.log_var.array()).exp() * eps.array();
}

inline Matrix decode_batch(const VaeParams& p, const Matrix& z) {
  detail::check_dim(z.cols(), p.latent_dim(), "latent");
  ad::Tape tape;
  auto vars = nn::bind(tape, p.tensors());
  return nn::mlp_forward(p.decoder, vars, p.encoder.tensor_count(), ad::constant(tape, z)).value();
}

inline Vector decode(const Vector& z, const VaeParams& p) { return decode_batch(p, z.transpose()).row(0).transpose(); }

inline double kl_divergence(const LatentGaussian& g) {
  return 0.5 * (g.mu.array().square() + g.log_var.array().exp() - g.log_var.array() - 1.0).sum();
}

struct LossBreakdown {
  double total = 0.0;
  double reconstruction = 0.0;  // mean over batch of ||x - x_hat||^2
  double kl = 0.0;              // mean over batch of the closed-form KL
};

inline LossBreakdown vae_loss(const Matrix& batch, const VaeParams& p, double beta, const Matrix& eps) {
  if (!(beta >= 0.0)) throw ValidationError("beta must be nonnegative");
  detail::check_dim(batch.cols(), p.input_dim(), "batch");
  detail::check_dim(eps.cols(), p.latent_dim(), "eps");
  ad::Tape tape;
  auto vars = nn::bind(tape, p.tensors());
  auto f = detail::forward(tape, vars, p, batch, eps, beta);
  return {f.loss.value()(0, 0), f.recon_sq.value()(0, 0), f.kl.value()(0, 0)};
}

// Loss plus gradients for every tensor, in tensors() order.
inline std::pair<LossBreakdown, std::vector<Matrix>> vae_loss_and_gradients(const Matrix& batch, const VaeParams& p,
                                                                             double beta, const Matrix& eps) {
  ad::Tape tape;
  auto vars = nn::bind(tape, p.tensors());
  auto f = detail::forward(tape, vars, p, batch, eps, beta);
  tape.backward(f.loss);
  std::vector<Matrix> grads;
  for (const auto& v : vars) grads.push_back(tape.gradient(v));
  return {{f.loss.value()(0, 0), f.recon_sq.value()(0, 0), f.kl.value()(0, 0)}, std::move(grads)};
}

// Reconstruction R^2 through the posterior mean: 1 - SSE / SST over all
// entries, with SST taken about the per-feature means.
inline double reconstruction_accuracy(const VaeParams& p, const Matrix& x) {
  auto [mu, lv] = encode_batch(p, x);
  const Matrix x_hat = decode_batch(p, mu);
  const double sse = (x - x_hat).squaredNorm();
  const double sst = (x.rowwise() - x.colwise().mean()).squaredNorm();
  if (sst == 0.0) return sse == 0.0 ? 1.0 : 0.0;
  return 1.0 - sse / sst;
}

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double train_reconstruction = 0.0;
  double train_kl = 0.0;
  double val_loss = 0.0;
  double train_accuracy = 0.0;
  double val_accuracy = 0.0;
};

struct TrainingLog {
  std::vector<EpochRecord> epochs;
  int best_epoch = -1;
  std::vector<std::size_t> train_rows, val_rows;
};

struct TrainResult {
  VaeParams params;
  TrainingLog log;
};

// Minibatch training with Adam; returns the checkpoint with the lowest
// validation loss (validation loss uses eps = 0, i.e. the posterior mean).
inline TrainResult train_vae(const Matrix& rows, VaeConfig cfg) {
  if (rows.rows() < 2) throw ValidationError("VAE training needs at least two rows");
  if (!(cfg.validation_fraction > 0.0 && cfg.validation_fraction < 1.0))
    throw ValidationError("validation fraction must lie in (0, 1)");
  if (cfg.batch_size < 1) throw ValidationError("batch size must be positive");
  cfg.input_dim = static_cast<int>(rows.cols());

  TrainResult result{init_vae(cfg), {}};
  auto& log = result.log;
  const auto n = static_cast<std::size_t>(rows.rows());
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  {
    Rng split(derive_seed(cfg.seed, {0x5b17}));
    std::shuffle(perm.begin(), perm.end(), split.engine());
  }
  auto n_val = static_cast<std::size_t>(std::llround(cfg.validation_fraction * static_cast<double>(n)));
  n_val = std::clamp<std::size_t>(n_val, 1, n - 1);
  log.val_rows.assign(perm.begin(), perm.begin() + static_cast<long>(n_val));
  log.train_rows.assign(perm.begin() + static_cast<long>(n_val), perm.end());
  std::sort(log.val_rows.begin(), log.val_rows.end());
  std::sort(log.train_rows.begin(), log.train_rows.end());

  auto gather = [&](const std::vector<std::size_t>& idx) {
    Matrix m(static_cast<Eigen::Index>(idx.size()), rows.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = rows.row(static_cast<Eigen::Index>(idx[i]));
    return m;
  };
  const Matrix train = gather(log.train_rows);
  const Matrix val = gather(log.val_rows);
  const Matrix val_eps = Matrix::Zero(val.rows(), cfg.latent_dim);

  nn::Adam adam({cfg.learning_rate});
  VaeParams& params = result.params;
  VaeParams best = params;
  double best_val = std::numeric_limits<double>::infinity();

  std::vector<std::size_t> order(static_cast<std::size_t>(train.rows()));
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(cfg.seed, {0xe90c, static_cast<std::uint64_t>(epoch)}));
    std::shuffle(order.begin(), order.end(), rng.engine());
    double loss_sum = 0.0, recon_sum = 0.0, kl_sum = 0.0;
    int batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size), ++batch_index) {
      const auto stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      Matrix batch(static_cast<Eigen::Index>(stop - start), train.cols());
      for (std::size_t i = start; i < stop; ++i)
        batch.row(static_cast<Eigen::Index>(i - start)) = train.row(static_cast<Eigen::Index>(order[i]));
      const Matrix eps = rng.normal_matrix(batch.rows(), cfg.latent_dim);
      auto [loss, grads] = vae_loss_and_gradients(batch, params, cfg.beta, eps);
      if (!std::isfinite(loss.total))
        throw NumericError("VAE loss is not finite at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(batch_index) + " (reconstruction " + std::to_string(loss.reconstruction) +
                           ", kl " + std::to_string(loss.kl) + ")");
      adam.step(params.tensors(), grads);
      const double w = static_cast<double>(batch.rows());
      loss_sum += loss.total * w;
      recon_sum += loss.reconstruction * w;
      kl_sum += loss.kl * w;
    }
    const double nt = static_cast<double>(train.rows());
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / nt;
    rec.train_reconstruction = recon_sum / nt;
    rec.train_kl = kl_sum / nt;
    rec.val_loss = vae_loss(val, params, cfg.beta, val_eps).total;
    rec.train_accuracy = reconstruction_accuracy(params, train);
    rec.val_accuracy = reconstruction_accuracy(params, val);
    if (!std::isfinite(rec.val_loss))
      throw NumericError("VAE validation loss is not finite at epoch " + std::to_string(epoch));
    if (rec.val_loss < best_val) {
      best_val = rec.val_loss;
      best = params;
      log.best_epoch = epoch;
    }
    log.epochs.push_back(rec);
  }
  if (log.best_epoch >= 0) result.params = best;
  return result;
}

inline Matrix clip_unit(Matrix m) { return m.cwiseMax(0.0).cwiseMin(1.0); }

inline Matrix sample_unconditional(const VaeParams& p, std::size_t n, std::uint64_t seed) {
  if (n == 0) return Matrix(0, p.input_dim());
  Rng rng(derive_seed(seed, {0x5a3e}));
  const Matrix z = rng.normal_matrix(static_cast<Eigen::Index>(n), p.latent_dim());
  return clip_unit(decode_batch(p, z));
}

struct Provenance {
  bool conditional = true;
  std::size_t source = 0;
  std::size_t replicate = 0;

  std::string tag() const {
    return conditional ? "vae:" + std::to_string(source) + "," + std::to_string(replicate) : "vae:unconditional";
  }
};

struct AugmentedSet {
  std::size_t real_rows = 0;
  Matrix synthetic;
  std::vector<Provenance> provenance;

  std::size_t total_rows() const { return real_rows + static_cast<std::size_t>(synthetic.rows()); }
};

// K decoded posterior perturbations per real row; row layout is replicate-major
// (all sources for k = 0, then k = 1, ...). noise_scale multiplies eps.
inline AugmentedSet augment_conditional(const VaeParams& p, const Matrix& rows, int replicates, std::uint64_t seed,
                                        double noise_scale = 1.0) {
  if (replicates < 1) throw ValidationError("replicates must be at least 1");
  auto [mu, lv] = encode_batch(p, rows);
  const Matrix sigma = (0.5 * lv.array()).exp();
  const auto n = rows.rows();
  const auto L = p.latent_dim();
  Matrix z(n * replicates, L);
  AugmentedSet out;
  out.real_rows = static_cast<std::size_t>(n);
  for (int k = 0; k < replicates; ++k) {
    for (Eigen::Index i = 0; i < n; ++i) {
      Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(k)}));
      Eigen::RowVectorXd eps(L);
      for (Eigen::Index j = 0; j < L; ++j) eps(j) = rng.normal() * noise_scale;
      z.row(k * n + i) = mu.row(i).array() + sigma.row(i).array() * eps.array();
      out.provenance.push_back({true, static_cast<std::size_t>(i), static_cast<std::size_t>(k)});
    }
  }
  out.synthetic = clip_unit(decode_batch(p, z));
  return out;
}

inline nlohmann::json to_json(const VaeParams& p) {
  const auto& c = p.config;
  return {{"schema_version", 1},
          {"kind", "vae"},
          {"config",
           {{"input_dim", c.input_dim},
            {"hidden", c.hidden},
            {"latent_dim", c.latent_dim},
            {"beta", c.beta},
            {"learning_rate", c.learning_rate},
            {"epochs", c.epochs},
            {"batch_size", c.batch_size},
            {"seed", c.seed},
            {"validation_fraction", c.validation_fraction},
            {"activation", "relu"},
            {"output", "linear"}}},
          {"encoder_widths", p.encoder.widths()},
          {"decoder_widths", p.decoder.widths()},
          {"tensors", nn::tensors_to_json(p.tensors())}};
}

inline VaeParams vae_from_json(const nlohmann::json& j) {
  if (j.at("schema_version").get<int>() != 1) throw ValidationError("unsupported VAE schema version");
  const auto& c = j.at("config");
  VaeConfig cfg;
  cfg.input_dim = c.at("input_dim");
  cfg.hidden = c.at("hidden").get<std::vector<int>>();
  cfg.latent_dim = c.at("latent_dim");
  cfg.beta = c.at("beta");
  cfg.learning_rate = c.at("learning_rate");
  cfg.epochs = c.at("epochs");
  cfg.batch_size = c.at("batch_size");
  cfg.seed = c.at("seed");
  cfg.validation_fraction = c.at("validation_fraction");
  VaeParams p = init_vae(cfg);
  nn::tensors_from_json(j.at("tensors"), p.tensors());
  return p;
}

}  // namespace herdcast::vae
