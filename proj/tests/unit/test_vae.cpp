#include <gtest/gtest.h>

#include "herdcast/nn/gradcheck.hpp"
#include "herdcast/panel/fixture.hpp"
#include "herdcast/panel/scaler.hpp"
#include "herdcast/vae/utility.hpp"
#include "herdcast/vae/vae.hpp"
#include "herdcast/vae/validation.hpp"
#include "support.hpp"

using namespace herdcast;
using namespace herdcast::vae;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

namespace {

// E_q[log q(z) - log p(z)] by sampling z ~ q.
double kl_monte_carlo(const LatentGaussian& g, int draws, Rng& rng) {
  double s = 0.0;
  const auto L = g.mu.size();
  for (int n = 0; n < draws; ++n) {
    double lq = 0.0, lp = 0.0;
    for (Eigen::Index j = 0; j < L; ++j) {
      const double sd = std::exp(0.5 * g.log_var(j));
      const double e = rng.normal();
      const double z = g.mu(j) + sd * e;
      lq += -0.5 * e * e - std::log(sd);
      lp += -0.5 * z * z;
    }
    s += lq - lp;
  }
  return s / draws;
}

Matrix unit_rows(int n, int d, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) m(i, j) = rng.uniform();
  return m;
}

}  // namespace

TEST(Kl, NonnegativeOnRandomInputs) {
  Rng rng(1);
  for (int i = 0; i < 500; ++i) {
    LatentGaussian g{rng.normal_matrix(6, 1).col(0) * 3.0, rng.normal_matrix(6, 1).col(0) * 4.0};
    EXPECT_GE(kl_divergence(g), -1e-12);
  }
  EXPECT_EQ(kl_divergence({Vector::Zero(3), Vector::Zero(3)}), 0.0);
}

TEST(Kl, ClosedFormMatchesMonteCarlo) {
  Rng rng(2);
  for (int i = 0; i < 20; ++i) {
    LatentGaussian g{rng.normal_matrix(3, 1).col(0), rng.normal_matrix(3, 1).col(0) * 0.5};
    const double exact = kl_divergence(g);
    if (exact < 0.05) continue;  // relative error is meaningless near zero
    EXPECT_NEAR(kl_monte_carlo(g, 100000, rng) / exact, 1.0, 0.02);
  }
}

TEST(VaeLoss, GradientsMatchFiniteDifferences) {
  VaeConfig cfg;
  cfg.input_dim = 5;
  cfg.hidden = {6, 4};
  cfg.latent_dim = 3;
  cfg.seed = 9;
  VaeParams p = init_vae(cfg);
  Rng rng(4);
  const Matrix batch = unit_rows(4, 5, 5);
  const Matrix eps = rng.normal_matrix(4, 3);
  const auto [loss, grads] = vae_loss_and_gradients(batch, p, 0.7, eps);
  EXPECT_NEAR(loss.total, loss.reconstruction + 0.7 * loss.kl, 1e-12);
  const auto rep = nn::check_gradients(p.tensors(), grads, [&] { return vae_loss(batch, p, 0.7, eps).total; }, 1e-5);
  EXPECT_LT(rep.max_relative_error, 1e-4);
}

TEST(VaeLoss, ZeroParamsGiveZeroKlAndMeanSquaredInput) {
  VaeConfig cfg;
  cfg.input_dim = 4;
  cfg.latent_dim = 2;
  const VaeParams p = zero_vae(cfg);
  const Matrix x = unit_rows(3, 4, 1);
  const auto l = vae_loss(x, p, 1.0, Matrix::Zero(3, 2));
  EXPECT_EQ(l.kl, 0.0);
  EXPECT_NEAR(l.reconstruction, x.squaredNorm() / 3.0, 1e-12);
  EXPECT_THROW(vae_loss(x, p, -1.0, Matrix::Zero(3, 2)), ValidationError);
}

TEST(Augment, RowCountsClippingAndProvenance) {
  const auto fx = panel::generate_fixture({});
  const Matrix x = panel::minmax_fit_apply(fx).values;
  VaeConfig cfg;
  cfg.seed = 3;
  const VaeParams p = init_vae(cfg);
  const auto aug = augment_conditional(p, x, 4, 11);
  EXPECT_EQ(aug.real_rows, 130u);
  EXPECT_EQ(aug.total_rows(), 650u);
  EXPECT_EQ(aug.provenance.size(), 520u);
  EXPECT_GE(aug.synthetic.minCoeff(), 0.0);
  EXPECT_LE(aug.synthetic.maxCoeff(), 1.0);
  EXPECT_EQ(aug.provenance[131].tag(), "vae:1,1");
  const auto again = augment_conditional(p, x, 4, 11);
  EXPECT_EQ(support::max_abs(aug.synthetic - again.synthetic), 0.0);
  EXPECT_THROW(augment_conditional(p, x, 0, 11), ValidationError);
  const Matrix u = sample_unconditional(p, 10, 1);
  EXPECT_EQ(u.rows(), 10);
  EXPECT_GE(u.minCoeff(), 0.0);
  EXPECT_LE(u.maxCoeff(), 1.0);
}

TEST(Train, LowRankPanelReconstructsAccurately) {
  const auto fx = panel::generate_fixture({26, 2021, 2025, 7, 1, 0.0});
  const Matrix x = panel::minmax_fit_apply(fx).values;
  VaeConfig cfg;
  cfg.latent_dim = 4;
  cfg.beta = 1e-3;
  cfg.epochs = 200;
  cfg.learning_rate = 3e-3;
  cfg.seed = 5;
  const auto r = train_vae(x, cfg);
  ASSERT_EQ(r.log.epochs.size(), 200u);
  EXPECT_EQ(r.log.train_rows.size() + r.log.val_rows.size(), 130u);
  EXPECT_EQ(r.log.val_rows.size(), 26u);
  EXPECT_GT(r.log.epochs[r.log.best_epoch].val_accuracy, 0.95);
  const auto again = train_vae(x, cfg);
  EXPECT_EQ(support::max_abs(decode_batch(r.params, Matrix::Ones(2, 4)) - decode_batch(again.params, Matrix::Ones(2, 4))),
            0.0);
}

TEST(Train, RejectsBadConfig) {
  VaeConfig cfg;
  cfg.validation_fraction = 1.0;
  EXPECT_THROW(train_vae(unit_rows(10, 16, 1), cfg), ValidationError);
  EXPECT_THROW(train_vae(unit_rows(1, 16, 1), VaeConfig{}), ValidationError);
}

TEST(Serialization, RoundTripPreservesDecoder) {
  VaeConfig cfg;
  cfg.input_dim = 5;
  cfg.latent_dim = 3;
  const VaeParams p = init_vae(cfg);
  const VaeParams q = vae_from_json(to_json(p));
  const Matrix z = Rng(1).normal_matrix(4, 3);
  EXPECT_EQ(support::max_abs(decode_batch(p, z) - decode_batch(q, z)), 0.0);
}

TEST(Validation, MomentsAndCorrelationGap) {
  const Matrix a = unit_rows(40, 3, 1);
  const auto gaps = validate_moments(a, a);
  ASSERT_EQ(gaps.size(), 3u);
  for (const auto& g : gaps) EXPECT_EQ(g.mean_gap, 0.0);
  EXPECT_NEAR(corr_frobenius(a, a), 0.0, 1e-12);
  Matrix shifted = a.array() + 0.25;
  EXPECT_NEAR(validate_moments(a, shifted)[1].mean_gap, 0.25, 1e-12);
  EXPECT_NEAR(validate_moments(a, shifted)[1].variance_gap, 0.0, 1e-12);
}

TEST(Validation, MmdMatchesTripleLoop) {
  const Matrix a = unit_rows(12, 4, 2), b = unit_rows(9, 4, 3).array() + 0.3;
  for (double h : {0.3, 1.0}) EXPECT_NEAR(mmd_squared(a, b, h), support::mmd_bruteforce(a, b, h), 1e-12);
  EXPECT_NEAR(mmd_squared(a, b), mmd_squared(b, a), 1e-12);
  EXPECT_NEAR(mmd_squared(a, a), 0.0, 1e-12);
  EXPECT_NEAR(mmd_squared(a.topRows(1), a.topRows(1), 1.0), 0.0, 1e-12);
  // Point masses far apart: both self terms are 1, cross term vanishes.
  const Matrix p = Matrix::Zero(3, 2), q = Matrix::Constant(3, 2, 50.0);
  EXPECT_NEAR(mmd_squared(p, q, 1.0), support::mmd_bruteforce(p, q, 1.0), 1e-12);
  EXPECT_NEAR(mmd_squared(p, q, 1.0), 2.0, 1e-12);
}

TEST(Utility, IdenticalArmsGiveIdenticalMetrics) {
  const std::vector<double> truth = {1, 2, 3, 4};
  const auto proc = [](const std::vector<double>&) { return std::vector<double>{1.0, 2.1, 2.9, 4.0}; };
  const std::vector<double> data = {1, 2};
  const auto r = utility_harness(data, data, proc, truth);
  EXPECT_EQ(r.real_only.mae, r.augmented.mae);
  EXPECT_EQ(r.delta_r2, 0.0);
  EXPECT_EQ(r.delta_rmse, 0.0);
  EXPECT_GT(r.real_only.r2, 0.99);
}
