#include <gtest/gtest.h>

#include "herdcast/panel/fixture.hpp"
#include "herdcast/panel/scaler.hpp"
#include "herdcast/pca/pillars.hpp"
#include "support.hpp"

using namespace herdcast;
using namespace herdcast::pca;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using support::max_abs;

namespace {

// Data whose X^T X / (N - 1) equals the given symmetric positive matrix.
Matrix data_with_covariance(const Matrix& cov) {
  const auto p = cov.rows();
  const Matrix l = cov.llt().matrixL();
  Matrix x = Matrix::Zero(p + 1, p);
  x.topRows(p) = l.transpose() * std::sqrt(static_cast<double>(p));
  return x;
}

Matrix noiseless_standardized(int rank, std::uint64_t seed = 7) {
  const auto fx = panel::generate_fixture({26, 2021, 2025, seed, rank, 0.0});
  return panel::standardize(fx).values;
}

}  // namespace

TEST(Pca, DiagonalCovarianceHandExample) {
  Matrix cov(2, 2);
  cov << 2, 0, 0, 1;
  const auto m = fit_pca(data_with_covariance(cov), 2);
  EXPECT_NEAR(m.eigenvalues(0), 2.0, 1e-12);
  EXPECT_NEAR(m.eigenvalues(1), 1.0, 1e-12);
  EXPECT_LT(max_abs(m.loadings - Matrix::Identity(2, 2)), 1e-12);
  const Vector rho = variance_ratios(m);
  EXPECT_NEAR(rho(0), 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(rho(1), 1.0 / 3.0, 1e-15);
}

TEST(Pca, EigenpairsMatchJacobiOracle) {
  Rng rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    const Matrix x = rng.normal_matrix(12, 5);
    const Matrix cov = x.transpose() * x / 11.0;
    const auto m = fit_pca(x, 5);
    const auto o = support::jacobi_eigen(cov);
    EXPECT_LT((m.eigenvalues - o.values).cwiseAbs().maxCoeff(), 1e-8);
    for (int c = 0; c < 5; ++c) {
      const double s = m.loadings.col(c).dot(o.vectors.col(c)) >= 0 ? 1.0 : -1.0;
      EXPECT_LT(max_abs(m.loadings.col(c) - s * o.vectors.col(c)), 1e-8);
    }
    EXPECT_NEAR(variance_ratios(m).sum(), 1.0, 1e-10);
    EXPECT_LT(max_abs(m.loadings.transpose() * m.loadings - Matrix::Identity(5, 5)), 1e-8);
  }
}

TEST(Pca, ReplicatedRowsLeaveLoadingsUnchanged) {
  Rng rng(3);
  const Matrix x = rng.normal_matrix(30, 4);
  Matrix xx(60, 4);
  xx << x, x;
  const auto a = fit_pca(x, 4), b = fit_pca(xx, 4);
  EXPECT_LT(max_abs(a.loadings - b.loadings), 1e-10);
  EXPECT_LT(max_abs(variance_ratios(a) - variance_ratios(b)), 1e-10);
}

TEST(Pca, ErrorsOnBadInput) {
  Matrix x = Matrix::Ones(5, 3);
  EXPECT_THROW(fit_pca(x, 4), ValidationError);
  EXPECT_THROW(fit_pca(x.topRows(1), 1), ValidationError);
  x(2, 1) = std::nan("");
  EXPECT_THROW(fit_pca(x, 2), ValidationError);
}

TEST(Pca, SignConventionTiesGoToLowestIndex) {
  Matrix w(2, 1);
  w << -0.5, 0.5;
  apply_sign_convention(w);
  EXPECT_EQ(w(0, 0), 0.5);
}

TEST(Pca, ExactRankReconstructionExplainsRetainedVariance) {
  const Matrix x = noiseless_standardized(4);
  const auto m = fit_pca(x, 4);
  const Matrix recon = x * m.loadings * m.loadings.transpose();
  const double total = m.eigenvalues.sum();
  const double kept = m.eigenvalues.head(4).sum();
  const double explained = recon.squaredNorm() / static_cast<double>(x.rows() - 1);
  EXPECT_NEAR(explained / total, kept / total, 1e-8);
  EXPECT_NEAR(kept / total, 1.0, 1e-8);
}

TEST(Dominant, PercentileSelection) {
  PillarModel m;
  m.loadings = Matrix(4, 1);
  m.loadings << 0.9, 0.1, 0.1, 0.1;
  dominant_features(m, 75.0);
  EXPECT_EQ(m.dominant[0], std::vector<int>({0}));
  m.loadings << 0.5, 0.5, 0.5, 0.5;
  dominant_features(m, 75.0);
  EXPECT_EQ(m.dominant[0].size(), 4u);
  m.loadings << 0.9, 0.1, 0.3, 0.2;
  dominant_features(m, 0.0);
  EXPECT_EQ(m.dominant[0].size(), 4u);
}

TEST(Orientation, SignRule) {
  using panel::Orientation;
  PillarModel m;
  m.loadings = Matrix(3, 1);
  m.loadings << 0.9, 0.1, 0.1;
  orient_components(m, {Orientation::detrimental, Orientation::beneficial, Orientation::beneficial});
  EXPECT_EQ(m.orientation[0], -1);
  const Matrix before = m.oriented_loadings();
  orient_components(m, {Orientation::beneficial, Orientation::beneficial, Orientation::beneficial});
  EXPECT_EQ(m.orientation[0], 1);
  // Flipping the component flips s and leaves s * W alone.
  orient_components(m, {Orientation::detrimental, Orientation::beneficial, Orientation::beneficial});
  m.loadings *= -1.0;
  orient_components(m, {Orientation::detrimental, Orientation::beneficial, Orientation::beneficial});
  EXPECT_EQ(m.orientation[0], 1);
  EXPECT_LT(max_abs(m.oriented_loadings() - before), 1e-15);
  // Idempotent.
  const auto once = m.orientation;
  orient_components(m, {Orientation::detrimental, Orientation::beneficial, Orientation::beneficial});
  EXPECT_EQ(m.orientation, once);
  EXPECT_THROW(orient_components(m, {Orientation::beneficial}), ValidationError);
}

TEST(Orientation, OrientedLoadingsPositiveOnBeneficialMajority) {
  const auto schema = panel::Schema::default_icbf();
  const Matrix x = noiseless_standardized(4);
  const auto m = fit_pillars(x, 4, schema.names(), schema.orientations());
  const Matrix w = m.oriented_loadings();
  for (int c = 0; c < 4; ++c) {
    double s = 0.0;
    for (int j : m.dominant[static_cast<std::size_t>(c)])
      s += (schema.features[static_cast<std::size_t>(j)].orientation == panel::Orientation::beneficial ? 1 : -1) * w(j, c);
    EXPECT_GE(s, 0.0);
  }
}

TEST(Naming, KeywordTable) {
  PillarModel m;
  m.loadings = Matrix::Identity(4, 3);
  m.feature_names = {"Mortality - Dead at Birth (%)", "Births with a known sire (%)", "Calving Interval (days)", "X"};
  m.dominant = {{0}, {1}, {3}};
  name_pillars(m);
  EXPECT_EQ(m.names, std::vector<std::string>({"Herd Health", "Genetic Management", "Pillar 3"}));
}

TEST(Projection, HandCases) {
  const auto schema = panel::Schema::default_icbf();
  const Matrix x = noiseless_standardized(4);
  const auto m = fit_pillars(x, 4, schema.names(), schema.orientations());
  const auto zero = project_scores(Matrix::Zero(3, 16), m);
  EXPECT_EQ(max_abs(zero.raw), 0.0);
  const auto one = project_scores(m.loadings.col(0).transpose(), m);
  EXPECT_NEAR(one.raw(0, 0), 1.0, 1e-12);
  EXPECT_LT(max_abs(one.raw.rightCols(3)), 1e-12);
  const auto s = project_scores(x, m).standardized;
  EXPECT_LT(max_abs(s.colwise().mean()), 1e-12);
  for (int c = 0; c < 4; ++c) EXPECT_NEAR(s.col(c).squaredNorm() / static_cast<double>(s.rows() - 1), 1.0, 1e-12);
}

TEST(Robustness, BootstrapStableWhenSpectrumIsSeparated) {
  // Two correlated blocks of 3 and 2 columns: correlation eigenvalues near
  // 2.75, 1.83 and 0.08, with gaps far above the sampling error of 200 rows.
  Rng rng(13);
  const Matrix f = rng.normal_matrix(200, 2), e = rng.normal_matrix(200, 5) * 0.3;
  Matrix x(200, 5);
  for (int j = 0; j < 5; ++j) x.col(j) = f.col(j < 3 ? 0 : 1) + e.col(j);
  x = standardize_columns(x);
  using panel::Orientation;
  const std::vector<Orientation> o(5, Orientation::beneficial);
  const auto m = fit_pillars(x, 2, {"a", "b", "c", "d", "e"}, o);
  const auto b = bootstrap_stability(x, m, 30, 5);
  ASSERT_EQ(b.min.size(), 2u);
  for (double v : b.min) EXPECT_GT(v, 0.95);
  EXPECT_EQ(bootstrap_stability(x, m, 30, 5).replicates, b.replicates);
  EXPECT_TRUE(bootstrap_stability(x, m, 0, 5).mean.empty());
}

TEST(Robustness, ScalingAlternatives) {
  const auto schema = panel::Schema::default_icbf();
  const auto fx = panel::generate_fixture({26, 2021, 2025, 7, 4, 0.0});
  const Matrix x = panel::standardize(fx).values;
  const auto m = fit_pillars(x, 4, schema.names(), schema.orientations());
  const Vector same = scaling_robustness(fx.values, m, Preprocessing::zscore);
  for (int c = 0; c < 4; ++c) EXPECT_NEAR(same(c), 1.0, 1e-10);
  // Min-max rescales columns unevenly, so axes move but stay close.
  const Vector alt = scaling_robustness(fx.values, m, Preprocessing::minmax);
  for (int c = 0; c < 4; ++c) EXPECT_GT(alt(c), 0.9);
  Matrix e = Matrix::Identity(3, 1), f(3, 1);
  f << 0, 1, 0;
  EXPECT_EQ(abs_cosines(e, f)(0), 0.0);
}

TEST(Robustness, PillarIndexCorrelation) {
  Rng rng(8);
  const Matrix s = rng.normal_matrix(1000, 2);
  EXPECT_NEAR(pillar_index_correlation(s, s.col(0))(0), 1.0, 1e-12);
  EXPECT_NEAR(pillar_index_correlation(s, -s.col(1))(1), -1.0, 1e-12);
  const Vector y = rng.normal_matrix(1000, 1).col(0);
  EXPECT_LT(std::abs(pillar_index_correlation(s, y)(0)), 0.1);
}

TEST(Serialization, PillarModelRoundTrip) {
  const auto schema = panel::Schema::default_icbf();
  const auto m = fit_pillars(noiseless_standardized(4), 4, schema.names(), schema.orientations());
  const auto back = pillars_from_json(to_json(m));
  EXPECT_EQ(max_abs(back.loadings - m.loadings), 0.0);
  EXPECT_EQ(back.names, m.names);
  EXPECT_EQ(back.dominant, m.dominant);
}
