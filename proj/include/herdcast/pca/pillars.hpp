#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "herdcast/core/error.hpp"
#include "herdcast/core/rng.hpp"
#include "herdcast/core/stats.hpp"
#include "herdcast/nn/tensors.hpp"
#include "herdcast/panel/scaler.hpp"
#include "herdcast/panel/schema.hpp"

namespace herdcast::pca {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using panel::Orientation;

// Retained principal directions plus the pillar interpretation layered on top.
// loadings carry the eigen-sign convention only; oriented loadings are
// orientation[k] * loadings.col(k).
struct PillarModel {
  Matrix loadings;                    // p x K, orthonormal columns
  Vector eigenvalues;                 // length p, descending
  std::vector<int> orientation;       // K entries of +1 / -1
  std::vector<std::vector<int>> dominant;
  std::vector<double> tau;            // per-pillar loading threshold
  double percentile = 75.0;
  std::vector<std::string> names;
  std::vector<std::string> feature_names;

  int k() const { return static_cast<int>(loadings.cols()); }
  int p() const { return static_cast<int>(loadings.rows()); }

  Matrix oriented_loadings() const {
    Matrix w = loadings;
    for (int c = 0; c < k(); ++c) w.col(c) *= orientation.empty() ? 1.0 : orientation[static_cast<std::size_t>(c)];
    return w;
  }
};

// Largest-|entry| positive; ties go to the lowest index.
inline void apply_sign_convention(Matrix& w) {
  for (Eigen::Index c = 0; c < w.cols(); ++c) {
    Eigen::Index arg = 0;
    for (Eigen::Index j = 1; j < w.rows(); ++j)
      if (std::abs(w(j, c)) > std::abs(w(arg, c))) arg = j;
    if (w(arg, c) < 0.0) w.col(c) *= -1.0;
  }
}

// Eigendecomposition of S = X^T X / (N - 1) for standardized X.
inline PillarModel fit_pca(const Matrix& x_sc, int k) {
  if (x_sc.rows() < 2) throw ValidationError("PCA needs at least two observations");
  if (k < 1 || k > x_sc.cols()) throw ValidationError("retained component count out of range");
  if (!x_sc.allFinite()) throw ValidationError("PCA input contains non-finite values");
  const Matrix cov = (x_sc.transpose() * x_sc) / static_cast<double>(x_sc.rows() - 1);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
  if (eig.info() != Eigen::Success) throw Error("eigendecomposition failed");
  const auto p = cov.rows();
  PillarModel m;
  m.eigenvalues.resize(p);
  Matrix vecs(p, p);
  for (Eigen::Index i = 0; i < p; ++i) {
    m.eigenvalues(i) = eig.eigenvalues()(p - 1 - i);
    vecs.col(i) = eig.eigenvectors().col(p - 1 - i);
  }
  m.loadings = vecs.leftCols(k);
  apply_sign_convention(m.loadings);
  m.orientation.assign(static_cast<std::size_t>(k), 1);
  return m;
}

inline Vector variance_ratios(const PillarModel& m) { return m.eigenvalues / m.eigenvalues.sum(); }

// J_k = {j : |W_jk| >= tau_k}, tau_k the given percentile of |W_.k|.
inline void dominant_features(PillarModel& m, double percentile = 75.0) {
  m.percentile = percentile;
  m.dominant.assign(static_cast<std::size_t>(m.k()), {});
  m.tau.assign(static_cast<std::size_t>(m.k()), 0.0);
  for (int c = 0; c < m.k(); ++c) {
    std::vector<double> mags;
    for (int j = 0; j < m.p(); ++j) mags.push_back(std::abs(m.loadings(j, c)));
    const double tau = stats::percentile(mags, percentile);
    m.tau[static_cast<std::size_t>(c)] = tau;
    for (int j = 0; j < m.p(); ++j)
      if (mags[static_cast<std::size_t>(j)] >= tau) m.dominant[static_cast<std::size_t>(c)].push_back(j);
  }
}

// s_k = +1 when sum over J_k of dir_j * W_jk >= 0, else -1.
inline void orient_components(PillarModel& m, const std::vector<Orientation>& feature_orientation) {
  if (static_cast<int>(feature_orientation.size()) != m.p())
    throw ValidationError("orientation metadata length does not match feature count");
  if (m.dominant.size() != static_cast<std::size_t>(m.k())) dominant_features(m, m.percentile);
  m.orientation.assign(static_cast<std::size_t>(m.k()), 1);
  for (int c = 0; c < m.k(); ++c) {
    double s = 0.0;
    for (int j : m.dominant[static_cast<std::size_t>(c)]) {
      const double dir = feature_orientation[static_cast<std::size_t>(j)] == Orientation::beneficial ? 1.0 : -1.0;
      s += dir * m.loadings(j, c);
    }
    m.orientation[static_cast<std::size_t>(c)] = s >= 0.0 ? 1 : -1;
  }
}

namespace detail {

inline std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

struct Theme {
  const char* name;
  std::vector<const char*> keywords;
};

inline const std::array<Theme, 4>& themes() {
  static const std::array<Theme, 4> t = {{
      {"Reproductive Efficiency", {"calving interval", "calving rate", "calves per cow", "not calved", "fertility"}},
      {"Genetic Management", {"dairy ai", "sire", "survey", " ai "}},
      {"Herd Health", {"mortality", "culled", "culling"}},
      {"Herd Management", {"replacement rate", "heifers calved", "heifer age", "lactations"}},
  }};
  return t;
}

}  // namespace detail

// Assigns the four thematic names by keyword overlap with J_k weighted by
// |loading|; each name is used at most once and unmatched pillars get "Pillar k".
inline void name_pillars(PillarModel& m) {
  const auto& th = detail::themes();
  const auto K = static_cast<std::size_t>(m.k());
  std::vector<std::array<double, 4>> score(K, {0, 0, 0, 0});
  for (std::size_t c = 0; c < K && c < m.dominant.size(); ++c) {
    for (int j : m.dominant[c]) {
      if (static_cast<std::size_t>(j) >= m.feature_names.size()) continue;
      const auto name = " " + detail::lower(m.feature_names[static_cast<std::size_t>(j)]) + " ";
      for (std::size_t t = 0; t < th.size(); ++t)
        for (const char* kw : th[t].keywords)
          if (name.find(kw) != std::string::npos) {
            score[c][t] += std::abs(m.loadings(j, static_cast<Eigen::Index>(c)));
            break;
          }
    }
  }
  m.names.assign(K, "");
  std::vector<bool> used(th.size(), false);
  while (true) {
    double best = 0.0;
    std::size_t bc = K, bt = 0;
    for (std::size_t c = 0; c < K; ++c) {
      if (!m.names[c].empty()) continue;
      for (std::size_t t = 0; t < th.size(); ++t)
        if (!used[t] && score[c][t] > best) best = score[c][t], bc = c, bt = t;
    }
    if (bc == K) break;
    m.names[bc] = th[bt].name;
    used[bt] = true;
  }
  for (std::size_t c = 0; c < K; ++c)
    if (m.names[c].empty()) m.names[c] = "Pillar " + std::to_string(c + 1);
}

// fit -> dominant sets -> orientation -> names.
inline PillarModel fit_pillars(const Matrix& x_sc, int k, const std::vector<std::string>& feature_names,
                               const std::vector<Orientation>& orientation, double percentile = 75.0) {
  PillarModel m = fit_pca(x_sc, k);
  m.feature_names = feature_names;
  dominant_features(m, percentile);
  orient_components(m, orientation);
  name_pillars(m);
  return m;
}

struct PillarScores {
  Matrix raw;           // Z = X W
  Matrix standardized;  // column-standardized s_k Z_k
};

inline Matrix standardize_columns(const Matrix& z) {
  Matrix s = z.rowwise() - z.colwise().mean();
  const auto sd = stats::column_stddevs(z);
  for (Eigen::Index c = 0; c < z.cols(); ++c) {
    if (sd(c) > 0.0)
      s.col(c) /= sd(c);
    else
      s.col(c).setZero();
  }
  return s;
}

inline PillarScores project_scores(const Matrix& x_sc, const PillarModel& m) {
  PillarScores out;
  out.raw = x_sc * m.loadings;
  Matrix oriented = out.raw;
  for (int c = 0; c < m.k(); ++c) oriented.col(c) *= m.orientation[static_cast<std::size_t>(c)];
  out.standardized = standardize_columns(oriented);
  return out;
}

inline Vector abs_column_correlations(const Matrix& a, const Matrix& b) {
  Vector out(a.cols());
  for (Eigen::Index c = 0; c < a.cols(); ++c) {
    const Vector x = a.col(c), y = b.col(c);
    out(c) = std::abs(stats::pearson(stats::to_vector(x), stats::to_vector(y)));
  }
  return out;
}

struct StabilitySummary {
  std::vector<double> mean;  // per pillar
  std::vector<double> min;
  std::vector<std::vector<double>> replicates;  // [b][k]
};

// Row bootstrap: resample, restandardize, refit, compare loadings by
// |Pearson correlation| (absolute value aligns the sign).
inline StabilitySummary bootstrap_stability(const Matrix& x_sc, const PillarModel& m, int replicates,
                                            std::uint64_t seed) {
  StabilitySummary s;
  if (replicates <= 0) return s;
  const auto n = x_sc.rows();
  const int K = m.k();
  s.mean.assign(static_cast<std::size_t>(K), 0.0);
  s.min.assign(static_cast<std::size_t>(K), 1.0);
  for (int b = 0; b < replicates; ++b) {
    Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(b)}));
    Matrix sample(n, x_sc.cols());
    for (Eigen::Index i = 0; i < n; ++i) sample.row(i) = x_sc.row(static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(n))));
    const PillarModel refit = fit_pca(standardize_columns(sample), K);
    const Vector corr = abs_column_correlations(m.loadings, refit.loadings);
    s.replicates.emplace_back(corr.data(), corr.data() + corr.size());
    for (int c = 0; c < K; ++c) {
      s.mean[static_cast<std::size_t>(c)] += corr(c) / replicates;
      s.min[static_cast<std::size_t>(c)] = std::min(s.min[static_cast<std::size_t>(c)], corr(c));
    }
  }
  return s;
}

inline Vector abs_cosines(const Matrix& a, const Matrix& b) {
  Vector out(a.cols());
  for (Eigen::Index c = 0; c < a.cols(); ++c) {
    const double denom = a.col(c).norm() * b.col(c).norm();
    out(c) = denom > 0.0 ? std::abs(a.col(c).dot(b.col(c))) / denom : 0.0;
  }
  return out;
}

enum class Preprocessing { zscore, minmax };

// Refits PCA on the raw panel under an alternative scaling (centred after
// scaling) and compares loading vectors by |cosine|.
inline Vector scaling_robustness(const Matrix& raw, const PillarModel& m, Preprocessing alternative = Preprocessing::minmax) {
  const auto params = panel::fit_scaler(raw, m.feature_names);
  Matrix alt = alternative == Preprocessing::minmax ? panel::minmax_apply(raw, params) : panel::standard_apply(raw, params);
  alt = alt.rowwise() - alt.colwise().mean();
  const PillarModel refit = fit_pca(alt, m.k());
  return abs_cosines(m.loadings, refit.loadings);
}

inline Vector pillar_index_correlation(const Matrix& s, const Vector& y) {
  Vector out(s.cols());
  const auto yv = stats::to_vector(y);
  for (Eigen::Index c = 0; c < s.cols(); ++c) out(c) = stats::pearson(stats::to_vector(s.col(c)), yv);
  return out;
}

inline nlohmann::json to_json(const PillarModel& m) {
  std::vector<double> eig(m.eigenvalues.data(), m.eigenvalues.data() + m.eigenvalues.size());
  return {{"loadings", nn::matrix_to_json(m.loadings)},
          {"eigenvalues", eig},
          {"orientation", m.orientation},
          {"dominant", m.dominant},
          {"tau", m.tau},
          {"percentile", m.percentile},
          {"names", m.names},
          {"feature_names", m.feature_names}};
}

inline PillarModel pillars_from_json(const nlohmann::json& j) {
  PillarModel m;
  m.loadings = nn::matrix_from_json(j.at("loadings"));
  const auto eig = j.at("eigenvalues").get<std::vector<double>>();
  m.eigenvalues = Eigen::Map<const Vector>(eig.data(), static_cast<Eigen::Index>(eig.size()));
  m.orientation = j.at("orientation").get<std::vector<int>>();
  m.dominant = j.at("dominant").get<std::vector<std::vector<int>>>();
  m.tau = j.at("tau").get<std::vector<double>>();
  m.percentile = j.at("percentile");
  m.names = j.at("names").get<std::vector<std::string>>();
  m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
  if (static_cast<int>(m.orientation.size()) != m.k() || static_cast<int>(m.dominant.size()) != m.k())
    throw ValidationError("pillar model: inconsistent component counts");
  return m;
}

}  // namespace herdcast::pca
