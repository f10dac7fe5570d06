#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "herdcast/core/error.hpp"
#include "herdcast/core/stats.hpp"

namespace herdcast::vae {

struct FeatureMomentGap {
  double mean_gap = 0.0;      // |mu_real - mu_syn|
  double variance_gap = 0.0;  // |var_real - var_syn|, sample variances
};

inline std::vector<FeatureMomentGap> validate_moments(const Eigen::MatrixXd& real, const Eigen::MatrixXd& syn) {
  if (real.cols() != syn.cols()) throw ValidationError("moment check: feature count mismatch");
  const auto mr = stats::column_means(real), ms = stats::column_means(syn);
  const auto sr = stats::column_stddevs(real), ss = stats::column_stddevs(syn);
  std::vector<FeatureMomentGap> out;
  for (Eigen::Index j = 0; j < real.cols(); ++j)
    out.push_back({std::abs(mr(j) - ms(j)), std::abs(sr(j) * sr(j) - ss(j) * ss(j))});
  return out;
}

inline std::string column_label(Eigen::Index j, const std::vector<std::string>* names) {
  if (names && j < static_cast<Eigen::Index>(names->size())) return (*names)[static_cast<std::size_t>(j)];
  return "#" + std::to_string(j);
}

// Frobenius norm of the difference between Pearson correlation matrices.
inline double corr_frobenius(const Eigen::MatrixXd& real, const Eigen::MatrixXd& syn,
                             const std::vector<std::string>* names = nullptr) {
  if (real.cols() != syn.cols()) throw ValidationError("correlation check: feature count mismatch");
  for (const auto* m : {&real, &syn}) {
    for (Eigen::Index j = 0; j < m->cols(); ++j) {
      if (m->col(j).maxCoeff() == m->col(j).minCoeff())
        throw ValidationError("correlation undefined: column '" + column_label(j, names) + "' is constant");
    }
  }
  return (stats::correlation_matrix(real) - stats::correlation_matrix(syn)).norm();
}

// Median pairwise Euclidean distance over the pooled rows (distinct pairs).
inline double median_pairwise_distance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::MatrixXd pooled(a.rows() + b.rows(), a.cols());
  pooled << a, b;
  std::vector<double> d;
  for (Eigen::Index i = 0; i < pooled.rows(); ++i)
    for (Eigen::Index j = i + 1; j < pooled.rows(); ++j) d.push_back((pooled.row(i) - pooled.row(j)).norm());
  if (d.empty()) return 1.0;
  const double med = stats::percentile(std::move(d), 50.0);
  return med > 0.0 ? med : 1.0;
}

// Biased V-statistic MMD^2 with k(a, b) = exp(-||a - b||^2 / (2 h^2)).
// Bandwidth defaults to the pooled median pairwise distance.
inline double mmd_squared(const Eigen::MatrixXd& real, const Eigen::MatrixXd& syn,
                          std::optional<double> bandwidth = std::nullopt) {
  if (real.rows() == 0 || syn.rows() == 0) throw ValidationError("MMD needs two nonempty samples");
  if (real.cols() != syn.cols()) throw ValidationError("MMD: feature count mismatch");
  const double h = bandwidth ? *bandwidth : median_pairwise_distance(real, syn);
  if (!(h > 0.0)) throw ValidationError("MMD bandwidth must be positive");
  const double inv = 1.0 / (2.0 * h * h);
  auto mean_kernel = [&](const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < a.rows(); ++i)
      for (Eigen::Index j = 0; j < b.rows(); ++j) s += std::exp(-(a.row(i) - b.row(j)).squaredNorm() * inv);
    return s / (static_cast<double>(a.rows()) * static_cast<double>(b.rows()));
  };
  return mean_kernel(real, real) + mean_kernel(syn, syn) - 2.0 * mean_kernel(real, syn);
}

}  // namespace herdcast::vae
