#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "herdcast/core/error.hpp"
#include "herdcast/core/rng.hpp"
#include "herdcast/nn/tensors.hpp"

namespace herdcast::forecast {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Per (county, feature) least-squares line x = a t + b over calendar years.
struct TrendModel {
  Matrix slope;
  Matrix intercept;
  Matrix residual_std;  // sample residual std (n - 2), zero with two points
  double lo = 0.0;
  double hi = 1.0;

  Matrix line(int year) const { return (slope * static_cast<double>(year) + intercept); }
};

struct LineFit {
  double a = 0.0;
  double b = 0.0;
  double residual_std = 0.0;
};

inline LineFit fit_line(const std::vector<double>& t, const std::vector<double>& x) {
  const auto n = t.size();
  if (n == 0 || n != x.size()) throw ValidationError("trend fit needs matching non-empty series");
  double tm = 0.0, xm = 0.0;
  for (std::size_t i = 0; i < n; ++i) tm += t[i], xm += x[i];
  tm /= static_cast<double>(n);
  xm /= static_cast<double>(n);
  double stt = 0.0, stx = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    stt += (t[i] - tm) * (t[i] - tm);
    stx += (t[i] - tm) * (x[i] - xm);
  }
  LineFit f;
  f.a = stt > 0.0 ? stx / stt : 0.0;
  f.b = xm - f.a * tm;
  if (n > 2) {
    double ssr = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = x[i] - (f.a * t[i] + f.b);
      ssr += r * r;
    }
    f.residual_std = std::sqrt(ssr / static_cast<double>(n - 2));
  }
  return f;
}

// history[t] is counties x features for years[t].
inline TrendModel fit_trends(const std::vector<Matrix>& history, const std::vector<int>& years, double lo = 0.0,
                             double hi = 1.0) {
  if (history.empty() || history.size() != years.size()) throw ValidationError("trend history/years mismatch");
  if (!(hi > lo)) throw ValidationError("feasible range requires lo < hi");
  const auto n = history.front().rows(), p = history.front().cols();
  TrendModel m{Matrix(n, p), Matrix(n, p), Matrix(n, p), lo, hi};
  std::vector<double> t(years.begin(), years.end());
  for (Eigen::Index c = 0; c < n; ++c)
    for (Eigen::Index j = 0; j < p; ++j) {
      std::vector<double> x;
      for (const auto& h : history) x.push_back(h(c, j));
      const auto f = fit_line(t, x);
      m.slope(c, j) = f.a;
      m.intercept(c, j) = f.b;
      m.residual_std(c, j) = f.residual_std;
    }
  return m;
}

// a t + b + eps before clipping; eps ~ N(0, sigma^2) from a stream keyed by year.
inline Matrix project_unclipped(const TrendModel& m, int year, double sigma, std::uint64_t seed) {
  Matrix x = m.line(year);
  if (sigma > 0.0) {
    Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(year)}));
    for (Eigen::Index c = 0; c < x.rows(); ++c)
      for (Eigen::Index j = 0; j < x.cols(); ++j) x(c, j) += sigma * rng.normal();
  }
  return x;
}

inline Matrix clip(const Matrix& x, double lo, double hi) { return x.cwiseMax(lo).cwiseMin(hi); }

inline Matrix extrapolate(const TrendModel& m, int year, double sigma, std::uint64_t seed) {
  return clip(project_unclipped(m, year, sigma, seed), m.lo, m.hi);
}

inline nlohmann::json to_json(const TrendModel& m) {
  return {{"slope", nn::matrix_to_json(m.slope)},
          {"intercept", nn::matrix_to_json(m.intercept)},
          {"residual_std", nn::matrix_to_json(m.residual_std)},
          {"range", {m.lo, m.hi}}};
}

inline TrendModel trends_from_json(const nlohmann::json& j) {
  TrendModel m{nn::matrix_from_json(j.at("slope")), nn::matrix_from_json(j.at("intercept")),
               nn::matrix_from_json(j.at("residual_std")), j.at("range").at(0), j.at("range").at(1)};
  if (m.slope.rows() != m.intercept.rows() || m.slope.cols() != m.intercept.cols())
    throw ValidationError("trend model: slope/intercept shapes differ");
  return m;
}

}  // namespace herdcast::forecast
