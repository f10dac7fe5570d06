#pragma once

// Independent oracles and synthetic fixtures shared by the unit tests and the
// acceptance binary. Oracles avoid the library code paths they check.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "herdcast/core/rng.hpp"
#include "herdcast/forecast/rollout.hpp"
#include "herdcast/geo/graph.hpp"
#include "herdcast/panel/schema.hpp"
#include "herdcast/stgnn/features.hpp"
#include "herdcast/stgnn/model.hpp"
#include "herdcast/stgnn/train.hpp"

namespace herdcast::support {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline std::string data_path(const std::string& name) { return std::string(HERDCAST_DATA_DIR) + "/" + name; }
inline std::string scenario_path(const std::string& name) { return std::string(HERDCAST_SCENARIO_DIR) + "/" + name; }

inline double max_abs(const Matrix& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

// Cyclic Jacobi rotations on a symmetric matrix; eigenvalues descending,
// eigenvectors as columns.
struct EigenPairs {
  Vector values;
  Matrix vectors;
};

inline EigenPairs jacobi_eigen(Matrix a, int sweeps = 100) {
  const auto n = a.rows();
  Matrix v = Matrix::Identity(n, n);
  for (int s = 0; s < sweeps; ++s) {
    double off = 0.0;
    for (Eigen::Index p = 0; p < n; ++p)
      for (Eigen::Index q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (off < 1e-30) break;
    for (Eigen::Index p = 0; p < n; ++p)
      for (Eigen::Index q = p + 1; q < n; ++q) {
        if (std::abs(a(p, q)) < 1e-300) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0), sn = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - sn * akq;
          a(k, q) = sn * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - sn * aqk;
          a(q, k) = sn * apk + c * aqk;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - sn * vkq;
          v(k, q) = sn * vkp + c * vkq;
        }
      }
  }
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  std::sort(order.begin(), order.end(), [&](auto x, auto y) { return a(x, x) > a(y, y); });
  EigenPairs e{Vector(n), Matrix(n, n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    e.values(i) = a(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(i)]);
    e.vectors.col(i) = v.col(order[static_cast<std::size_t>(i)]);
  }
  return e;
}

// Largest |eigenvalue| of a symmetric matrix by power iteration on A^2.
inline double spectral_radius(const Matrix& a, int iters = 500) {
  Vector x = Vector::Ones(a.rows()) + Vector::LinSpaced(a.rows(), 0.0, 0.1);
  double lambda = 0.0;
  for (int i = 0; i < iters; ++i) {
    const Vector y = a * (a * x);
    const double n = y.norm();
    if (n == 0.0) return 0.0;
    lambda = std::sqrt(n / x.norm());
    x = y / n;
  }
  return lambda;
}

// Brute-force Kendall tau-a over all pairs (untied inputs).
inline double kendall_bruteforce(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  const auto n = a.size();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double x = (a[i] - a[j]) * (b[i] - b[j]);
      s += x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0);
    }
  return s / (static_cast<double>(n * (n - 1)) / 2.0);
}

// Spearman from the d^2 formula (untied inputs).
inline double spearman_d2(const std::vector<double>& a, const std::vector<double>& b) {
  const auto n = a.size();
  auto ranks = [n](const std::vector<double>& x) {
    std::vector<double> r(n);
    for (std::size_t i = 0; i < n; ++i) {
      double k = 1.0;
      for (std::size_t j = 0; j < n; ++j) k += x[j] < x[i] ? 1.0 : 0.0;
      r[i] = k;
    }
    return r;
  };
  const auto ra = ranks(a), rb = ranks(b);
  double d2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) d2 += (ra[i] - rb[i]) * (ra[i] - rb[i]);
  const double nn = static_cast<double>(n);
  return 1.0 - 6.0 * d2 / (nn * (nn * nn - 1.0));
}

// Great-circle distance from the angle between unit position vectors.
inline double great_circle_km(double lat1, double lon1, double lat2, double lon2, double radius = 6371.0) {
  const double d = std::numbers::pi / 180.0;
  const Eigen::Vector3d a(std::cos(lat1 * d) * std::cos(lon1 * d), std::cos(lat1 * d) * std::sin(lon1 * d), std::sin(lat1 * d));
  const Eigen::Vector3d b(std::cos(lat2 * d) * std::cos(lon2 * d), std::cos(lat2 * d) * std::sin(lon2 * d), std::sin(lat2 * d));
  return radius * std::atan2(a.cross(b).norm(), a.dot(b));
}

// Vincenty inverse on the WGS-84 ellipsoid, in km.
inline double vincenty_km(double lat1, double lon1, double lat2, double lon2) {
  const double a = 6378137.0, f = 1.0 / 298.257223563, b = (1.0 - f) * a;
  const double d = std::numbers::pi / 180.0;
  const double L = (lon2 - lon1) * d;
  const double U1 = std::atan((1 - f) * std::tan(lat1 * d)), U2 = std::atan((1 - f) * std::tan(lat2 * d));
  const double sU1 = std::sin(U1), cU1 = std::cos(U1), sU2 = std::sin(U2), cU2 = std::cos(U2);
  double lambda = L, sigma = 0, ss = 0, cs = 0, c2a = 0, c2sm = 0;
  for (int i = 0; i < 200; ++i) {
    const double sl = std::sin(lambda), cl = std::cos(lambda);
    ss = std::sqrt((cU2 * sl) * (cU2 * sl) + (cU1 * sU2 - sU1 * cU2 * cl) * (cU1 * sU2 - sU1 * cU2 * cl));
    cs = sU1 * sU2 + cU1 * cU2 * cl;
    sigma = std::atan2(ss, cs);
    const double sa = cU1 * cU2 * sl / ss;
    c2a = 1 - sa * sa;
    c2sm = cs - 2 * sU1 * sU2 / c2a;
    const double C = f / 16 * c2a * (4 + f * (4 - 3 * c2a));
    const double prev = lambda;
    lambda = L + (1 - C) * f * sa * (sigma + C * ss * (c2sm + C * cs * (-1 + 2 * c2sm * c2sm)));
    if (std::abs(lambda - prev) < 1e-13) break;
  }
  const double u2 = c2a * (a * a - b * b) / (b * b);
  const double A = 1 + u2 / 16384 * (4096 + u2 * (-768 + u2 * (320 - 175 * u2)));
  const double B = u2 / 1024 * (256 + u2 * (-128 + u2 * (74 - 47 * u2)));
  const double ds = B * ss * (c2sm + B / 4 * (cs * (-1 + 2 * c2sm * c2sm) - B / 6 * c2sm * (-3 + 4 * ss * ss) * (-3 + 4 * c2sm * c2sm)));
  return b * A * (sigma - ds) / 1000.0;
}

// Standard normal quantile by bisection on the CDF written with erfc.
inline double normal_quantile(double p) {
  double lo = -10.0, hi = 10.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (0.5 * std::erfc(-mid / std::sqrt(2.0)) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// Triple-loop biased MMD^2 with a Gaussian kernel exp(-d^2 / (2 h^2)).
inline double mmd_bruteforce(const Matrix& x, const Matrix& y, double h) {
  auto k = [h](const Eigen::RowVectorXd& a, const Eigen::RowVectorXd& b) {
    double d2 = 0.0;
    for (Eigen::Index j = 0; j < a.size(); ++j) d2 += (a(j) - b(j)) * (a(j) - b(j));
    return std::exp(-d2 / (2.0 * h * h));
  };
  double xx = 0, yy = 0, xy = 0;
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < x.rows(); ++j) xx += k(x.row(i), x.row(j));
  for (Eigen::Index i = 0; i < y.rows(); ++i)
    for (Eigen::Index j = 0; j < y.rows(); ++j) yy += k(y.row(i), y.row(j));
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < y.rows(); ++j) xy += k(x.row(i), y.row(j));
  const double n = static_cast<double>(x.rows()), m = static_cast<double>(y.rows());
  return xx / (n * n) + yy / (m * m) - 2.0 * xy / (n * m);
}

inline geo::CentroidTable irish_centroids() { return geo::load_centroids(data_path("centroids_ie.csv")); }

inline geo::CentroidTable random_centroids(int n, Rng& rng) {
  geo::CentroidTable c;
  for (int i = 0; i < n; ++i) {
    c.names.push_back("n" + std::to_string(i));
    c.points.push_back({rng.uniform(51.4, 55.4), rng.uniform(-10.4, -6.0)});
  }
  return c;
}

// Noiseless panel whose score is a fixed linear spatio-temporal map:
//   y_t = 50 + 50 A^2 (mean_{s in W_t} X_s) b,
// with A the normalized county graph and W_t the last `window` years up to t.
// Operational features are smooth per-county trends inside [0.1, 0.9]; the
// last feature is constant. The map lies inside the model class (linear
// graph passthrough, uniform attention, linear head).
struct LinearFixture {
  geo::SpatialGraph graph;
  std::vector<Matrix> ops;  // counties x features per year
  Matrix scores;            // counties x years, score scale
  std::vector<int> years;
  Vector b;
  stgnn::LagScaler scaler;
  stgnn::Sequence seq;
  std::vector<std::string> features;
};

inline LinearFixture linear_fixture(std::uint64_t seed, const Vector& b, int n_years = 5, int window = 5,
                                    double slope_scale = 0.02) {
  LinearFixture f;
  const auto c = irish_centroids();
  f.graph = geo::knn_graph(c, 3);
  const auto n = static_cast<Eigen::Index>(c.size());
  const auto p = b.size();
  Rng rng(seed);
  Matrix base(n, p), slope(n, p), wobble(n, p);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < p; ++j) {
      base(i, j) = rng.uniform(0.3, 0.7);
      slope(i, j) = rng.uniform(-slope_scale, slope_scale);
      wobble(i, j) = rng.uniform(-0.08, 0.08);
    }
  const Matrix a2 = f.graph.normalized * f.graph.normalized;
  f.b = b;
  f.scores = Matrix(n, n_years);
  for (int t = 0; t < n_years; ++t) {
    f.years.push_back(2021 + t);
    // Alternating wobble keeps years from being collinear.
    Matrix x = base + static_cast<double>(t - 2) * slope + (t % 2 == 0 ? 1.0 : -1.0) * wobble;
    x = x.cwiseMax(0.1).cwiseMin(0.9);
    // A constant column lets the bias-free graph layers carry A^2 1.
    x.col(p - 1).setConstant(0.5);
    f.ops.push_back(x);
    const int first = std::max(0, t - window + 1);
    Matrix avg = Matrix::Zero(n, p);
    for (int s = first; s <= t; ++s) avg += f.ops[static_cast<std::size_t>(s)];
    avg /= static_cast<double>(t - first + 1);
    f.scores.col(t) = (50.0 * (a2 * (avg * b)).array() + 50.0).matrix();
  }
  std::vector<int> train;
  for (int t = 0; t + 2 < n_years; ++t) train.push_back(t);
  f.scaler = stgnn::build_lag_feature(f.scores, train).scaler;
  f.seq = stgnn::assemble_sequence(f.ops, f.scaler.forward(stgnn::raw_lag(f.scores)), f.scaler.forward(f.scores));
  for (Eigen::Index j = 0; j < p; ++j) f.features.push_back("f" + std::to_string(j));
  return f;
}

// Linear fixture named with the ICBF schema, whose score rises with Recycled
// Cows and falls with Calving Interval and Cows Culled. Every other feature
// has zero weight except the constant last column.
inline LinearFixture monotone_fixture(std::uint64_t seed = 42) {
  const auto schema = panel::Schema::default_icbf();
  Vector b = Vector::Zero(static_cast<Eigen::Index>(schema.features.size()));
  const auto at = [&](const char* name) { return static_cast<Eigen::Index>(*schema.index_of(name)); };
  b(at("Recycled Cows (%)")) = 0.6;
  b(at("Calving Interval (days)")) = -0.4;
  b(at("Cows Culled in Period (%)")) = -0.4;
  b(b.size() - 1) = 0.1;
  auto f = linear_fixture(seed, b);
  f.features = schema.names();
  return f;
}

// STGNN trained on a linear fixture with the settings that fit it closely.
inline stgnn::StgnnTrainResult train_on_fixture(const LinearFixture& f, int epochs = 2000) {
  stgnn::StgnnConfig c;
  c.input_dim = static_cast<int>(f.b.size()) + 1;
  c.dropout = 0.0;
  c.seed = 1;
  stgnn::TrainConfig cfg;
  cfg.learning_rate = 5e-3;
  cfg.epochs = epochs;
  cfg.lambda = 0.0;
  cfg.seed = 2;
  cfg.train_years = {0, 1, 2};
  cfg.val_years = {3, 4};
  return stgnn::train_stgnn(stgnn::init_stgnn(c), {f.seq}, f.graph.normalized, f.scaler, cfg);
}

inline forecast::ForecastInputs forecast_inputs(const LinearFixture& f, const stgnn::StgnnParams* params) {
  forecast::ForecastInputs in;
  in.params = params;
  in.scaler = f.scaler;
  in.a_norm = f.graph.normalized;
  in.trends = forecast::fit_trends(f.ops, f.years);
  in.history = f.ops;
  in.scores = f.scores;
  in.years = f.years;
  in.counties = f.graph.names;
  in.features = f.features;
  return in;
}

}  // namespace herdcast::support
