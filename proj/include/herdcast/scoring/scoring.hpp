#pragma once

#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "herdcast/core/error.hpp"
#include "herdcast/core/stats.hpp"
#include "herdcast/nn/tensors.hpp"
#include "herdcast/panel/panel.hpp"
#include "herdcast/panel/scaler.hpp"
#include "herdcast/pca/pillars.hpp"

namespace herdcast::scoring {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Aggregation { equal, eigenvalue };

inline const char* to_string(Aggregation a) { return a == Aggregation::equal ? "equal" : "eigenvalue"; }

inline Aggregation aggregation_from_string(const std::string& s) {
  if (s == "equal") return Aggregation::equal;
  if (s == "eigenvalue") return Aggregation::eigenvalue;
  throw ValidationError("unknown aggregation '" + s + "' (expected equal or eigenvalue)");
}

struct ScoreWeights {
  Matrix w;      // p x K, zero outside J_k
  Matrix sign;   // p x K, sgn(s_k W_jk) on J_k, zero elsewhere
  Aggregation aggregation = Aggregation::equal;
  Vector omega;  // length K, sums to 1

  // Effective linear coefficients applied to standardized features.
  Matrix signed_weights() const { return w.cwiseProduct(sign); }
};

inline Vector eigenvalue_omega(const pca::PillarModel& m) {
  const Vector head = m.eigenvalues.head(m.k());
  const double total = head.sum();
  if (!(total > 0.0)) throw ValidationError("retained eigenvalues sum to zero");
  return head / total;
}

inline Vector aggregation_weights(Aggregation mode, const pca::PillarModel& m) {
  if (mode == Aggregation::eigenvalue) return eigenvalue_omega(m);
  return Vector::Constant(m.k(), 1.0 / m.k());
}

inline ScoreWeights feature_weights(const pca::PillarModel& m, Aggregation mode = Aggregation::equal) {
  if (m.dominant.size() != static_cast<std::size_t>(m.k())) throw ValidationError("pillar model has no dominant sets");
  ScoreWeights sw;
  sw.w = Matrix::Zero(m.p(), m.k());
  sw.sign = Matrix::Zero(m.p(), m.k());
  for (int c = 0; c < m.k(); ++c) {
    const double s = m.orientation.empty() ? 1.0 : m.orientation[static_cast<std::size_t>(c)];
    double total = 0.0;
    for (int j : m.dominant[static_cast<std::size_t>(c)]) total += std::abs(s * m.loadings(j, c));
    if (!(total > 0.0)) throw ValidationError("pillar '" + m.names.at(static_cast<std::size_t>(c)) + "' has zero dominant loadings");
    for (int j : m.dominant[static_cast<std::size_t>(c)]) {
      const double v = s * m.loadings(j, c);
      sw.w(j, c) = std::abs(v) / total;
      sw.sign(j, c) = v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0);
    }
  }
  sw.aggregation = mode;
  sw.omega = aggregation_weights(mode, m);
  return sw;
}

// Within-pillar weights replaced by 1/|J_k|, signs kept.
inline ScoreWeights equal_within(const ScoreWeights& sw) {
  ScoreWeights out = sw;
  for (Eigen::Index c = 0; c < sw.w.cols(); ++c) {
    double count = 0.0;
    for (Eigen::Index j = 0; j < sw.w.rows(); ++j) count += sw.w(j, c) > 0.0 ? 1.0 : 0.0;
    for (Eigen::Index j = 0; j < sw.w.rows(); ++j) out.w(j, c) = sw.w(j, c) > 0.0 ? 1.0 / count : 0.0;
  }
  return out;
}

struct PillarMoments {
  Eigen::RowVectorXd mean;
  Eigen::RowVectorXd std;
};

struct PillarScoreResult {
  Matrix P;
  Matrix S;
  PillarMoments moments;
};

inline std::string pillar_label(const std::vector<std::string>* names, Eigen::Index k) {
  if (names && static_cast<std::size_t>(k) < names->size()) return (*names)[static_cast<std::size_t>(k)];
  return "Pillar " + std::to_string(k + 1);
}

inline Matrix raw_pillar_scores(const Matrix& x_sc, const ScoreWeights& sw) { return x_sc * sw.signed_weights(); }

inline Matrix apply_moments(const Matrix& P, const PillarMoments& m) {
  Matrix S = P.rowwise() - m.mean;
  for (Eigen::Index c = 0; c < S.cols(); ++c) S.col(c) /= m.std(c);
  return S;
}

// P = x_sc (w * sign); S is P column-standardized. With standardize=false the
// pillar scores are aggregated as they are (moments fixed at mean 0, std 1).
inline PillarScoreResult pillar_scores(const Matrix& x_sc, const ScoreWeights& sw,
                                       const std::vector<std::string>* names = nullptr, bool standardize = true) {
  PillarScoreResult r;
  r.P = raw_pillar_scores(x_sc, sw);
  if (!standardize) {
    r.moments = {Eigen::RowVectorXd::Zero(r.P.cols()), Eigen::RowVectorXd::Ones(r.P.cols())};
    r.S = r.P;
    return r;
  }
  r.moments.mean = r.P.colwise().mean();
  r.moments.std = stats::column_stddevs(r.P);
  for (Eigen::Index c = 0; c < r.P.cols(); ++c)
    if (!(r.moments.std(c) > 0.0)) throw ValidationError("pillar '" + pillar_label(names, c) + "' has zero variance");
  r.S = apply_moments(r.P, r.moments);
  return r;
}

inline Vector composite_index(const Matrix& S, const Vector& omega) {
  if (omega.size() != S.cols()) throw ValidationError("aggregation weights do not match pillar count");
  return S * omega;
}

inline Vector composite_index(const Matrix& S) { return composite_index(S, Vector::Constant(S.cols(), 1.0 / S.cols())); }

struct RescaleBounds {
  double i_min = 0.0;
  double i_max = 1.0;
  double lo = 10.0;
  double hi = 100.0;
};

inline RescaleBounds fit_rescale(const Vector& I, double lo = 10.0, double hi = 100.0) {
  if (I.size() == 0) throw ValidationError("cannot rescale an empty index");
  if (!(hi > lo)) throw ValidationError("rescale range requires hi > lo");
  const double mn = I.minCoeff(), mx = I.maxCoeff();
  if (!(mx > mn)) throw ValidationError("index is constant; rescaling undefined");
  return {mn, mx, lo, hi};
}

// Frozen bounds: values outside the fit population land outside [lo, hi].
inline Vector apply_rescale(const Vector& I, const RescaleBounds& b) {
  Vector out(I.size());
  for (Eigen::Index i = 0; i < I.size(); ++i) {
    if (I(i) == b.i_min)
      out(i) = b.lo;
    else if (I(i) == b.i_max)
      out(i) = b.hi;
    else
      out(i) = b.lo + (b.hi - b.lo) * (I(i) - b.i_min) / (b.i_max - b.i_min);
  }
  return out;
}

inline Vector rescale_index(const Vector& I, double lo = 10.0, double hi = 100.0) {
  return apply_rescale(I, fit_rescale(I, lo, hi));
}

inline double round1(double v) { return std::round(v * 10.0) / 10.0; }

// dI/dx_sc_j with pillar moments frozen.
inline Vector sensitivity(const ScoreWeights& sw, const Eigen::RowVectorXd& sigma_p) {
  Vector out = Vector::Zero(sw.w.rows());
  const Matrix sw_signed = sw.signed_weights();
  for (Eigen::Index c = 0; c < sw.w.cols(); ++c) out += sw.omega(c) * sw_signed.col(c) / sigma_p(c);
  return out;
}

struct RankAgreement {
  double spearman = 0.0;
  double kendall = 0.0;
};

inline RankAgreement rank_agreement(std::span<const double> a, std::span<const double> b) {
  return {stats::spearman(a, b), stats::kendall_tau_b(a, b)};
}

inline RankAgreement rank_agreement(const Vector& a, const Vector& b) {
  const auto va = stats::to_vector(a), vb = stats::to_vector(b);
  return rank_agreement(std::span<const double>(va), std::span<const double>(vb));
}

struct VariantRow {
  std::string variant;
  RankAgreement agreement;
};

inline Vector index_for(const Matrix& x_sc, const ScoreWeights& sw, bool standardize, double lo, double hi) {
  const auto r = pillar_scores(x_sc, sw, nullptr, standardize);
  return rescale_index(composite_index(r.S, sw.omega), lo, hi);
}

// Default index (PCA weights, equal aggregation) against three variants.
inline std::vector<VariantRow> weight_variants_report(const Matrix& x_sc, const pca::PillarModel& m,
                                                      bool standardize = true, double lo = 10.0, double hi = 100.0) {
  const ScoreWeights base = feature_weights(m, Aggregation::equal);
  const Vector reference = index_for(x_sc, base, standardize, lo, hi);
  std::vector<VariantRow> rows;
  rows.push_back({"pca_weights", rank_agreement(reference, index_for(x_sc, base, standardize, lo, hi))});
  rows.push_back({"equal_within_pillar", rank_agreement(reference, index_for(x_sc, equal_within(base), standardize, lo, hi))});
  rows.push_back({"eigenvalue_aggregation",
                  rank_agreement(reference, index_for(x_sc, feature_weights(m, Aggregation::eigenvalue), standardize, lo, hi))});
  return rows;
}

struct CountyStability {
  std::string county;
  double mean = 0.0;
  double std = 0.0;
};

struct YearPairCorrelation {
  int year_a = 0;
  int year_b = 0;
  double spearman = 0.0;
};

struct StabilityReport {
  std::vector<CountyStability> counties;
  std::vector<YearPairCorrelation> year_pairs;
};

// Scores aligned with keys of a regular panel.
inline StabilityReport stability_stats(const std::vector<panel::CountyYearKey>& keys, const Vector& scores) {
  if (static_cast<Eigen::Index>(keys.size()) != scores.size()) throw ValidationError("score/key length mismatch");
  std::map<int, std::string> names;
  std::map<int, std::map<int, double>> by_county;
  std::map<int, std::map<int, double>> by_year;
  for (std::size_t r = 0; r < keys.size(); ++r) {
    names[keys[r].county_id] = keys[r].county_name;
    by_county[keys[r].county_id][keys[r].year] = scores(static_cast<Eigen::Index>(r));
    by_year[keys[r].year][keys[r].county_id] = scores(static_cast<Eigen::Index>(r));
  }
  StabilityReport rep;
  for (const auto& [id, series] : by_county) {
    std::vector<double> v;
    for (const auto& [y, s] : series) v.push_back(s);
    rep.counties.push_back({names[id], stats::mean(v), v.size() > 1 ? stats::stddev(v) : 0.0});
  }
  for (auto a = by_year.begin(); a != by_year.end(); ++a) {
    for (auto b = std::next(a); b != by_year.end(); ++b) {
      std::vector<double> va, vb;
      for (const auto& [id, s] : a->second) {
        const auto it = b->second.find(id);
        if (it == b->second.end()) continue;
        va.push_back(s);
        vb.push_back(it->second);
      }
      rep.year_pairs.push_back({a->first, b->first, stats::spearman(va, vb)});
    }
  }
  return rep;
}

struct OlsResult {
  Vector coefficients;  // intercept first
  double ssr = 0.0;
  double residual_variance = 0.0;
};

// I = a0 + sum_k a_k S_k + e by normal equations.
inline OlsResult regress_index_on_pillars(const Vector& I, const Matrix& S) {
  const auto n = S.rows(), k = S.cols();
  if (I.size() != n) throw ValidationError("index and pillar score lengths differ");
  Matrix X(n, k + 1);
  X.col(0).setOnes();
  X.rightCols(k) = S;
  const Matrix xtx = X.transpose() * X;
  const Vector xty = X.transpose() * I;
  Eigen::LDLT<Matrix> ldlt(xtx);
  if (ldlt.info() != Eigen::Success) throw NumericError("normal equations are singular");
  OlsResult r;
  r.coefficients = ldlt.solve(xty);
  const Vector resid = I - X * r.coefficients;
  r.ssr = resid.squaredNorm();
  const auto dof = n - k - 1;
  r.residual_variance = r.ssr / static_cast<double>(dof > 0 ? dof : 1);
  return r;
}

struct ScoreConfig {
  int components = 4;
  double percentile = 75.0;
  Aggregation aggregation = Aggregation::equal;
  bool standardize_pillars = true;
  double lo = 10.0;
  double hi = 100.0;
};

struct SustainabilityIndex {
  Vector raw;
  Vector scaled;
  Matrix P;
  Matrix S;
};

// Everything needed to score new raw indicator rows exactly as at fit time.
struct ScoreModel {
  ScoreConfig config;
  panel::ScalerParams scaler;
  pca::PillarModel pillars;
  ScoreWeights weights;
  PillarMoments moments;
  RescaleBounds bounds;

  SustainabilityIndex score(const Matrix& raw) const {
    SustainabilityIndex out;
    const Matrix x_sc = panel::standard_apply(raw, scaler);
    out.P = raw_pillar_scores(x_sc, weights);
    out.S = apply_moments(out.P, moments);
    out.raw = composite_index(out.S, weights.omega);
    out.scaled = apply_rescale(out.raw, bounds);
    return out;
  }

  Vector sensitivity() const { return scoring::sensitivity(weights, moments.std); }
};

struct ScoreFit {
  ScoreModel model;
  SustainabilityIndex index;
  Matrix x_sc;
};

inline ScoreFit fit_score_model(const panel::IndicatorPanel& panel, const ScoreConfig& cfg) {
  ScoreFit fit;
  auto& m = fit.model;
  m.config = cfg;
  m.scaler = panel::fit_scaler(panel.values, panel.feature_names);
  fit.x_sc = panel::standard_apply(panel.values, m.scaler);
  m.pillars = pca::fit_pillars(fit.x_sc, cfg.components, panel.feature_names, panel.orientation, cfg.percentile);
  m.weights = feature_weights(m.pillars, cfg.aggregation);
  const auto ps = pillar_scores(fit.x_sc, m.weights, &m.pillars.names, cfg.standardize_pillars);
  m.moments = ps.moments;
  const Vector I = composite_index(ps.S, m.weights.omega);
  m.bounds = fit_rescale(I, cfg.lo, cfg.hi);
  fit.index = {I, apply_rescale(I, m.bounds), ps.P, ps.S};
  return fit;
}

inline std::vector<double> row_to_vector(const Eigen::RowVectorXd& r) { return {r.data(), r.data() + r.size()}; }

inline Eigen::RowVectorXd row_from_vector(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::RowVectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline nlohmann::json to_json(const ScoreModel& m) {
  std::vector<double> omega(m.weights.omega.data(), m.weights.omega.data() + m.weights.omega.size());
  return {{"config",
           {{"components", m.config.components},
            {"percentile", m.config.percentile},
            {"aggregation", to_string(m.config.aggregation)},
            {"standardize_pillars", m.config.standardize_pillars},
            {"range", {m.config.lo, m.config.hi}}}},
          {"scaler", panel::to_json(m.scaler)},
          {"pillars", pca::to_json(m.pillars)},
          {"weights", nn::matrix_to_json(m.weights.w)},
          {"signs", nn::matrix_to_json(m.weights.sign)},
          {"omega", omega},
          {"pillar_mean", row_to_vector(m.moments.mean)},
          {"pillar_std", row_to_vector(m.moments.std)},
          {"bounds", {{"i_min", m.bounds.i_min}, {"i_max", m.bounds.i_max}, {"lo", m.bounds.lo}, {"hi", m.bounds.hi}}}};
}

inline ScoreModel score_model_from_json(const nlohmann::json& j) {
  ScoreModel m;
  const auto& c = j.at("config");
  m.config.components = c.at("components");
  m.config.percentile = c.at("percentile");
  m.config.aggregation = aggregation_from_string(c.at("aggregation"));
  m.config.standardize_pillars = c.at("standardize_pillars");
  m.config.lo = c.at("range").at(0);
  m.config.hi = c.at("range").at(1);
  m.scaler = panel::scaler_from_json(j.at("scaler"));
  m.pillars = pca::pillars_from_json(j.at("pillars"));
  m.weights.w = nn::matrix_from_json(j.at("weights"));
  m.weights.sign = nn::matrix_from_json(j.at("signs"));
  m.weights.aggregation = m.config.aggregation;
  const auto omega = j.at("omega").get<std::vector<double>>();
  m.weights.omega = Eigen::Map<const Vector>(omega.data(), static_cast<Eigen::Index>(omega.size()));
  m.moments.mean = row_from_vector(j.at("pillar_mean").get<std::vector<double>>());
  m.moments.std = row_from_vector(j.at("pillar_std").get<std::vector<double>>());
  const auto& b = j.at("bounds");
  m.bounds = {b.at("i_min"), b.at("i_max"), b.at("lo"), b.at("hi")};
  if (m.weights.w.cols() != m.pillars.k() || m.weights.omega.size() != m.pillars.k())
    throw ValidationError("score model: weight shapes do not match pillar count");
  return m;
}

}  // namespace herdcast::scoring
