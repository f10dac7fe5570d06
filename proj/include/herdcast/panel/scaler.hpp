#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "herdcast/core/error.hpp"
#include "herdcast/core/stats.hpp"
#include "herdcast/panel/panel.hpp"

namespace herdcast::panel {

// Per-feature statistics for min-max scaling and z-scoring (sample std).
struct ScalerParams {
  Eigen::RowVectorXd min, max, mean, std;
};

inline ScalerParams fit_scaler(const Matrix& x, const std::vector<std::string>& names) {
  if (x.rows() < 1) throw ValidationError("cannot fit a scaler on zero rows");
  ScalerParams p;
  p.min = x.colwise().minCoeff();
  p.max = x.colwise().maxCoeff();
  p.mean = stats::column_means(x);
  p.std = stats::column_stddevs(x);
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    if (!(p.max(j) > p.min(j))) {
      const auto name = j < static_cast<Eigen::Index>(names.size()) ? names[static_cast<std::size_t>(j)]
                                                                    : "#" + std::to_string(j);
      throw ValidationError("feature '" + name + "' is constant");
    }
  }
  return p;
}

inline Matrix minmax_apply(const Matrix& x, const ScalerParams& p) {
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j)
    out.col(j) = (x.col(j).array() - p.min(j)) / (p.max(j) - p.min(j));
  return out;
}

inline Matrix minmax_inverse(const Matrix& x, const ScalerParams& p) {
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) out.col(j) = x.col(j).array() * (p.max(j) - p.min(j)) + p.min(j);
  return out;
}

inline Matrix standard_apply(const Matrix& x, const ScalerParams& p) {
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) out.col(j) = (x.col(j).array() - p.mean(j)) / p.std(j);
  return out;
}

inline Matrix standard_inverse(const Matrix& x, const ScalerParams& p) {
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) out.col(j) = x.col(j).array() * p.std(j) + p.mean(j);
  return out;
}

struct Scaled {
  Matrix values;
  ScalerParams params;
};

inline Scaled minmax_fit_apply(const IndicatorPanel& panel) {
  auto params = fit_scaler(panel.values, panel.feature_names);
  return {minmax_apply(panel.values, params), std::move(params)};
}

inline Scaled standardize(const IndicatorPanel& panel) {
  auto params = fit_scaler(panel.values, panel.feature_names);
  return {standard_apply(panel.values, params), std::move(params)};
}

inline nlohmann::json to_json(const ScalerParams& p) {
  auto row = [](const Eigen::RowVectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  return {{"min", row(p.min)}, {"max", row(p.max)}, {"mean", row(p.mean)}, {"std", row(p.std)}};
}

inline ScalerParams scaler_from_json(const nlohmann::json& j) {
  auto row = [](const nlohmann::json& a) {
    const auto v = a.get<std::vector<double>>();
    return Eigen::RowVectorXd(Eigen::Map<const Eigen::RowVectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
  };
  return {row(j.at("min")), row(j.at("max")), row(j.at("mean")), row(j.at("std"))};
}

}  // namespace herdcast::panel
