#pragma once

#include <cmath>
#include <span>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace herdcast::stgnn {

struct MetricsReport {
  double r2 = 0.0;
  double mae = 0.0;
  double mse = 0.0;
  double rmse = 0.0;
  std::size_t count = 0;
};

// R^2 = 1 - SSE/SST. A constant target has SST = 0; R^2 is then 1 for a
// perfect fit and 0 otherwise.
inline MetricsReport metrics(std::span<const double> y, std::span<const double> y_hat) {
  if (y.size() != y_hat.size()) throw std::invalid_argument("metrics: length mismatch");
  MetricsReport m;
  m.count = y.size();
  if (y.empty()) return m;
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= static_cast<double>(y.size());
  double sse = 0.0, sst = 0.0, sae = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double e = y[i] - y_hat[i];
    sse += e * e;
    sae += std::abs(e);
    sst += (y[i] - mean) * (y[i] - mean);
  }
  const double n = static_cast<double>(y.size());
  m.mae = sae / n;
  m.mse = sse / n;
  m.rmse = std::sqrt(m.mse);
  m.r2 = sst > 0.0 ? 1.0 - sse / sst : (sse == 0.0 ? 1.0 : 0.0);
  return m;
}

inline nlohmann::json to_json(const MetricsReport& m) {
  return {{"r2", m.r2}, {"mae", m.mae}, {"mse", m.mse}, {"rmse", m.rmse}, {"count", m.count}};
}

inline MetricsReport metrics_from_json(const nlohmann::json& j) {
  MetricsReport m;
  m.r2 = j.at("r2");
  m.mae = j.at("mae");
  m.mse = j.at("mse");
  m.rmse = j.at("rmse");
  m.count = j.at("count");
  return m;
}

}  // namespace herdcast::stgnn
