#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "herdcast/stgnn/metrics.hpp"

namespace herdcast::vae {

struct UtilityReport {
  stgnn::MetricsReport real_only;
  stgnn::MetricsReport augmented;
  double delta_mae = 0.0;   // augmented - real
  double delta_rmse = 0.0;
  double delta_r2 = 0.0;
};

// Runs the same downstream procedure on the real-only and augmented training
// sets and scores both on the same held-out real targets. `procedure(data)`
// trains with fixed seed and config and returns predictions for the test rows.
template <class Data, class Procedure>
UtilityReport utility_harness(const Data& real, const Data& augmented, Procedure&& procedure,
                              std::span<const double> test_targets) {
  const std::vector<double> pred_real = procedure(real);
  const std::vector<double> pred_aug = procedure(augmented);
  UtilityReport r;
  r.real_only = stgnn::metrics(test_targets, pred_real);
  r.augmented = stgnn::metrics(test_targets, pred_aug);
  r.delta_mae = r.augmented.mae - r.real_only.mae;
  r.delta_rmse = r.augmented.rmse - r.real_only.rmse;
  r.delta_r2 = r.augmented.r2 - r.real_only.r2;
  return r;
}

}  // namespace herdcast::vae
