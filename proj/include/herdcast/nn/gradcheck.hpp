#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "herdcast/nn/tensors.hpp"

namespace herdcast::nn {

struct TensorGradError {
  std::string name;
  double relative_error = 0.0;  // ||analytic - numeric|| / max(||analytic||, ||numeric||)
  double max_abs_error = 0.0;
  double analytic_norm = 0.0;
};

struct GradCheckReport {
  std::vector<TensorGradError> tensors;
  double max_relative_error = 0.0;
};

// Central finite differences against analytic gradients for every entry of
// every tensor. `loss()` evaluates the loss at the current tensor values;
// `analytic` holds gradients in the same tensor order.
template <class LossFn>
GradCheckReport check_gradients(const std::vector<TensorRef>& tensors, const std::vector<Matrix>& analytic,
                                LossFn&& loss, double step = 1e-5) {
  GradCheckReport report;
  for (std::size_t t = 0; t < tensors.size(); ++t) {
    Matrix& p = *tensors[t].value;
    Matrix numeric(p.rows(), p.cols());
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
      for (Eigen::Index j = 0; j < p.cols(); ++j) {
        const double orig = p(i, j);
        p(i, j) = orig + step;
        const double up = loss();
        p(i, j) = orig - step;
        const double down = loss();
        p(i, j) = orig;
        numeric(i, j) = (up - down) / (2.0 * step);
      }
    }
    TensorGradError e;
    e.name = tensors[t].name;
    const double an = analytic[t].norm();
    const double nn = numeric.norm();
    const double diff = (analytic[t] - numeric).norm();
    e.analytic_norm = an;
    e.max_abs_error = (analytic[t] - numeric).cwiseAbs().maxCoeff();
    // Both sides vanish (e.g. dead units): nothing to compare.
    e.relative_error = std::max(an, nn) < 1e-10 ? 0.0 : diff / std::max(an, nn);
    report.max_relative_error = std::max(report.max_relative_error, e.relative_error);
    report.tensors.push_back(std::move(e));
  }
  return report;
}

}  // namespace herdcast::nn
