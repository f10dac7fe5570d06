#pragma once

#include <cmath>
#include <vector>

#include "herdcast/nn/tensors.hpp"

namespace herdcast::nn {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}

  void step(const std::vector<TensorRef>& params, const std::vector<Matrix>& grads) {
    if (m_.empty()) {
      for (const auto& p : params) {
        m_.push_back(Matrix::Zero(p.value->rows(), p.value->cols()));
        v_.push_back(Matrix::Zero(p.value->rows(), p.value->cols()));
      }
    }
    ++t_;
    const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = config_.beta1 * m_[i] + (1.0 - config_.beta1) * grads[i];
      v_[i] = config_.beta2 * v_[i] + (1.0 - config_.beta2) * grads[i].cwiseProduct(grads[i]);
      const Matrix m_hat = m_[i] / c1;
      const Matrix v_hat = v_[i] / c2;
      params[i].value->array() -= config_.learning_rate * m_hat.array() / (v_hat.array().sqrt() + config_.epsilon);
    }
  }

  long steps() const { return t_; }

 private:
  AdamConfig config_;
  std::vector<Matrix> m_, v_;
  long t_ = 0;
};

}  // namespace herdcast::nn
