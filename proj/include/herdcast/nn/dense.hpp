#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "herdcast/ad/tape.hpp"
#include "herdcast/core/rng.hpp"
#include "herdcast/nn/tensors.hpp"

namespace herdcast::nn {

enum class Activation { identity, relu };

inline const char* to_string(Activation a) { return a == Activation::relu ? "relu" : "identity"; }

// y = x W^T + b, with W stored out x in and b as a 1 x out row.
struct Dense {
  Matrix weight;
  Matrix bias;

  Eigen::Index in() const { return weight.cols(); }
  Eigen::Index out() const { return weight.rows(); }
};

inline Dense glorot_dense(Eigen::Index in, Eigen::Index out, Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(in + out));
  Dense d{Matrix(out, in), Matrix::Zero(1, out)};
  for (Eigen::Index i = 0; i < out; ++i)
    for (Eigen::Index j = 0; j < in; ++j) d.weight(i, j) = rng.uniform(-a, a);
  return d;
}

inline Matrix glorot_matrix(Eigen::Index in, Eigen::Index out, Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(in + out));
  Matrix m(in, out);
  for (Eigen::Index i = 0; i < in; ++i)
    for (Eigen::Index j = 0; j < out; ++j) m(i, j) = rng.uniform(-a, a);
  return m;
}

inline ad::Var apply(const ad::Var& x, const ad::Var& weight, const ad::Var& bias, Activation act) {
  ad::Var y = ad::add_row(ad::matmul_nt(x, weight), bias);
  return act == Activation::relu ? ad::relu(y) : y;
}

// Stack of dense layers; hidden layers use `hidden`, the last uses `output`.
struct Mlp {
  std::vector<Dense> layers;
  Activation hidden = Activation::relu;
  Activation output = Activation::identity;

  static Mlp make(const std::vector<int>& widths, Rng& rng,
                  Activation hidden = Activation::relu, Activation output = Activation::identity) {
    Mlp m;
    m.hidden = hidden;
    m.output = output;
    for (std::size_t i = 0; i + 1 < widths.size(); ++i)
      m.layers.push_back(glorot_dense(widths[i], widths[i + 1], rng));
    return m;
  }

  Eigen::Index in() const { return layers.front().in(); }
  Eigen::Index out() const { return layers.back().out(); }

  std::vector<int> widths() const {
    std::vector<int> w;
    if (layers.empty()) return w;
    w.push_back(static_cast<int>(layers.front().in()));
    for (const auto& l : layers) w.push_back(static_cast<int>(l.out()));
    return w;
  }

  void append_tensors(const std::string& prefix, std::vector<TensorRef>& out) {
    for (std::size_t i = 0; i < layers.size(); ++i) {
      out.push_back({prefix + "." + std::to_string(i) + ".weight", &layers[i].weight});
      out.push_back({prefix + "." + std::to_string(i) + ".bias", &layers[i].bias});
    }
  }
  void append_tensors(const std::string& prefix, std::vector<ConstTensorRef>& out) const {
    for (std::size_t i = 0; i < layers.size(); ++i) {
      out.push_back({prefix + "." + std::to_string(i) + ".weight", &layers[i].weight});
      out.push_back({prefix + "." + std::to_string(i) + ".bias", &layers[i].bias});
    }
  }

  std::size_t tensor_count() const { return 2 * layers.size(); }
};

// Forward through an Mlp whose tensors start at vars[offset]. `after_hidden`
// is applied to each hidden activation (used for dropout).
template <class Hook>
ad::Var mlp_forward(const Mlp& mlp, const std::vector<ad::Var>& vars, std::size_t offset, ad::Var x,
                    Hook&& after_hidden) {
  for (std::size_t i = 0; i < mlp.layers.size(); ++i) {
    const bool last = i + 1 == mlp.layers.size();
    x = apply(x, vars[offset + 2 * i], vars[offset + 2 * i + 1], last ? mlp.output : mlp.hidden);
    if (!last) x = after_hidden(x, i);
  }
  return x;
}

inline ad::Var mlp_forward(const Mlp& mlp, const std::vector<ad::Var>& vars, std::size_t offset, ad::Var x) {
  return mlp_forward(mlp, vars, offset, x, [](ad::Var v, std::size_t) { return v; });
}

}  // namespace herdcast::nn
