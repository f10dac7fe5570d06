#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "herdcast/ad/tape.hpp"
#include "herdcast/core/error.hpp"

namespace herdcast::nn {

using Matrix = Eigen::MatrixXd;

struct TensorRef {
  std::string name;
  Matrix* value;
};

struct ConstTensorRef {
  std::string name;
  const Matrix* value;
};

// Registers every tensor on the tape as a leaf, in order.
inline std::vector<ad::Var> bind(ad::Tape& tape, const std::vector<ConstTensorRef>& tensors) {
  std::vector<ad::Var> vars;
  vars.reserve(tensors.size());
  for (const auto& t : tensors) vars.push_back(tape.leaf(*t.value));
  return vars;
}

inline std::vector<ad::Var> bind(ad::Tape& tape, const std::vector<TensorRef>& tensors) {
  std::vector<ad::Var> vars;
  vars.reserve(tensors.size());
  for (const auto& t : tensors) vars.push_back(tape.leaf(*t.value));
  return vars;
}

inline double squared_norm(const std::vector<ConstTensorRef>& tensors) {
  double s = 0.0;
  for (const auto& t : tensors) s += t.value->squaredNorm();
  return s;
}

inline nlohmann::json matrix_to_json(const Matrix& m) {
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) data.push_back(m(i, j));
  return {{"shape", {m.rows(), m.cols()}}, {"data", data}};
}

inline Matrix matrix_from_json(const nlohmann::json& j) {
  const auto rows = j.at("shape").at(0).get<Eigen::Index>();
  const auto cols = j.at("shape").at(1).get<Eigen::Index>();
  const auto& data = j.at("data");
  if (static_cast<Eigen::Index>(data.size()) != rows * cols)
    throw ValidationError("tensor data length does not match its shape");
  Matrix m(rows, cols);
  std::size_t k = 0;
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j2 = 0; j2 < cols; ++j2) m(i, j2) = data[k++].get<double>();
  return m;
}

inline nlohmann::json tensors_to_json(const std::vector<ConstTensorRef>& tensors) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& t : tensors) {
    auto j = matrix_to_json(*t.value);
    j["name"] = t.name;
    out.push_back(std::move(j));
  }
  return out;
}

// Fills tensors in place; names and shapes must match.
inline void tensors_from_json(const nlohmann::json& j, const std::vector<TensorRef>& tensors) {
  if (!j.is_array() || j.size() != tensors.size())
    throw ValidationError("tensor list length mismatch");
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    if (j[i].at("name").get<std::string>() != tensors[i].name)
      throw ValidationError("unexpected tensor '" + j[i].at("name").get<std::string>() + "'");
    Matrix m = matrix_from_json(j[i]);
    if (m.rows() != tensors[i].value->rows() || m.cols() != tensors[i].value->cols())
      throw ValidationError("shape mismatch for tensor '" + tensors[i].name + "'");
    *tensors[i].value = std::move(m);
  }
}

}  // namespace herdcast::nn
