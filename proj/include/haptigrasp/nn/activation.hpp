#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <string_view>
#include <type_traits>

#include "haptigrasp/nn/tensor.hpp"

namespace hg::nn {

enum class Activation { identity, relu, tanh, sigmoid };

inline std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
    case Activation::sigmoid: return "sigmoid";
  }
  return "?";
}

inline Activation activation_from_string(std::string_view s) {
  if (s == "identity") return Activation::identity;
  if (s == "relu") return Activation::relu;
  if (s == "tanh") return Activation::tanh;
  if (s == "sigmoid") return Activation::sigmoid;
  throw ValidationError("unknown activation '" + std::string(s) + "'");
}

template <typename Scalar>
  requires std::is_floating_point_v<Scalar>
Scalar sigmoid(Scalar z) {
  // Split on sign so exp never overflows.
  if (z >= 0) return Scalar(1) / (Scalar(1) + std::exp(-z));
  const Scalar e = std::exp(z);
  return e / (Scalar(1) + e);
}

template <typename Derived>
auto sigmoid(const Eigen::MatrixBase<Derived>& z) {
  using S = typename Derived::Scalar;
  return z.unaryExpr([](S v) { return sigmoid(v); });
}

template <typename Scalar>
Tensor<Scalar> activate(Activation a, const Tensor<Scalar>& z) {
  switch (a) {
    case Activation::identity: return z;
    case Activation::relu: return z.cwiseMax(Scalar(0));
    case Activation::tanh: return z.array().tanh().matrix();
    case Activation::sigmoid: return sigmoid(z);
  }
  return z;
}

/// dL/dz from dL/dy, given pre-activation z and output y. relu'(0) = 0.
template <typename Scalar>
Tensor<Scalar> activation_backward(Activation a, const Tensor<Scalar>& z, const Tensor<Scalar>& y,
                                   const Tensor<Scalar>& grad_y) {
  switch (a) {
    case Activation::identity: return grad_y;
    case Activation::relu: return (z.array() > Scalar(0)).select(grad_y.array(), Scalar(0)).matrix();
    case Activation::tanh: return (grad_y.array() * (Scalar(1) - y.array().square())).matrix();
    case Activation::sigmoid: return (grad_y.array() * y.array() * (Scalar(1) - y.array())).matrix();
  }
  return grad_y;
}

}  // namespace hg::nn
