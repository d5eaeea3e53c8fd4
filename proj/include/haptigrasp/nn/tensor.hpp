#pragma once

#include <Eigen/Core>
#include <functional>
#include <string>
#include <vector>

#include "haptigrasp/error.hpp"
#include "haptigrasp/random.hpp"

namespace hg::nn {

/// Dense 2-D tensor. Batched activations store one sample per column.
template <typename Scalar>
using Tensor = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
std::string shape_string(const Tensor<Scalar>& t) {
  return std::to_string(t.rows()) + "x" + std::to_string(t.cols());
}

template <typename Scalar>
void require_shape(const Tensor<Scalar>& t, Eigen::Index rows, Eigen::Index cols, const std::string& what) {
  if (t.rows() != rows || t.cols() != cols)
    throw ShapeError(what + ": expected " + std::to_string(rows) + "x" + std::to_string(cols) + ", got " +
                     shape_string(t));
}

template <typename Scalar>
void require_same_shape(const Tensor<Scalar>& a, const Tensor<Scalar>& b, const std::string& what) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ShapeError(what + ": " + shape_string(a) + " vs " + shape_string(b));
}

template <typename Scalar>
bool all_finite(const Tensor<Scalar>& t) {
  return t.allFinite();
}

template <typename Scalar>
void fill_uniform(Tensor<Scalar>& t, Scalar bound, Rng& rng) {
  for (Eigen::Index j = 0; j < t.cols(); ++j)
    for (Eigen::Index i = 0; i < t.rows(); ++i) t(i, j) = static_cast<Scalar>(uniform(rng, -bound, bound));
}

/// Named view of a trainable tensor; the referenced storage outlives the view.
template <typename Scalar>
struct Param {
  std::string name;
  std::reference_wrapper<Tensor<Scalar>> value;
};

template <typename Scalar>
using ParamList = std::vector<Param<Scalar>>;

template <typename Scalar>
using GradList = std::vector<Tensor<Scalar>>;

/// Zero gradients shaped like `params`.
template <typename Scalar>
GradList<Scalar> zeros_like(const ParamList<Scalar>& params) {
  GradList<Scalar> g;
  g.reserve(params.size());
  for (const auto& p : params) g.push_back(Tensor<Scalar>::Zero(p.value.get().rows(), p.value.get().cols()));
  return g;
}

/// Scales `grads` in place so their joint L2 norm is at most `max_norm`;
/// returns the norm before clipping.
template <typename Scalar>
Scalar clip_global_norm(GradList<Scalar>& grads, Scalar max_norm) {
  Scalar sq = 0;
  for (const auto& g : grads) sq += g.squaredNorm();
  const Scalar norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0) {
    const Scalar s = max_norm / norm;
    for (auto& g : grads) g *= s;
  }
  return norm;
}

}  // namespace hg::nn
