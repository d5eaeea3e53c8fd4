#pragma once

#include <cmath>
#include <string>

#include "haptigrasp/nn/activation.hpp"
#include "haptigrasp/nn/tensor.hpp"

namespace hg::nn {

/// y = act(W x + b), x is in x batch.
template <typename Scalar>
struct Dense {
  Tensor<Scalar> W;  // out x in
  Tensor<Scalar> b;  // out x 1
  Activation activation = Activation::identity;

  Dense() = default;
  Dense(int in, int out, Activation act) : W(Tensor<Scalar>::Zero(out, in)), b(Tensor<Scalar>::Zero(out, 1)), activation(act) {}

  int in() const { return static_cast<int>(W.cols()); }
  int out() const { return static_cast<int>(W.rows()); }

  void init(Rng& rng) {
    fill_uniform(W, static_cast<Scalar>(std::sqrt(6.0 / (in() + out()))), rng);
    b.setZero();
  }

  void check() const {
    require_shape(b, W.rows(), 1, "dense bias");
  }

  ParamList<Scalar> params(const std::string& prefix) {
    return {{prefix + ".W", std::ref(W)}, {prefix + ".b", std::ref(b)}};
  }
};

template <typename Scalar>
struct DenseCache {
  Tensor<Scalar> z;
  Tensor<Scalar> y;
};

template <typename Scalar>
struct DenseGrads {
  Tensor<Scalar> dx;
  Tensor<Scalar> dW;
  Tensor<Scalar> db;
};

template <typename Scalar>
DenseCache<Scalar> dense_forward_cached(const Dense<Scalar>& layer, const Tensor<Scalar>& x) {
  if (x.rows() != layer.W.cols())
    throw ShapeError("dense input: W is " + shape_string(layer.W) + ", x is " + shape_string(x));
  layer.check();
  DenseCache<Scalar> c;
  c.z = (layer.W * x).colwise() + layer.b.col(0);
  c.y = activate(layer.activation, c.z);
  return c;
}

template <typename Scalar>
Tensor<Scalar> dense_forward(const Dense<Scalar>& layer, const Tensor<Scalar>& x) {
  return dense_forward_cached(layer, x).y;
}

template <typename Scalar>
DenseGrads<Scalar> dense_backward(const Dense<Scalar>& layer, const Tensor<Scalar>& x, const DenseCache<Scalar>& cache,
                                  const Tensor<Scalar>& grad_out) {
  require_same_shape(grad_out, cache.y, "dense grad_out");
  const Tensor<Scalar> dz = activation_backward(layer.activation, cache.z, cache.y, grad_out);
  DenseGrads<Scalar> g;
  g.dW.noalias() = dz * x.transpose();
  g.db = dz.rowwise().sum();
  g.dx.noalias() = layer.W.transpose() * dz;
  return g;
}

/// Recomputes the forward pass; prefer the cached overload inside training loops.
template <typename Scalar>
DenseGrads<Scalar> dense_backward(const Dense<Scalar>& layer, const Tensor<Scalar>& x, const Tensor<Scalar>& grad_out) {
  return dense_backward(layer, x, dense_forward_cached(layer, x), grad_out);
}

}  // namespace hg::nn
