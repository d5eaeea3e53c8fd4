#pragma once

#include <string>
#include <vector>

#include "haptigrasp/nn/dense.hpp"

namespace hg::nn {

/// Stack of dense layers. Hidden layers share one activation; the last
/// layer has its own (usually identity, producing logits).
template <typename Scalar>
struct Mlp {
  std::vector<Dense<Scalar>> layers;

  Mlp() = default;
  Mlp(int in, const std::vector<int>& hidden, int out, Activation hidden_act, Activation out_act) {
    int prev = in;
    for (int h : hidden) {
      layers.emplace_back(prev, h, hidden_act);
      prev = h;
    }
    layers.emplace_back(prev, out, out_act);
  }

  int in() const { return layers.front().in(); }
  int out() const { return layers.back().out(); }

  void init(Rng& rng) {
    for (auto& l : layers) l.init(rng);
  }

  ParamList<Scalar> params(const std::string& prefix) {
    ParamList<Scalar> p;
    for (std::size_t i = 0; i < layers.size(); ++i) {
      auto lp = layers[i].params(prefix + "." + std::to_string(i));
      p.insert(p.end(), lp.begin(), lp.end());
    }
    return p;
  }

  /// Layer sizes and activations, e.g. "64>512:relu>1:identity".
  std::string fingerprint() const {
    std::string s = std::to_string(in());
    for (const auto& l : layers) s += ">" + std::to_string(l.out()) + ":" + std::string(to_string(l.activation));
    return s;
  }
};

template <typename Scalar>
struct MlpCache {
  Tensor<Scalar> input;
  std::vector<DenseCache<Scalar>> layers;

  const Tensor<Scalar>& output() const { return layers.back().y; }
};

template <typename Scalar>
MlpCache<Scalar> mlp_forward_cached(const Mlp<Scalar>& net, const Tensor<Scalar>& x) {
  MlpCache<Scalar> c;
  c.input = x;
  c.layers.reserve(net.layers.size());
  const Tensor<Scalar>* cur = &c.input;
  for (const auto& l : net.layers) {
    c.layers.push_back(dense_forward_cached(l, *cur));
    cur = &c.layers.back().y;
  }
  return c;
}

template <typename Scalar>
Tensor<Scalar> mlp_forward(const Mlp<Scalar>& net, const Tensor<Scalar>& x) {
  Tensor<Scalar> cur = x;
  for (const auto& l : net.layers) cur = dense_forward(l, cur);
  return cur;
}

/// Parameter gradients in the order of `Mlp::params`, plus d/d input.
template <typename Scalar>
struct MlpGrads {
  GradList<Scalar> params;
  Tensor<Scalar> dx;
};

template <typename Scalar>
MlpGrads<Scalar> mlp_backward(const Mlp<Scalar>& net, const MlpCache<Scalar>& cache, const Tensor<Scalar>& grad_out) {
  const auto L = net.layers.size();
  MlpGrads<Scalar> g;
  g.params.resize(2 * L);
  Tensor<Scalar> d = grad_out;
  for (std::size_t k = L; k-- > 0;) {
    const Tensor<Scalar>& x = k == 0 ? cache.input : cache.layers[k - 1].y;
    auto lg = dense_backward(net.layers[k], x, cache.layers[k], d);
    g.params[2 * k] = std::move(lg.dW);
    g.params[2 * k + 1] = std::move(lg.db);
    d = std::move(lg.dx);
  }
  g.dx = std::move(d);
  return g;
}

}  // namespace hg::nn
