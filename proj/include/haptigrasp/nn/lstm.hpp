#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "haptigrasp/nn/activation.hpp"
#include "haptigrasp/nn/tensor.hpp"

namespace hg::nn {

/// LSTM cell. Gate blocks of W and b are stacked in the order input,
/// forget, output, candidate; each block of W is h x (in + h) and acts on
/// the concatenation [x; h_prev].
template <typename Scalar>
struct Lstm {
  Tensor<Scalar> W;  // 4h x (in + h)
  Tensor<Scalar> b;  // 4h x 1

  Lstm() = default;
  Lstm(int in, int hidden) : W(Tensor<Scalar>::Zero(4 * hidden, in + hidden)), b(Tensor<Scalar>::Zero(4 * hidden, 1)) {}

  int hidden() const { return static_cast<int>(W.rows() / 4); }
  int in() const { return static_cast<int>(W.cols()) - hidden(); }

  void init(Rng& rng) {
    fill_uniform(W, static_cast<Scalar>(1.0 / std::sqrt(static_cast<double>(hidden()))), rng);
    b.setZero();
    b.middleRows(hidden(), hidden()).setConstant(Scalar(1));
  }

  void check() const {
    if (W.rows() % 4 != 0 || W.cols() <= W.rows() / 4) throw ShapeError("lstm W has shape " + shape_string(W));
    require_shape(b, W.rows(), 1, "lstm bias");
  }

  ParamList<Scalar> params(const std::string& prefix) {
    return {{prefix + ".W", std::ref(W)}, {prefix + ".b", std::ref(b)}};
  }
};

template <typename Scalar>
struct LstmStepCache {
  Tensor<Scalar> xh;  // [x; h_prev]
  Tensor<Scalar> i, f, o, g;
  Tensor<Scalar> c_prev, c, tanh_c, h;
};

template <typename Scalar>
struct LstmState {
  Tensor<Scalar> h;
  Tensor<Scalar> c;
};

template <typename Scalar>
LstmStepCache<Scalar> lstm_step_cached(const Lstm<Scalar>& cell, const Tensor<Scalar>& x, const Tensor<Scalar>& h_prev,
                                       const Tensor<Scalar>& c_prev) {
  cell.check();
  const int h = cell.hidden();
  require_shape(x, cell.in(), x.cols(), "lstm input");
  require_shape(h_prev, h, x.cols(), "lstm h_prev");
  require_shape(c_prev, h, x.cols(), "lstm c_prev");
  LstmStepCache<Scalar> s;
  s.xh.resize(cell.W.cols(), x.cols());
  s.xh.topRows(x.rows()) = x;
  s.xh.bottomRows(h) = h_prev;
  Tensor<Scalar> a = cell.W * s.xh;
  a.colwise() += cell.b.col(0);
  s.i = sigmoid(a.topRows(h));
  s.f = sigmoid(a.middleRows(h, h));
  s.o = sigmoid(a.middleRows(2 * h, h));
  s.g = a.bottomRows(h).array().tanh().matrix();
  s.c_prev = c_prev;
  s.c = (s.f.array() * c_prev.array() + s.i.array() * s.g.array()).matrix();
  s.tanh_c = s.c.array().tanh().matrix();
  s.h = (s.o.array() * s.tanh_c.array()).matrix();
  return s;
}

template <typename Scalar>
LstmState<Scalar> lstm_step(const Lstm<Scalar>& cell, const Tensor<Scalar>& x, const Tensor<Scalar>& h_prev,
                            const Tensor<Scalar>& c_prev) {
  auto s = lstm_step_cached(cell, x, h_prev, c_prev);
  return {std::move(s.h), std::move(s.c)};
}

template <typename Scalar>
using LstmSequenceCache = std::vector<LstmStepCache<Scalar>>;

/// Runs the cell over `xs` from a zero state.
template <typename Scalar>
LstmSequenceCache<Scalar> lstm_forward(const Lstm<Scalar>& cell, const std::vector<Tensor<Scalar>>& xs) {
  if (xs.empty()) throw ShapeError("lstm sequence is empty");
  const Eigen::Index batch = xs.front().cols();
  Tensor<Scalar> h = Tensor<Scalar>::Zero(cell.hidden(), batch);
  Tensor<Scalar> c = h;
  LstmSequenceCache<Scalar> cache;
  cache.reserve(xs.size());
  for (const auto& x : xs) {
    cache.push_back(lstm_step_cached(cell, x, h, c));
    h = cache.back().h;
    c = cache.back().c;
  }
  return cache;
}

template <typename Scalar>
struct LstmGrads {
  Tensor<Scalar> dW;
  Tensor<Scalar> db;
  std::vector<Tensor<Scalar>> dxs;
  Tensor<Scalar> dh0;
  Tensor<Scalar> dc0;
};

/// Backpropagation through time. `dhs[t]` is the loss gradient on h_t from
/// outside the recurrence (empty vector: none); `dh_last` is added at the
/// final step.
template <typename Scalar>
LstmGrads<Scalar> lstm_backward(const Lstm<Scalar>& cell, const LstmSequenceCache<Scalar>& cache,
                                const std::vector<Tensor<Scalar>>& dhs, const Tensor<Scalar>& dh_last) {
  const int h = cell.hidden();
  const int in = cell.in();
  const auto T = static_cast<int>(cache.size());
  if (T == 0) throw ShapeError("lstm backward on an empty sequence");
  if (!dhs.empty() && static_cast<int>(dhs.size()) != T)
    throw ShapeError("lstm backward: " + std::to_string(dhs.size()) + " step gradients for " + std::to_string(T) +
                     " steps");
  const Eigen::Index batch = cache.front().h.cols();
  LstmGrads<Scalar> g;
  g.dW = Tensor<Scalar>::Zero(cell.W.rows(), cell.W.cols());
  g.db = Tensor<Scalar>::Zero(cell.b.rows(), 1);
  g.dxs.resize(T);
  Tensor<Scalar> dh = Tensor<Scalar>::Zero(h, batch);
  Tensor<Scalar> dc = Tensor<Scalar>::Zero(h, batch);
  if (dh_last.size() > 0) {
    require_shape(dh_last, h, batch, "lstm dh_last");
    dh += dh_last;
  }
  Tensor<Scalar> da(4 * h, batch);
  for (int t = T - 1; t >= 0; --t) {
    const auto& s = cache[t];
    if (!dhs.empty()) {
      require_shape(dhs[t], h, batch, "lstm step gradient");
      dh += dhs[t];
    }
    const auto o = s.o.array();
    const auto i = s.i.array();
    const auto f = s.f.array();
    const auto gg = s.g.array();
    const auto tc = s.tanh_c.array();
    dc.array() += dh.array() * o * (Scalar(1) - tc.square());
    da.topRows(h) = (dc.array() * gg * i * (Scalar(1) - i)).matrix();
    da.middleRows(h, h) = (dc.array() * s.c_prev.array() * f * (Scalar(1) - f)).matrix();
    da.middleRows(2 * h, h) = (dh.array() * tc * o * (Scalar(1) - o)).matrix();
    da.bottomRows(h) = (dc.array() * i * (Scalar(1) - gg.square())).matrix();
    g.dW.noalias() += da * s.xh.transpose();
    g.db += da.rowwise().sum();
    Tensor<Scalar> dxh = cell.W.transpose() * da;
    g.dxs[t] = dxh.topRows(in);
    dh = dxh.bottomRows(h);
    dc = (dc.array() * f).matrix();
  }
  g.dh0 = dh;
  g.dc0 = dc;
  return g;
}

}  // namespace hg::nn
