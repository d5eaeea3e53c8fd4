#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "haptigrasp/nn/activation.hpp"
#include "haptigrasp/nn/tensor.hpp"

namespace hg::nn {

template <typename Scalar>
struct LossResult {
  Scalar value = 0;
  Tensor<Scalar> grad;  // d value / d input, shaped like the input
};

/// Mean squared error over all elements.
template <typename Scalar>
LossResult<Scalar> loss_l2(const Tensor<Scalar>& pred, const Tensor<Scalar>& target) {
  require_same_shape(pred, target, "l2 loss");
  const auto n = static_cast<Scalar>(pred.size());
  LossResult<Scalar> r;
  const Tensor<Scalar> diff = pred - target;
  r.value = diff.squaredNorm() / n;
  r.grad = diff * (Scalar(2) / n);
  return r;
}

inline constexpr double kProbClamp = 1e-7;

inline void require_binary_label(double y) {
  if (y != 0.0 && y != 1.0) throw ArgumentError("label must be 0 or 1, got " + std::to_string(y));
}

/// Binary cross-entropy on a probability, clamped to [1e-7, 1 - 1e-7]. The
/// gradient is zero where the clamp is active.
template <typename Scalar>
std::pair<Scalar, Scalar> bce_prob(Scalar p, Scalar label) {
  require_binary_label(static_cast<double>(label));
  const auto lo = static_cast<Scalar>(kProbClamp);
  const Scalar pc = std::clamp(p, lo, Scalar(1) - lo);
  const Scalar value = -(label * std::log(pc) + (Scalar(1) - label) * std::log(Scalar(1) - pc));
  const bool clamped = p < lo || p > Scalar(1) - lo;
  const Scalar grad = clamped ? Scalar(0) : -(label / pc) + (Scalar(1) - label) / (Scalar(1) - pc);
  return {value, grad};
}

/// Binary cross-entropy of sigmoid(logit); returns value and d/dlogit.
template <typename Scalar>
std::pair<Scalar, Scalar> bce_logit(Scalar logit, Scalar label) {
  require_binary_label(static_cast<double>(label));
  const auto lo = static_cast<Scalar>(kProbClamp);
  const Scalar p = sigmoid(logit);
  const Scalar pc = std::clamp(p, lo, Scalar(1) - lo);
  const Scalar value = -(label * std::log(pc) + (Scalar(1) - label) * std::log(Scalar(1) - pc));
  const bool clamped = p < lo || p > Scalar(1) - lo;
  return {value, clamped ? Scalar(0) : p - label};
}

/// Mean binary cross-entropy over a 1 x batch row of logits.
template <typename Scalar>
LossResult<Scalar> loss_bce(const Tensor<Scalar>& logits, const std::vector<int>& labels) {
  if (logits.rows() != 1 || logits.cols() != static_cast<Eigen::Index>(labels.size()))
    throw ShapeError("bce loss: logits " + shape_string(logits) + " for " + std::to_string(labels.size()) + " labels");
  LossResult<Scalar> r;
  r.grad = Tensor<Scalar>::Zero(1, logits.cols());
  const auto n = static_cast<Scalar>(labels.size());
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    const auto [v, d] = bce_logit(logits(0, j), static_cast<Scalar>(labels[j]));
    r.value += v / n;
    r.grad(0, j) = d / n;
  }
  return r;
}

/// Mean softmax cross-entropy; logits are classes x batch.
template <typename Scalar>
LossResult<Scalar> loss_softmax_ce(const Tensor<Scalar>& logits, const std::vector<int>& labels) {
  if (logits.cols() != static_cast<Eigen::Index>(labels.size()))
    throw ShapeError("softmax loss: logits " + shape_string(logits) + " for " + std::to_string(labels.size()) +
                     " labels");
  LossResult<Scalar> r;
  r.grad.resize(logits.rows(), logits.cols());
  const auto n = static_cast<Scalar>(labels.size());
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    const int y = labels[j];
    if (y < 0 || y >= logits.rows()) throw ArgumentError("class label " + std::to_string(y) + " out of range");
    const Scalar m = logits.col(j).maxCoeff();
    const auto e = (logits.col(j).array() - m).exp();
    const Scalar z = e.sum();
    r.value += (std::log(z) + m - logits(y, j)) / n;
    r.grad.col(j) = (e / z).matrix() / n;
    r.grad(y, j) -= Scalar(1) / n;
  }
  return r;
}

/// One-vs-rest hinge: mean over the batch of sum_k max(0, 1 - t_k s_k),
/// t_k = +1 for the true class and -1 otherwise. Subgradient 0 at the kink.
template <typename Scalar>
LossResult<Scalar> loss_hinge_ovr(const Tensor<Scalar>& scores, const std::vector<int>& labels) {
  if (scores.cols() != static_cast<Eigen::Index>(labels.size()))
    throw ShapeError("hinge loss: scores " + shape_string(scores) + " for " + std::to_string(labels.size()) +
                     " labels");
  LossResult<Scalar> r;
  r.grad = Tensor<Scalar>::Zero(scores.rows(), scores.cols());
  const auto n = static_cast<Scalar>(labels.size());
  for (Eigen::Index j = 0; j < scores.cols(); ++j) {
    if (labels[j] < 0 || labels[j] >= scores.rows())
      throw ArgumentError("class label " + std::to_string(labels[j]) + " out of range");
    for (Eigen::Index k = 0; k < scores.rows(); ++k) {
      const Scalar t = k == labels[j] ? Scalar(1) : Scalar(-1);
      const Scalar margin = Scalar(1) - t * scores(k, j);
      if (margin > 0) {
        r.value += margin / n;
        r.grad(k, j) = -t / n;
      }
    }
  }
  return r;
}

inline constexpr int kRegraspDims = 4;
inline constexpr int kBinsPerDim = 5;
inline constexpr int kRegraspLogits = kRegraspDims * kBinsPerDim;

using ExecutedBins = std::array<int, kRegraspDims>;

/// Masked re-grasp loss. logits are 20 x batch, dimension i occupies rows
/// [5i, 5i+5). Per sample only the executed bin of each dimension
/// contributes a cross-entropy term against the outcome label; the loss is
/// the sum over samples and dimensions, every other logit gets gradient 0.
template <typename Scalar>
LossResult<Scalar> loss_regrasp(const Tensor<Scalar>& logits, const std::vector<ExecutedBins>& executed,
                                const std::vector<int>& labels) {
  if (logits.rows() != kRegraspLogits || logits.cols() != static_cast<Eigen::Index>(labels.size()) ||
      executed.size() != labels.size())
    throw ShapeError("regrasp loss: logits " + shape_string(logits) + ", " + std::to_string(executed.size()) +
                     " actions, " + std::to_string(labels.size()) + " labels");
  LossResult<Scalar> r;
  r.grad = Tensor<Scalar>::Zero(logits.rows(), logits.cols());
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    for (int i = 0; i < kRegraspDims; ++i) {
      const int bin = executed[j][i];
      if (bin < 0 || bin >= kBinsPerDim) throw ArgumentError("executed bin " + std::to_string(bin) + " out of range");
      const int row = i * kBinsPerDim + bin;
      const auto [v, d] = bce_logit(logits(row, j), static_cast<Scalar>(labels[j]));
      r.value += v;
      r.grad(row, j) = d;
    }
  }
  return r;
}

}  // namespace hg::nn
