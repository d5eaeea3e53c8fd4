#pragma once

#include <cmath>
#include <cstdint>

#include "haptigrasp/nn/tensor.hpp"

namespace hg::nn {

template <typename Scalar>
class AdamState {
 public:
  Scalar learning_rate = Scalar(1e-3);
  Scalar beta1 = Scalar(0.9);
  Scalar beta2 = Scalar(0.999);
  Scalar epsilon = Scalar(1e-8);

  AdamState() = default;
  AdamState(const ParamList<Scalar>& params, Scalar lr) : learning_rate(lr), m_(zeros_like(params)), v_(zeros_like(params)) {}

  std::int64_t step_count() const { return step_; }
  const GradList<Scalar>& first_moments() const { return m_; }
  const GradList<Scalar>& second_moments() const { return v_; }

  /// Bias-corrected update. Every gradient is checked before any parameter
  /// moves, so a rejected step leaves the model untouched.
  void step(ParamList<Scalar>& params, const GradList<Scalar>& grads) {
    if (params.size() != m_.size() || grads.size() != m_.size())
      throw ShapeError("adam: " + std::to_string(params.size()) + " params, " + std::to_string(grads.size()) +
                       " grads, state for " + std::to_string(m_.size()));
    for (std::size_t k = 0; k < params.size(); ++k) {
      require_same_shape(grads[k], m_[k], "adam gradient '" + params[k].name + "'");
      require_same_shape(params[k].value.get(), m_[k], "adam parameter '" + params[k].name + "'");
      if (!grads[k].allFinite()) throw TrainingError("non-finite gradient in '" + params[k].name + "'");
    }
    ++step_;
    const Scalar c1 = Scalar(1) - std::pow(beta1, static_cast<Scalar>(step_));
    const Scalar c2 = Scalar(1) - std::pow(beta2, static_cast<Scalar>(step_));
    for (std::size_t k = 0; k < params.size(); ++k) {
      m_[k] = beta1 * m_[k] + (Scalar(1) - beta1) * grads[k];
      v_[k] = beta2 * v_[k] + (Scalar(1) - beta2) * grads[k].cwiseProduct(grads[k]);
      if (learning_rate == Scalar(0)) continue;
      params[k].value.get().array() -=
          learning_rate * (m_[k].array() / c1) / ((v_[k].array() / c2).sqrt() + epsilon);
    }
  }

 private:
  GradList<Scalar> m_;
  GradList<Scalar> v_;
  std::int64_t step_ = 0;
};

}  // namespace hg::nn
