#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <functional>

namespace hg::testing {

inline constexpr double kFdStep = 1e-5;

/// Central differences of a scalar function with respect to every entry of
/// `x`; `x` is restored before returning.
inline Eigen::MatrixXd numeric_gradient(const std::function<double()>& f, Eigen::MatrixXd& x, double h = kFdStep) {
  Eigen::MatrixXd g(x.rows(), x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j)
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const double saved = x(i, j);
      x(i, j) = saved + h;
      const double up = f();
      x(i, j) = saved - h;
      const double down = f();
      x(i, j) = saved;
      g(i, j) = (up - down) / (2.0 * h);
    }
  return g;
}

/// ||a - b|| / max(||a||, ||b||); zero when both vanish.
inline double relative_error(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const double scale = std::max(a.norm(), b.norm());
  return scale == 0.0 ? 0.0 : (a - b).norm() / scale;
}

}  // namespace hg::testing
