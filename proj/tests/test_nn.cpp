#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <cstring>
#include <fstream>
#include <unistd.h>

#include "haptigrasp/error.hpp"
#include "haptigrasp/nn/adam.hpp"
#include "haptigrasp/nn/loss.hpp"
#include "haptigrasp/nn/lstm.hpp"
#include "haptigrasp/nn/mlp.hpp"
#include "haptigrasp/weights.hpp"
#include "support/gradcheck.hpp"

using namespace hg;
using namespace hg::nn;
using hg::testing::numeric_gradient;
using hg::testing::relative_error;

namespace {

Eigen::MatrixXd random_matrix(int r, int c, Rng& rng, double scale = 1.0) {
  Eigen::MatrixXd m(r, c);
  for (int j = 0; j < c; ++j)
    for (int i = 0; i < r; ++i) m(i, j) = uniform(rng, -scale, scale);
  return m;
}

}  // namespace

TEST(Dense, IdentityLayerIsIdentityMap) {
  Dense<double> d(4, 4, Activation::identity);
  d.W.setIdentity();
  Rng rng(1);
  const Eigen::MatrixXd x = random_matrix(4, 3, rng);
  EXPECT_EQ(dense_forward(d, x), x);
}

TEST(Dense, GradientsMatchFiniteDifferences) {
  Rng rng(2);
  const std::vector<std::tuple<int, int, int, Activation>> shapes{
      {5, 8, 3, Activation::tanh},     {3, 2, 1, Activation::sigmoid}, {7, 4, 5, Activation::identity},
      {6, 6, 2, Activation::relu},     {1, 9, 4, Activation::tanh},    {10, 3, 2, Activation::sigmoid}};
  for (const auto& [in, out, batch, act] : shapes) {
    Dense<double> d(in, out, act);
    d.init(rng);
    d.b = random_matrix(out, 1, rng, 0.5);
    Eigen::MatrixXd x = random_matrix(in, batch, rng);
    const Eigen::MatrixXd r = random_matrix(out, batch, rng);
    const auto loss = [&] { return dense_forward(d, x).cwiseProduct(r).sum(); };
    const auto g = dense_backward(d, x, r);
    EXPECT_LT(relative_error(g.dx, numeric_gradient(loss, x)), 1e-4);
    EXPECT_LT(relative_error(g.dW, numeric_gradient(loss, d.W)), 1e-4);
    EXPECT_LT(relative_error(g.db, numeric_gradient(loss, d.b)), 1e-4);
  }
}

TEST(Dense, ReluSubgradientAtZeroIsZero) {
  Dense<double> d(1, 1, Activation::relu);
  d.W(0, 0) = 1.0;
  const Eigen::MatrixXd x = Eigen::MatrixXd::Zero(1, 1);
  const auto g = dense_backward(d, x, Eigen::MatrixXd(Eigen::MatrixXd::Ones(1, 1)));
  EXPECT_EQ(g.dx(0, 0), 0.0);
  EXPECT_EQ(g.dW(0, 0), 0.0);
}

TEST(Dense, ShapeMismatchNamesBothShapes) {
  Dense<double> d(3, 2, Activation::identity);
  try {
    (void)dense_forward(d, Eigen::MatrixXd(Eigen::MatrixXd::Zero(4, 1)));
    FAIL();
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("4x1"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("2x3"), std::string::npos);
  }
}

TEST(Lstm, ZeroWeightsAndInputsStayAtZero) {
  Lstm<double> cell(3, 4);
  const Eigen::MatrixXd x = Eigen::MatrixXd::Zero(3, 2), h = Eigen::MatrixXd::Zero(4, 2);
  const auto s = lstm_step(cell, x, h, h);
  EXPECT_EQ(s.h.norm(), 0.0);
  EXPECT_EQ(s.c.norm(), 0.0);
}

TEST(Lstm, SequenceOfOneEqualsSingleStep) {
  Rng rng(3);
  Lstm<double> cell(5, 6);
  cell.init(rng);
  const Eigen::MatrixXd x = random_matrix(5, 2, rng);
  const auto seq = lstm_forward(cell, {x});
  const Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(6, 2);
  const auto s = lstm_step(cell, x, zero, zero);
  EXPECT_EQ(seq.back().h, s.h);
  EXPECT_EQ(seq.back().c, s.c);
}

TEST(Lstm, BackpropThroughTimeMatchesFiniteDifferences) {
  Rng rng(4);
  const std::vector<std::tuple<int, int, int, int>> shapes{{4, 6, 7, 1}, {3, 2, 5, 2}, {1, 3, 9, 1},
                                                           {5, 4, 3, 3}, {2, 5, 6, 2}};
  for (const auto& [in, hidden, steps, batch] : shapes) {
    Lstm<double> cell(in, hidden);
    cell.init(rng);
    cell.b = random_matrix(4 * hidden, 1, rng, 0.5);
    std::vector<Eigen::MatrixXd> xs, rs;
    for (int t = 0; t < steps; ++t) {
      xs.push_back(random_matrix(in, batch, rng));
      rs.push_back(random_matrix(hidden, batch, rng));
    }
    const auto loss = [&] {
      const auto c = lstm_forward(cell, xs);
      double v = 0.0;
      for (int t = 0; t < steps; ++t) v += c[t].h.cwiseProduct(rs[t]).sum();
      return v;
    };
    const auto cache = lstm_forward(cell, xs);
    const auto g = lstm_backward(cell, cache, rs, Eigen::MatrixXd());
    EXPECT_LT(relative_error(g.dW, numeric_gradient(loss, cell.W)), 1e-4);
    EXPECT_LT(relative_error(g.db, numeric_gradient(loss, cell.b)), 1e-4);
    for (int t = 0; t < steps; ++t) EXPECT_LT(relative_error(g.dxs[t], numeric_gradient(loss, xs[t])), 1e-4);
  }
}

TEST(Lstm, LastStepGradientOnlyPath) {
  Rng rng(5);
  Lstm<double> cell(3, 4);
  cell.init(rng);
  std::vector<Eigen::MatrixXd> xs;
  for (int t = 0; t < 6; ++t) xs.push_back(random_matrix(3, 2, rng));
  const Eigen::MatrixXd r = random_matrix(4, 2, rng);
  const auto loss = [&] { return lstm_forward(cell, xs).back().h.cwiseProduct(r).sum(); };
  const auto g = lstm_backward(cell, lstm_forward(cell, xs), std::vector<Eigen::MatrixXd>{}, r);
  EXPECT_LT(relative_error(g.dW, numeric_gradient(loss, cell.W)), 1e-4);
}

TEST(Loss, L2ClosedForms) {
  const Eigen::MatrixXd a = Eigen::MatrixXd::Constant(3, 4, 0.7);
  EXPECT_EQ(loss_l2<double>(a, a).value, 0.0);
  const auto r = loss_l2<double>(a, a - Eigen::MatrixXd::Ones(3, 4));
  EXPECT_DOUBLE_EQ(r.value, 1.0);
  EXPECT_TRUE(r.grad.isApproxToConstant(2.0 / 12.0));
}

TEST(Loss, L2GradientMatchesFiniteDifferences) {
  Rng rng(6);
  Eigen::MatrixXd p = random_matrix(5, 3, rng);
  const Eigen::MatrixXd t = random_matrix(5, 3, rng);
  const auto f = [&] { return loss_l2<double>(p, t).value; };
  EXPECT_LT(relative_error(loss_l2<double>(p, t).grad, numeric_gradient(f, p)), 1e-6);
}

TEST(Loss, BceAtHalfIsLn2AndDecreasesTowardLabel) {
  EXPECT_DOUBLE_EQ(bce_prob(0.5, 1.0).first, std::log(2.0));
  EXPECT_DOUBLE_EQ(bce_prob(0.5, 0.0).first, std::log(2.0));
  double prev = bce_prob(0.5, 1.0).first;
  for (double p = 0.6; p < 1.0; p += 0.05) {
    const double v = bce_prob(p, 1.0).first;
    EXPECT_LT(v, prev);
    prev = v;
  }
  EXPECT_THROW(bce_prob(0.5, 0.5), ArgumentError);
}

TEST(Loss, BceGradientMatchesFiniteDifferences) {
  Rng rng(7);
  Eigen::MatrixXd z = random_matrix(1, 6, rng, 3.0);
  const std::vector<int> y{1, 0, 0, 1, 1, 0};
  const auto f = [&] { return loss_bce<double>(z, y).value; };
  EXPECT_LT(relative_error(loss_bce<double>(z, y).grad, numeric_gradient(f, z)), 1e-6);
  Eigen::MatrixXd p(1, 1);
  p(0, 0) = 0.3;
  const auto fp = [&] { return bce_prob(p(0, 0), 1.0).first; };
  Eigen::MatrixXd analytic(1, 1);
  analytic(0, 0) = bce_prob(0.3, 1.0).second;
  EXPECT_LT(relative_error(analytic, numeric_gradient(fp, p)), 1e-6);
}

TEST(Loss, SoftmaxAndHingeGradientsMatchFiniteDifferences) {
  Rng rng(8);
  Eigen::MatrixXd z = random_matrix(7, 5, rng, 2.0);
  const std::vector<int> y{0, 3, 6, 2, 3};
  const auto f = [&] { return loss_softmax_ce<double>(z, y).value; };
  EXPECT_LT(relative_error(loss_softmax_ce<double>(z, y).grad, numeric_gradient(f, z)), 1e-6);
  // Hinge is piecewise linear; keep scores away from the kinks at +-1.
  Eigen::MatrixXd s = random_matrix(4, 6, rng, 3.0);
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (std::abs(std::abs(s(i)) - 1.0) < 0.05) s(i) += 0.1;
  const std::vector<int> ys{0, 1, 2, 3, 1, 0};
  const auto fh = [&] { return loss_hinge_ovr<double>(s, ys).value; };
  EXPECT_LT(relative_error(loss_hinge_ovr<double>(s, ys).grad, numeric_gradient(fh, s)), 1e-6);
}

TEST(RegraspLoss, ZeroLogitsGiveFourLn2PerSample) {
  const std::vector<ExecutedBins> bins{{0, 1, 2, 3}, {4, 4, 0, 2}};
  const auto r = loss_regrasp<double>(Eigen::MatrixXd::Zero(kRegraspLogits, 2), bins, std::vector<int>{1, 0});
  EXPECT_DOUBLE_EQ(r.value, 2 * 4 * std::log(2.0));
  const auto one = loss_regrasp<double>(Eigen::MatrixXd::Zero(kRegraspLogits, 1), {bins[0]}, std::vector<int>{1});
  EXPECT_DOUBLE_EQ(one.value, 4 * std::log(2.0));
}

TEST(RegraspLoss, NonExecutedBinsHaveExactlyZeroGradient) {
  Rng rng(9);
  Eigen::MatrixXd z = random_matrix(kRegraspLogits, 3, rng);
  const std::vector<ExecutedBins> bins{{0, 1, 2, 3}, {4, 4, 0, 2}, {2, 2, 2, 2}};
  const std::vector<int> y{1, 0, 1};
  const auto r = loss_regrasp<double>(z, bins, y);
  for (int j = 0; j < 3; ++j)
    for (int row = 0; row < kRegraspLogits; ++row) {
      const bool executed = bins[j][row / kBinsPerDim] == row % kBinsPerDim;
      if (!executed) {
        EXPECT_EQ(r.grad(row, j), 0.0);
        Eigen::MatrixXd z2 = z;
        z2(row, j) += 3.0;
        EXPECT_EQ(loss_regrasp<double>(z2, bins, y).value, r.value);
      } else {
        EXPECT_NE(r.grad(row, j), 0.0);
      }
    }
}

TEST(RegraspLoss, FullBatchGradientMatchesFiniteDifferences) {
  Rng rng(10);
  Eigen::MatrixXd z = random_matrix(kRegraspLogits, 10, rng, 2.0);
  std::vector<ExecutedBins> bins;
  std::vector<int> y;
  for (int j = 0; j < 10; ++j) {
    bins.push_back({uniform_int(rng, 0, 4), uniform_int(rng, 0, 4), uniform_int(rng, 0, 4), uniform_int(rng, 0, 4)});
    y.push_back(j % 3 == 0);
  }
  const auto f = [&] { return loss_regrasp<double>(z, bins, y).value; };
  EXPECT_LT(relative_error(loss_regrasp<double>(z, bins, y).grad, numeric_gradient(f, z)), 1e-4);
}

TEST(Mlp, GradientsMatchFiniteDifferences) {
  Rng rng(11);
  Mlp<double> net(6, {5, 4}, 3, Activation::tanh, Activation::identity);
  net.init(rng);
  Eigen::MatrixXd x = random_matrix(6, 4, rng);
  const Eigen::MatrixXd r = random_matrix(3, 4, rng);
  const auto f = [&] { return mlp_forward(net, x).cwiseProduct(r).sum(); };
  const auto g = mlp_backward(net, mlp_forward_cached(net, x), r);
  EXPECT_LT(relative_error(g.dx, numeric_gradient(f, x)), 1e-4);
  auto params = net.params("net");
  for (std::size_t k = 0; k < params.size(); ++k)
    EXPECT_LT(relative_error(g.params[k], numeric_gradient(f, params[k].value.get())), 1e-4) << params[k].name;
}

TEST(Adam, ZeroGradientLeavesParamsAndCountsStep) {
  Eigen::MatrixXd w = Eigen::MatrixXd::Constant(2, 2, 0.5);
  ParamList<double> p{{"w", std::ref(w)}};
  AdamState<double> adam(p, 1e-2);
  adam.step(p, {Eigen::MatrixXd::Zero(2, 2)});
  EXPECT_EQ(w, Eigen::MatrixXd::Constant(2, 2, 0.5));
  EXPECT_EQ(adam.step_count(), 1);
}

TEST(Adam, ConstantGradientStepApproachesLearningRate) {
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(1, 3);
  ParamList<double> p{{"w", std::ref(w)}};
  const double lr = 1e-3;
  AdamState<double> adam(p, lr);
  Eigen::MatrixXd g(1, 3);
  g << 0.3, -2.0, 50.0;
  Eigen::MatrixXd prev = w;
  for (int s = 0; s < 2000; ++s) {
    prev = w;
    adam.step(p, {g});
  }
  const Eigen::MatrixXd step = (w - prev).cwiseAbs();
  for (int k = 0; k < 3; ++k) EXPECT_NEAR(step(0, k), lr, 1e-7);
}

TEST(Adam, DeterministicAndZeroRateIsNoOp) {
  Rng rng(12);
  const Eigen::MatrixXd init = random_matrix(3, 3, rng);
  const Eigen::MatrixXd g = random_matrix(3, 3, rng);
  Eigen::MatrixXd a = init, b = init, c = init;
  ParamList<double> pa{{"a", std::ref(a)}}, pb{{"b", std::ref(b)}}, pc{{"c", std::ref(c)}};
  AdamState<double> sa(pa, 0.01), sb(pb, 0.01), sc(pc, 0.0);
  for (int s = 0; s < 10; ++s) {
    sa.step(pa, {g});
    sb.step(pb, {g});
    sc.step(pc, {g});
  }
  EXPECT_EQ(a, b);
  EXPECT_EQ(c, init);
}

TEST(Adam, NonFiniteGradientNamesTheBlock) {
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(1, 1);
  ParamList<double> p{{"encoder.W", std::ref(w)}};
  AdamState<double> adam(p, 0.1);
  try {
    adam.step(p, {Eigen::MatrixXd::Constant(1, 1, std::nan(""))});
    FAIL();
  } catch (const TrainingError& e) {
    EXPECT_NE(std::string(e.what()).find("encoder.W"), std::string::npos);
  }
}

TEST(Clip, GlobalNormIsCapped) {
  GradList<double> g{Eigen::MatrixXd::Constant(2, 2, 3.0), Eigen::MatrixXd::Constant(1, 1, 4.0)};
  const double before = clip_global_norm(g, 5.0);
  EXPECT_DOUBLE_EQ(before, std::sqrt(36.0 + 16.0));
  EXPECT_NEAR(std::sqrt(g[0].squaredNorm() + g[1].squaredNorm()), 5.0, 1e-12);
}

class WeightFiles : public ::testing::Test {
 protected:
  void SetUp() override {
    Rng rng(13);
    net = Mlp<double>(4, {3}, 2, Activation::relu, Activation::identity);
    net.init(rng);
    path = (std::filesystem::temp_directory_path() / ("hg_weights_" + std::to_string(::getpid()) + ".hgw")).string();
  }
  void TearDown() override { std::filesystem::remove(path); }
  Mlp<double> net;
  std::string path;
};

TEST_F(WeightFiles, RoundTripIsBitExact) {
  save_weights(path, capture(net.params("net"), net.fingerprint()));
  Mlp<double> other(4, {3}, 2, Activation::relu, Activation::identity);
  auto params = other.params("net");
  restore(params, load_weights(path, net.fingerprint()));
  for (std::size_t k = 0; k < net.layers.size(); ++k) {
    EXPECT_EQ(0, std::memcmp(net.layers[k].W.data(), other.layers[k].W.data(), sizeof(double) * net.layers[k].W.size()));
    EXPECT_EQ(net.layers[k].b, other.layers[k].b);
  }
}

TEST_F(WeightFiles, WrongFingerprintLeavesModelUntouched) {
  save_weights(path, capture(net.params("net"), net.fingerprint()));
  EXPECT_THROW(load_weights(path, "something-else"), FingerprintError);
  Mlp<double> wrong(4, {5}, 2, Activation::relu, Activation::identity);
  const Eigen::MatrixXd before = wrong.layers[0].W;
  auto params = wrong.params("net");
  EXPECT_THROW(restore(params, load_weights(path)), FingerprintError);
  EXPECT_EQ(wrong.layers[0].W, before);
}

TEST_F(WeightFiles, TruncationVersionAndAbsenceAreDistinct) {
  const std::string bytes = weights_to_bytes(capture(net.params("net"), net.fingerprint()));
  EXPECT_THROW(weights_from_bytes(bytes.substr(0, bytes.size() - 9)), CorruptionError);
  std::string bumped = bytes;
  bumped[4] = 9;
  EXPECT_THROW(weights_from_bytes(bumped), VersionError);
  std::string flipped = bytes;
  flipped[bytes.size() / 2] ^= 1;
  EXPECT_THROW(weights_from_bytes(flipped), CorruptionError);
  EXPECT_THROW(load_weights(path + ".absent"), MissingArtifactError);
}
