#include <gtest/gtest.h>

#include <cmath>

#include "haptigrasp/error.hpp"
#include "haptigrasp/heads.hpp"
#include "support/gradcheck.hpp"

using namespace hg;

namespace {

// Two well separated Gaussian blobs per class in `dim` dimensions.
std::pair<Eigen::MatrixXd, std::vector<int>> blobs(int per_class, int classes, int dim, double sep, Rng& rng) {
  Eigen::MatrixXd centres(dim, classes);
  for (int c = 0; c < classes; ++c)
    for (int d = 0; d < dim; ++d) centres(d, c) = gaussian(rng, 0.0, sep);
  Eigen::MatrixXd x(dim, per_class * classes);
  std::vector<int> y;
  for (int c = 0; c < classes; ++c)
    for (int i = 0; i < per_class; ++i) {
      for (int d = 0; d < dim; ++d) x(d, static_cast<int>(y.size())) = centres(d, c) + gaussian(rng, 0.0, 1.0);
      y.push_back(c);
    }
  return {x, y};
}

}  // namespace

TEST(ActionBins, SpecifiedExamples) {
  const ActionBins bins;
  EXPECT_EQ(bins.encode({0, 0, 0, 0}), (ExecutedBins{2, 2, 2, 2}));
  EXPECT_EQ(bins.decode({2, 2, 2, 2}), (RegraspDelta{0, 0, 0, 0}));
  EXPECT_EQ(bins.encode({0.025, 0, 0, 0})[0], 4);
  EXPECT_EQ(bins.encode({-0.025, 0, 0, 0})[0], 0);
  EXPECT_EQ(bins.encode({-0.015, 0, 0, 0})[0], 1);
  // -0.015 is the lower edge of bin 1, [-0.015, -0.005), whose centre is -0.01.
  EXPECT_NEAR(bins.decode({1, 2, 2, 2}).dx, -0.01, 1e-15);
  EXPECT_NEAR(bins.decode({0, 2, 2, 2}).dx, -0.02, 1e-15);
  EXPECT_NEAR(bins.width(0), 0.01, 1e-15);
  EXPECT_NEAR(bins.width(3), kPi / 10, 1e-15);
  EXPECT_EQ(bins.encode({0, 0, 0, kPi / 4})[3], 4);
}

TEST(ActionBins, PartitionAndQuantization) {
  const ActionBins bins;
  for (int k = 0; k < kRegraspDims; ++k) {
    EXPECT_DOUBLE_EQ(bins.center(k, 2), 0.0);
    EXPECT_NEAR(bins.lo[k] + kBinsPerDim * bins.width(k), bins.hi[k], 1e-15);
  }
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    const RegraspDelta d = bins.sample_uniform(rng);
    ASSERT_TRUE(bins.contains(d));
    const ExecutedBins e = bins.encode(d);
    const RegraspDelta q = bins.decode(e);
    for (int k = 0; k < kRegraspDims; ++k) EXPECT_LE(std::abs(q[k] - d[k]), 0.5 * bins.width(k) + 1e-12);
    EXPECT_EQ(bins.encode(q), e);
  }
  bool clamped = false;
  EXPECT_EQ(bins.encode({0.2, -0.3, 0, 9.0}, &clamped), (ExecutedBins{4, 0, 2, 4}));
  EXPECT_TRUE(clamped);
  bins.encode({0.01, 0, 0, 0}, &clamped);
  EXPECT_FALSE(clamped);
}

TEST(SelectBins, PeakedTiesAndInvariance) {
  Eigen::VectorXd z = Eigen::VectorXd::Zero(nn::kRegraspLogits);
  EXPECT_EQ(select_bins(z), (ExecutedBins{0, 0, 0, 0}));
  for (int k = 0; k < kRegraspDims; ++k) z[k * kBinsPerDim + 2] = 3.0;
  EXPECT_EQ(ActionBins{}.decode(select_bins(z)), (RegraspDelta{0, 0, 0, 0}));
  z.setZero();
  z[1] = z[3] = 2.0;  // exact tie in dimension 0
  EXPECT_EQ(select_bins(z)[0], 1);
  Rng rng(2);
  for (int i = 0; i < 100; ++i) {
    Eigen::VectorXd r(nn::kRegraspLogits);
    for (int k = 0; k < r.size(); ++k) r[k] = uniform(rng, -4, 4);
    const ExecutedBins base = select_bins(r);
    EXPECT_EQ(select_bins((r.array() + 7.5).matrix()), base);
    EXPECT_EQ(select_bins(r * 3.25), base);
  }
  EXPECT_THROW(select_bins(Eigen::VectorXd::Zero(19)), ShapeError);
}

TEST(Policy, FullBatchGradientMatchesFiniteDifferences) {
  Rng rng(3);
  nn::Mlp<double> net(8, {6, 5}, nn::kRegraspLogits, nn::Activation::relu, nn::Activation::identity);
  net.init(rng);
  for (auto& l : net.layers) nn::fill_uniform(l.b, 0.3, rng);
  Eigen::MatrixXd h(8, 10);
  for (Eigen::Index i = 0; i < h.size(); ++i) h(i) = uniform(rng, -1, 1);
  std::vector<ExecutedBins> executed;
  std::vector<int> labels;
  for (int j = 0; j < 10; ++j) {
    executed.push_back({uniform_int(rng, 0, 4), uniform_int(rng, 0, 4), uniform_int(rng, 0, 4), uniform_int(rng, 0, 4)});
    labels.push_back(j % 2);
  }
  const auto f = [&] { return nn::loss_regrasp<double>(nn::mlp_forward(net, h), executed, labels).value; };
  const auto cache = nn::mlp_forward_cached(net, h);
  const auto loss = nn::loss_regrasp<double>(cache.output(), executed, labels);
  const auto g = nn::mlp_backward(net, cache, loss.grad);
  auto params = net.params("policy");
  for (std::size_t k = 0; k < params.size(); ++k)
    EXPECT_LT(hg::testing::relative_error(g.params[k], hg::testing::numeric_gradient(f, params[k].value.get())), 1e-4)
        << params[k].name;
}

TEST(Policy, TrainsSelectsWithinBoundsAndRoundTrips) {
  Rng rng(4);
  Eigen::MatrixXd h(8, 200);
  std::vector<PolicyExample> ex;
  const ActionBins bins;
  for (int j = 0; j < 200; ++j) {
    for (int d = 0; d < 8; ++d) h(d, j) = uniform(rng, -1, 1);
    PolicyExample e;
    for (int k = 0; k < kRegraspDims; ++k) e.executed[k] = uniform_int(rng, 0, 4);
    // Success whenever the x bin matches the sign of the first feature.
    e.label = (e.executed[0] >= 2) == (h(0, j) > 0);
    ex.push_back(e);
  }
  PolicyConfig cfg;
  cfg.hidden = {16};
  cfg.learning_rate = 1e-2;
  cfg.epochs = 40;
  std::vector<double> curve;
  RegraspPolicy p = train_policy(h, ex, cfg, bins, rng, &curve);
  EXPECT_LT(curve.back(), curve.front());
  for (int j = 0; j < 200; ++j) EXPECT_TRUE(bins.contains(select_regrasp(p, h.col(j))));
  const RegraspPolicy back = policy_from_weight_file(weights_from_bytes(weights_to_bytes(to_weight_file(p, "{}"))));
  EXPECT_EQ(back.logits(h), p.logits(h));
}

TEST(Stability, MemorizesTinySet) {
  Rng rng(5);
  Eigen::MatrixXd x(16, 20);
  std::vector<int> y;
  for (int j = 0; j < 20; ++j) {
    for (int d = 0; d < 16; ++d) x(d, j) = uniform(rng, -1, 1);
    y.push_back(j % 2);
  }
  ClassifierConfig cfg;
  cfg.learning_rate = 1e-3;
  cfg.epochs = 200;
  const Classifier c = train_stability(x, y, cfg, rng);
  EXPECT_EQ(c.predict(x), y);
}

TEST(Stability, ProbabilityStrictlyInsideUnitInterval) {
  Rng rng(6);
  auto [x, y] = blobs(30, 2, 4, 3.0, rng);
  ClassifierConfig cfg;
  cfg.hidden = {8};
  cfg.learning_rate = 1e-2;
  const Classifier c = train_stability(x, y, cfg, rng);
  const Eigen::RowVectorXd p = c.probability(x * 1e6);
  EXPECT_TRUE((p.array() > 0.0).all() && (p.array() < 1.0).all());
}

TEST(Stability, SingleClassIsTrainingError) {
  Rng rng(7);
  const Eigen::MatrixXd x = Eigen::MatrixXd::Random(3, 10);
  EXPECT_THROW(train_stability(x, std::vector<int>(10, 1), ClassifierConfig{}, rng), TrainingError);
}

TEST(Stability, HeldOutBeatsMajorityByTenPoints) {
  Rng rng(8);
  // Imbalanced two-class problem: 75% negatives.
  auto [x, y] = blobs(100, 2, 6, 1.5, rng);
  Eigen::MatrixXd xi(6, 400);
  std::vector<int> yi;
  for (int j = 0; j < 400; ++j) {
    const int src = j < 300 ? j % 100 : 100 + j % 100;
    xi.col(j) = x.col(src) + 0.3 * Eigen::VectorXd::Random(6);
    yi.push_back(y[src]);
  }
  const SplitIndices split = stratified_split(yi, 2, 0.7, rng);
  Eigen::MatrixXd xtr(6, split.train.size()), xte(6, split.test.size());
  std::vector<int> ytr, yte;
  for (std::size_t i = 0; i < split.train.size(); ++i) {
    xtr.col(i) = xi.col(split.train[i]);
    ytr.push_back(yi[split.train[i]]);
  }
  for (std::size_t i = 0; i < split.test.size(); ++i) {
    xte.col(i) = xi.col(split.test[i]);
    yte.push_back(yi[split.test[i]]);
  }
  ClassifierConfig cfg;
  cfg.learning_rate = 1e-3;
  const Classifier c = train_stability(xtr, ytr, cfg, rng);
  const auto m = classification_metrics(yte, c.predict(xte), 2);
  EXPECT_GE(m.accuracy, m.majority_rate + 0.10);
}

TEST(Material, BothKindsBeatChanceWithNormalizedConfusion) {
  Rng rng(9);
  auto [x, y] = blobs(40, 7, 10, 2.0, rng);
  for (const auto kind : {ClassifierKind::deep, ClassifierKind::linear_hinge}) {
    ClassifierConfig cfg;
    cfg.learning_rate = kind == ClassifierKind::deep ? 1e-3 : 1e-2;
    const MaterialResult r = train_material(x, y, 7, kind, cfg, rng);
    EXPECT_GE(r.metrics.average_class_accuracy, 2.0 / 7.0) << to_string(kind);
    ASSERT_EQ(r.metrics.confusion.rows(), 7);
    for (int i = 0; i < 7; ++i) EXPECT_NEAR(r.metrics.confusion.row(i).sum(), 1.0, 1e-9);
    EXPECT_EQ(r.metrics.n, 7 * 8);
    const Classifier back = classifier_from_weight_file(weights_from_bytes(weights_to_bytes(to_weight_file(
        const_cast<Classifier&>(r.classifier), "{}"))));
    EXPECT_EQ(back.scores(x), r.classifier.scores(x));
  }
}

TEST(Material, MissingClassIsStratificationError) {
  Rng rng(10);
  std::vector<int> labels{0, 0, 0, 1, 1, 1, 2};
  EXPECT_THROW(stratified_split(labels, 3, 0.8, rng), StratificationError);
  EXPECT_THROW(stratified_split({0, 0, 1, 1}, 3, 0.5, rng), StratificationError);
  const SplitIndices s = stratified_split({0, 0, 0, 0, 0, 1, 1, 1, 1, 1}, 2, 0.8, rng);
  EXPECT_EQ(s.train.size(), 8u);
  EXPECT_EQ(s.test.size(), 2u);
}

TEST(Metrics, HandWorkedExample) {
  const auto m = classification_metrics({0, 0, 1, 1, 1, 1}, {0, 1, 1, 1, 1, 0}, 2);
  EXPECT_DOUBLE_EQ(m.accuracy, 4.0 / 6.0);
  EXPECT_DOUBLE_EQ(m.average_class_accuracy, (0.5 + 0.75) / 2);
  EXPECT_DOUBLE_EQ(m.majority_rate, 4.0 / 6.0);
  EXPECT_EQ(m.counts(1, 0), 1);
  EXPECT_DOUBLE_EQ(m.confusion(1, 1), 0.75);
}
