#pragma once

#include <Eigen/Core>
#include <array>
#include <string>
#include <vector>

#include "haptigrasp/features.hpp"
#include "haptigrasp/nn/loss.hpp"
#include "haptigrasp/nn/mlp.hpp"
#include "haptigrasp/random.hpp"
#include "haptigrasp/weights.hpp"

namespace hg {

/// Re-grasp offset in the gripper frame: dx along the closing axis, dy
/// across it, dz vertical, dtheta about the vertical axis. Applied as a
/// translation in the current gripper frame followed by the rotation.
struct RegraspDelta {
  double dx = 0.0;
  double dy = 0.0;
  double dz = 0.0;
  double dtheta = 0.0;

  double operator[](int k) const { return k == 0 ? dx : k == 1 ? dy : k == 2 ? dz : dtheta; }
  double& operator[](int k) { return k == 0 ? dx : k == 1 ? dy : k == 2 ? dz : dtheta; }
  bool operator==(const RegraspDelta&) const = default;
};

using nn::ExecutedBins;
using nn::kBinsPerDim;
using nn::kRegraspDims;

/// Equal-width bins over each delta range. Bin j of dimension k covers
/// [lo + j w, lo + (j+1) w); the upper edge belongs to the last bin.
struct ActionBins {
  std::array<double, kRegraspDims> lo{-0.025, -0.025, -0.025, -0.7853981633974483};
  std::array<double, kRegraspDims> hi{0.025, 0.025, 0.025, 0.7853981633974483};

  void validate() const;
  double width(int dim) const { return (hi[dim] - lo[dim]) / kBinsPerDim; }
  // Offsets from the range midpoint, so the middle bin of a symmetric range
  // is exactly zero.
  double center(int dim, int bin) const {
    return 0.5 * (lo[dim] + hi[dim]) + (bin - 0.5 * (kBinsPerDim - 1)) * width(dim);
  }

  /// Out-of-range components are clamped first; `clamped` reports it.
  ExecutedBins encode(const RegraspDelta& delta, bool* clamped = nullptr) const;
  RegraspDelta decode(const ExecutedBins& bins) const;
  RegraspDelta sample_uniform(Rng& rng) const;
  bool contains(const RegraspDelta& delta) const;
};

enum class ClassifierKind { deep, linear_hinge };

std::string_view to_string(ClassifierKind k);
ClassifierKind classifier_kind_from_string(std::string_view s);

struct ClassifierConfig {
  std::vector<int> hidden{512, 512, 256, 128, 64};
  double learning_rate = 5e-5;
  int epochs = 20;
  int batch_size = 32;
  double l2 = 1e-4;  // weight penalty of the linear hinge classifier

  void validate() const;
};

/// Feature classifier over a frozen representation. Inputs are columns;
/// a scaler fitted on the training columns standardizes them first.
/// The deep binary variant has a single sigmoid logit (trained with BCE),
/// the deep multi-class variant softmax logits, the linear variant one
/// score per class trained with one-vs-rest hinge loss.
struct Classifier {
  ClassifierKind kind = ClassifierKind::deep;
  int num_classes = 2;
  FeatureScaler scaler;
  nn::Mlp<double> net;

  Eigen::MatrixXd scores(const Eigen::MatrixXd& features) const;
  std::vector<int> predict(const Eigen::MatrixXd& features) const;
  /// P(class 1), clamped into (0, 1); deep binary classifiers only.
  Eigen::RowVectorXd probability(const Eigen::MatrixXd& features) const;
  std::string fingerprint() const;
};

struct ClassificationMetrics {
  int num_classes = 0;
  int n = 0;
  double accuracy = 0.0;
  double average_class_accuracy = 0.0;
  double majority_rate = 0.0;             // best constant prediction on this set
  Eigen::MatrixXd confusion;              // rows true, cols predicted, row-normalized
  Eigen::MatrixXi counts;
};

ClassificationMetrics classification_metrics(const std::vector<int>& truth, const std::vector<int>& predicted,
                                             int num_classes);

/// Trains on columns of `features`. Every class must be present.
Classifier train_classifier(const Eigen::MatrixXd& features, const std::vector<int>& labels, int num_classes,
                            ClassifierKind kind, const ClassifierConfig& config, Rng& rng,
                            std::vector<double>* loss_curve = nullptr);

/// Stability head: deep binary classifier on (H, grasp success).
Classifier train_stability(const Eigen::MatrixXd& features, const std::vector<int>& labels,
                           const ClassifierConfig& config, Rng& rng, std::vector<double>* loss_curve = nullptr);

struct SplitIndices {
  std::vector<int> train;
  std::vector<int> test;
};

/// Per-class shuffled split, floor(fraction * count) of each class to train.
/// Raises StratificationError when a class ends up absent from train.
SplitIndices stratified_split(const std::vector<int>& labels, int num_classes, double train_fraction, Rng& rng);

struct MaterialResult {
  Classifier classifier;
  ClassificationMetrics metrics;  // on the held-out part
};

/// 80/20 stratified split, train, evaluate on the 20%. Labels index
/// `num_classes` classes (seven materials when all are present).
MaterialResult train_material(const Eigen::MatrixXd& features, const std::vector<int>& labels, int num_classes,
                              ClassifierKind kind,
                              const ClassifierConfig& config, Rng& rng, double train_fraction = 0.8);

struct PolicyConfig {
  std::vector<int> hidden{256, 128};
  double learning_rate = 5e-7;
  int epochs = 20;
  int batch_size = 32;

  void validate() const;
};

/// Re-grasp policy: trunk on H emitting 20 logits, dimension k in rows
/// [5k, 5k+5).
struct RegraspPolicy {
  ActionBins bins;
  FeatureScaler scaler;
  nn::Mlp<double> net;

  Eigen::MatrixXd logits(const Eigen::MatrixXd& features) const;
  std::string fingerprint() const;
};

struct PolicyExample {
  ExecutedBins executed{};
  int label = 0;  // success of the grasp that followed the re-grasp
};

RegraspPolicy train_policy(const Eigen::MatrixXd& features, const std::vector<PolicyExample>& examples,
                           const PolicyConfig& config, const ActionBins& bins, Rng& rng,
                           std::vector<double>* loss_curve = nullptr);

/// Per-dimension argmax over bins; ties go to the lower bin index.
ExecutedBins select_bins(const Eigen::VectorXd& logits);
RegraspDelta select_regrasp(const RegraspPolicy& policy, const Eigen::VectorXd& features);

WeightFile to_weight_file(Classifier& c, const std::string& provenance_json);
Classifier classifier_from_weight_file(const WeightFile& file);
WeightFile to_weight_file(RegraspPolicy& p, const std::string& provenance_json);
RegraspPolicy policy_from_weight_file(const WeightFile& file);

}  // namespace hg
