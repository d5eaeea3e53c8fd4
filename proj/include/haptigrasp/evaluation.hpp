#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "haptigrasp/catalog.hpp"
#include "haptigrasp/dataset.hpp"
#include "haptigrasp/heads.hpp"
#include "haptigrasp/pipeline.hpp"

namespace hg {

/// One evaluated configuration of the closed loop.
struct Arm {
  std::string name;
  InitializerKind initializer = InitializerKind::oracle;
  RegraspMode regrasp = RegraspMode::learned;
  int t_max = 5;
  bool object_present = true;
};

struct GraspingProtocol {
  int orientations = 8;  // object yaw k * 2pi / orientations
  int repeats = 3;
  int max_objects = -1;  // -1: every held-out object
  std::uint64_t seed = 0;
  GwosConfig gwos;       // initializer, regrasp and t_max are set per arm

  void validate() const;
};

struct ArmResult {
  std::string name;
  int trials = 0;
  int successes = 0;
  long long grasps = 0;         // executed grasps over all trials
  std::vector<char> outcomes;   // per trial, in trial order

  double accuracy() const { return trials ? static_cast<double>(successes) / trials : 0.0; }
};

struct GraspingTable {
  std::vector<ArmResult> arms;
  const ArmResult& arm(const std::string& name) const;
};

/// Trial i of every arm shares its scene and its rng streams, so arms differ
/// only in the policy under test. Objects must all be held out; a train
/// object raises ValidationError.
GraspingTable evaluate_arms(const std::vector<CatalogEntry>& objects, const Models& models, const std::vector<Arm>& arms,
                            const GraspingProtocol& protocol, const SimContext& ctx, const Workspace& workspace = {});

/// Oracle location, random initial grasp: no re-grasp, a single random
/// re-grasp, random re-grasps and learned re-grasps (at most four each).
std::vector<Arm> regrasping_arms(int t_max = 5);

/// Touch and noisy-oracle initializers with and without learned
/// re-grasping, plus empty-workspace arms.
std::vector<Arm> gwos_arms(int t_max = 5);

/// Success probability of the initial grasp under the oracle initializer,
/// by quadrature over theta, z and mode, with the slip draw taken in
/// expectation.
double oracle_initializer_success(const CatalogEntry& object, const Workspace& workspace, const SimParams& sim,
                                  const InitializerParams& init, int theta_steps = 720);

enum class FeatureKind { autoencoder, handcrafted };
std::string_view to_string(FeatureKind k);

struct PerceptionCell {
  std::string task;  // "material" or "stability"
  FeatureKind features = FeatureKind::autoencoder;
  ClassifierKind classifier = ClassifierKind::deep;
  std::vector<std::string> classes;  // label names, in metric index order
  ClassificationMetrics metrics;
  double score = 0.0;  // average class accuracy (material) or accuracy (stability)
};

struct PerceptionProtocol {
  double material_train_fraction = 0.8;
  ClassifierConfig classifier;
  std::uint64_t seed = 0;
};

struct PerceptionTable {
  std::vector<PerceptionCell> cells;
  const PerceptionCell& cell(const std::string& task, FeatureKind f, ClassifierKind c) const;
};

/// Material: grasps that enclosed the object, train-split only, stratified
/// split by label over the materials present. Stability: train on train-split grasps, test on every
/// test-split grasp.
PerceptionTable evaluate_perception(const Dataset& dataset, const Autoencoder& autoencoder,
                                    const PerceptionProtocol& protocol, double f_max);

/// Feature columns for a list of grasps.
Eigen::MatrixXd grasp_features(const Dataset& dataset, const std::vector<GraspRef>& refs, FeatureKind kind,
                               const Autoencoder& autoencoder, double f_max);

}  // namespace hg
