#pragma once

#include <Eigen/Core>
#include <optional>
#include <string>
#include <vector>

#include "haptigrasp/features.hpp"
#include "haptigrasp/haptics.hpp"
#include "haptigrasp/heads.hpp"
#include "haptigrasp/localize.hpp"
#include "haptigrasp/world.hpp"

namespace hg {

enum class InitializerKind {
  touch,         // localized (x, y), theta uniform
  oracle,        // true (x, y), theta uniform
  noisy_oracle,  // true (x, y) and graspable axis plus Gaussian noise
  perfect,       // true (x, y), exact axis, mid-height; for tests
};

std::string_view to_string(InitializerKind k);
InitializerKind initializer_from_string(std::string_view s);

struct InitializerParams {
  double sigma_loc = 0.01;   // m
  double sigma_theta = 0.25; // rad
  Interval z_band{0.015, 0.045};

  void validate() const;
};

/// Initial grasp for `scene`. `location` is the touch estimate and is only
/// read by the touch initializer. Draws: x, y noise, theta, z, mode.
GraspPose initial_grasp(InitializerKind kind, const Scene& scene, const Vec2& location, const InitializerParams& params,
                        Rng& rng);

/// g + delta with delta in the gripper frame: (dx, dy) rotated by theta,
/// then dz and dtheta added; the result is clamped into the workspace.
GraspPose apply_regrasp(const GraspPose& grasp, const RegraspDelta& delta, const Workspace& workspace);

enum class RegraspMode { learned, random, none };

std::string_view to_string(RegraspMode m);

struct GwosConfig {
  double p_threshold = 0.8;
  int t_max = 5;  // total grasps, initial included
  InitializerKind initializer = InitializerKind::touch;
  InitializerParams init;
  LocalizeParams localize;
  RegraspMode regrasp = RegraspMode::learned;

  void validate() const;
};

struct Models {
  Autoencoder autoencoder;
  Classifier stability;
  RegraspPolicy policy;
};

struct GwosStep {
  GraspPose pose;
  GraspOutcome outcome;
  HapticEpisode haptics;
  Pose2 object_pose;            // ground truth at execution, evaluation only
  Eigen::VectorXd latent;
  double p_stable = 0.0;
  bool stopped = false;         // p_stable exceeded p_threshold
  std::optional<RegraspDelta> delta;  // applied after this grasp
};

struct GwosResult {
  bool success = false;  // outcome of the final executed grasp
  Vec2 location_estimate = Vec2::Zero();
  std::vector<GwosStep> trace;
  Scene final_scene;
};

struct SimContext {
  SimParams sim;
  HapticParams haptics;
};

/// Closed loop: localize (touch initializer only), sample the initial
/// grasp, then execute, encode, score stability, stop above threshold,
/// else re-grasp, for at most t_max grasps. Independent rng streams are
/// derived from `seed` for localization, initialization, execution and
/// random re-grasps, so arms that share a seed share a scene and an
/// initial grasp. `object_present == false` removes the object.
GwosResult run_gwos(const Scene& scene, const Models& models, const GwosConfig& config, const SimContext& ctx,
                    std::uint64_t seed, bool object_present = true);

/// Recomputes latent, p and the learned delta for every recorded step
/// from the stored haptics; true when every decision matches bit-exactly.
bool replay_matches(const GwosResult& result, const Models& models, const GwosConfig& config, const SimContext& ctx);

/// Haptic episode for one executed grasp; handles the empty workspace.
HapticEpisode sense_grasp(const Scene& scene, const GraspPose& grasp, const GraspOutcome& outcome,
                          const SimContext& ctx, Rng& rng, bool object_present = true);

}  // namespace hg
