#pragma once

#include <Eigen/Core>
#include <optional>
#include <string>

#include "haptigrasp/random.hpp"
#include "haptigrasp/world.hpp"

namespace hg {

inline constexpr int kFingers = 3;
inline constexpr int kChannelsPerFinger = 4;
inline constexpr int kForceChannels = kFingers * kChannelsPerFinger;

enum class Finger { left = 0, middle = 1, right = 2 };
enum class ForceChannel { magnitude = 0, fx = 1, fy = 2, fz = 3 };

constexpr int channel_index(Finger f, ForceChannel c) {
  return static_cast<int>(f) * kChannelsPerFinger + static_cast<int>(c);
}

/// One row per time step, 12 columns: (F, Fx, Fy, Fz) for left, middle, right.
using FrameMatrix = Eigen::Matrix<double, Eigen::Dynamic, kForceChannels, Eigen::RowMajor>;
using HapticFrame = Eigen::Matrix<double, 1, kForceChannels>;

struct HapticEpisode {
  double rate_hz = 100.0;
  FrameMatrix frames;
  Eigen::VectorXd f_trace;
  GripperMode mode = GripperMode::normal;
  double duration_s = 0.0;
  int close_event_index = 0;

  int length() const { return static_cast<int>(frames.rows()); }
};

struct HapticParams {
  double rate_hz = 100.0;
  double duration_min_s = 3.5;
  double duration_max_s = 4.0;
  double noise_sigma = 0.2;      // N, every signed channel
  double stall_min_s = 2.6;      // time fingers stall on the object
  double stall_max_s = 2.95;
  double finger_speed = 0.1;     // m/s
  double peak_force = 12.0;      // N, plateau limit for a rigid object
  double stiffness_ref = 1000.0; // N/m
  double ramp_tau_s = 0.06;      // ramp time constant at stiffness_ref
  double level_jitter = 0.05;    // relative grasp-to-grasp plateau variation
  double push_force = 0.8;       // N, first-finger push before enclosure
  double axial_gain = 0.3;
  double lateral_gain = 0.4;
  double offset_ref = 0.02;      // m
  double vertical_gain = 0.5;
  double shear_gain = 0.15;
  double slip_floor = 0.3;       // force drops to this fraction of plateau
  double slip_recovery = 0.6;    // then recovers to this fraction
  double slip_drop_s = 0.1;
  double slip_recover_s = 0.1;
  double failure_sag = 0.5;      // plateau fraction after a geometric failure
  double transient_min_s = 0.05; // transient onset after the stall
  double transient_max_s = 0.2;
};

/// Synthesizes the force time series of one grasp. The outcome must be the
/// one `execute_grasp` produced for (object, grasp); a mismatch between the
/// contact geometry and the outcome raises ConsistencyError.
HapticEpisode generate_episode(const ObjectInstance& object, const GraspPose& grasp, const GraspOutcome& outcome,
                               const Workspace& workspace, const SimParams& sim, const HapticParams& params,
                               Rng& rng);

/// Pure sensor noise with the gripper fully closed on nothing.
HapticEpisode noise_floor(double rate_hz, double duration_s, const HapticParams& params, const SimParams& sim,
                          Rng& rng);

/// First violated episode invariant, if any.
std::optional<std::string> check_invariants(const HapticEpisode& episode, double noise_sigma);

/// Mean per-finger force magnitude over [close_event_index, end).
Eigen::Vector3d mean_plateau_force(const HapticEpisode& episode);

}  // namespace hg
