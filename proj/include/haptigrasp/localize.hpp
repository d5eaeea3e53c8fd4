#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "haptigrasp/random.hpp"
#include "haptigrasp/world.hpp"

namespace hg {

/// Weighted hypotheses over the object's planar location. Column i of
/// `particles` is hypothesis i; weights sum to one.
struct ParticleSet {
  Eigen::Matrix2Xd particles;
  Eigen::VectorXd weights;

  int size() const { return static_cast<int>(particles.cols()); }
};

struct MotionModelParams {
  double sigma = 0.005;  // m
};

struct MeasurementModelParams {
  double vicinity_radius = 0.025;  // m
  double w_occupied = 3000.0;
  double w_free = 0.2;
  // The occupied vicinity is centred this far beyond the contact point along
  // the scan direction; particles stand for centroids, contacts for surfaces.
  double contact_offset = 0.025;  // m

  void validate() const;
};

struct LineScanCommand {
  Vec2 start = Vec2::Zero();
  Vec2 direction = Vec2::UnitX();
  double max_len = 0.0;
};

struct ScanPlan {
  std::vector<LineScanCommand> scans;

  /// Parallel scans along x at fixed spacing, centred on the workspace,
  /// alternating direction from row to row.
  static ScanPlan raster(const Workspace& workspace, int n_scans = 10, double spacing = 0.05);
  void validate(const Workspace& workspace) const;
};

struct LocalizeParams {
  MotionModelParams motion;
  MeasurementModelParams measurement;
  int n_particles = 10000;
  int n_scans = 10;
  double scan_spacing = 0.05;
  double push_probability = 0.1;  // chance a contacting scan nudges the object
  double push_cap = 0.005;        // m
};

ParticleSet init_uniform(const Workspace& workspace, int n_particles, Rng& rng);

ParticleSet predict(const ParticleSet& set, const MotionModelParams& params, const Workspace& workspace, Rng& rng);

struct UpdateResult {
  ParticleSet set;
  bool recovered = false;  // weights collapsed and were reset to uniform
};

/// Occupied evidence takes precedence: a particle within the occupied
/// vicinity is only up-weighted, even though it may also lie near the swept
/// segment that ends at the contact.
UpdateResult update(const ParticleSet& set, const ContactResult& scan, const MeasurementModelParams& params);

/// Systematic (low-variance) resampling with a single uniform offset.
ParticleSet resample(const ParticleSet& set, Rng& rng);

/// Same as `resample` with an explicit offset in [0, 1).
ParticleSet resample_with_offset(const ParticleSet& set, double offset);

Vec2 estimate(const ParticleSet& set);

struct LocalizationStep {
  ContactResult scan;
  ParticleSet particles;  // after resampling
  bool recovered = false;
  bool object_pushed = false;
};

struct LocalizationResult {
  Vec2 estimate = Vec2::Zero();
  std::vector<LocalizationStep> trace;
  Scene final_scene;
};

/// Touch localization: uniform prior, then per scan predict, probe, update,
/// resample. A contacting scan may push the object; `scene` is not mutated,
/// the displaced scene is returned in `final_scene`. With
/// `object_present == false` every scan is free space.
LocalizationResult localize(const Scene& scene, const ScanPlan& plan, const LocalizeParams& params, Rng& rng,
                            bool object_present = true);

/// One JSON object per scan: the scan segment and contact, flags, the
/// running estimate, and up to `max_particles` particle positions (all when
/// negative). Lines are newline-terminated.
std::string trace_to_jsonl(const LocalizationResult& result, int max_particles = -1);

}  // namespace hg
