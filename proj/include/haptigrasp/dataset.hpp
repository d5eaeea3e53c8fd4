#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "haptigrasp/catalog.hpp"
#include "haptigrasp/haptics.hpp"
#include "haptigrasp/heads.hpp"
#include "haptigrasp/pipeline.hpp"
#include "haptigrasp/world.hpp"

namespace hg {

inline constexpr int kDatasetFormatVersion = 1;

/// Two-set protocol. Set 1 covers every train object with a uniform
/// number of initial grasps, each followed by a fixed number of random
/// re-grasps; set 2 covers one object per material with more initial
/// grasps and longer random re-grasp chains. Ranges are inclusive.
struct CollectionCounts {
  int set1_objects = -1;  // -1: every train object
  int set1_grasps_min = 50;
  int set1_grasps_max = 55;
  int set1_regrasps_min = 1;
  int set1_regrasps_max = 1;
  int set2_objects = 7;
  int set2_grasps_min = 80;
  int set2_grasps_max = 100;
  int set2_regrasps_min = 2;
  int set2_regrasps_max = 3;
  int test_grasps_per_object = 0;  // held-out records for evaluation only
  int test_regrasps = 0;

  void validate() const;
};

struct CollectionPlanEntry {
  int set = 1;
  std::string object_id;
  int initial_grasps = 0;
  std::vector<int> regrasps;  // one chain length per initial grasp
};

/// Interaction tallies. `regrasp_interactions` counts (grasp, re-grasp)
/// pairs, `executed_grasps` counts every grasp including initial ones.
struct CollectionTally {
  int objects = 0;
  long long records = 0;
  long long initial_grasps = 0;
  long long regrasp_interactions = 0;
  long long executed_grasps = 0;
};

struct CollectionPlan {
  std::vector<CollectionPlanEntry> entries;
  CollectionTally tally() const;
  CollectionTally tally(Split split, const Catalog& catalog) const;
};

/// Draws every per-object and per-chain count from the seed's count
/// stream. `collect_dataset` consumes the same plan, so a dry count with
/// the same inputs is exact.
CollectionPlan plan_collection(const Catalog& catalog, const CollectionCounts& counts, std::uint64_t seed);

/// Expected tally at the midpoint of every range, for protocol checks
/// that are never simulated.
double expected_executed_grasps(const CollectionCounts& counts, int train_objects);
double expected_regrasp_interactions(const CollectionCounts& counts, int train_objects);

struct GraspRecord {
  GraspPose pose;
  std::optional<RegraspDelta> delta_after;  // applied to reach the next grasp
  GraspOutcome outcome;
  Pose2 object_pose;  // ground truth before the grasp, evaluation only
  HapticEpisode haptics;
  double t_start_s = 0.0;  // simulated clock
};

struct EpisodeRecord {
  std::string episode_id;
  Split split = Split::train;
  int set = 1;
  std::string object_id;
  Material material = Material::metal;
  std::vector<GraspRecord> grasps;

  std::vector<int> labels() const;
};

struct CollectionParams {
  CollectionCounts counts;
  InitializerParams init;  // noisy oracle for initial grasps
  ActionBins bins;         // continuous re-grasp ranges
  SimContext ctx;
  Workspace workspace;
};

struct Dataset {
  std::vector<EpisodeRecord> records;

  CollectionTally tally() const;
};

Dataset collect_dataset(const Catalog& catalog, const CollectionParams& params, std::uint64_t seed);

/// Every record's split equals its object's catalog split, and no object
/// id appears under both splits. Raises ValidationError otherwise.
void verify_disjoint(const Dataset& dataset, const Catalog& catalog);

struct DatasetFiles {
  std::string records_path;   // one JSON record per line
  std::string haptics_path;   // binary sidecar
};

/// Writes both files; `provenance` is stored in the sidecar header and
/// on the first line of the record log.
void write_dataset(const DatasetFiles& files, const Dataset& dataset, const std::string& provenance_json);

struct LoadedDataset {
  Dataset dataset;
  std::string provenance_json;
};

LoadedDataset read_dataset(const DatasetFiles& files);

/// Flattened views used by training and evaluation.
struct GraspRef {
  int record = 0;
  int grasp = 0;
};

std::vector<GraspRef> all_grasps(const Dataset& dataset, std::optional<Split> split = std::nullopt);

/// (H_t, delta_t, success_{t+1}) triples: every grasp followed by a re-grasp.
std::vector<GraspRef> regrasp_pairs(const Dataset& dataset, std::optional<Split> split = std::nullopt);

const GraspRecord& at(const Dataset& dataset, const GraspRef& ref);

}  // namespace hg
