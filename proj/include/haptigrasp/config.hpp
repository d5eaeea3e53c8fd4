#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "haptigrasp/dataset.hpp"
#include "haptigrasp/evaluation.hpp"
#include "haptigrasp/features.hpp"
#include "haptigrasp/heads.hpp"
#include "haptigrasp/localize.hpp"
#include "haptigrasp/pipeline.hpp"

namespace hg {

/// Artifact locations, relative to the workspace root given on the
/// command line.
struct PathConfig {
  std::string catalog = "catalog.txt";
  std::string dataset = "dataset";
  std::string models = "models";
  std::string reports = "reports";
};

struct CatalogConfig {
  int n_train = 20;
  int n_test = 10;
};

struct EvaluationConfig {
  int orientations = 8;
  int repeats = 3;
  int max_objects = -1;
  double material_train_fraction = 0.8;
};

struct RunConfig {
  std::uint64_t seed = 7;
  PathConfig paths;
  CatalogConfig catalog;
  Workspace workspace;
  SimParams sim;
  HapticParams haptics;
  LocalizeParams localize;
  EncoderConfig encoder;
  ClassifierConfig stability;
  ClassifierConfig material;
  PolicyConfig policy;
  ActionBins bins;
  GwosConfig gwos;  // initializer and regrasp are chosen per evaluation arm
  CollectionCounts collection;
  EvaluationConfig evaluation;

  void validate() const;
  SimContext context() const { return {sim, haptics}; }
  CollectionParams collection_params() const;
  GraspingProtocol grasping_protocol() const;
  PerceptionProtocol perception_protocol() const;
};

/// Canonical JSON form; every field is present.
std::string config_to_json(const RunConfig& config);

/// Parses a config document. Missing keys keep their defaults; unknown
/// keys and mistyped values raise ValidationError naming the key path.
RunConfig config_from_json(const std::string& text);

RunConfig load_config(const std::string& path);

/// Applies "a.b.c=value" overrides in order. The value is parsed as JSON
/// when possible, else taken as a string.
RunConfig apply_overrides(const RunConfig& config, const std::vector<std::string>& overrides);

/// Digest of everything but the path block, so relocating a workspace
/// keeps provenance intact.
std::string config_digest(const RunConfig& config);

}  // namespace hg
