#pragma once

#include <string>

#include <json.hpp>

#include "haptigrasp/config.hpp"

namespace hg {

/// One CLI invocation: a resolved config plus the workspace root that every
/// configured path is relative to.
struct CommandContext {
  std::string root = ".";
  RunConfig config;

  std::string path(const std::string& relative) const;
  std::string catalog_path() const { return path(config.paths.catalog); }
  std::string dataset_dir() const { return path(config.paths.dataset); }
  std::string models_dir() const { return path(config.paths.models); }
  std::string reports_dir() const { return path(config.paths.reports); }
  DatasetFiles dataset_files() const;
};

/// Each command returns a one-line summary for stdout. Artifacts embed
/// the config digest and seed; consumers verify the digests of their
/// inputs and raise ProvenanceError on a broken chain.
std::string cmd_gen_catalog(const CommandContext& ctx);
std::string cmd_collect(const CommandContext& ctx);
std::string cmd_train_ae(const CommandContext& ctx);
std::string cmd_train_heads(const CommandContext& ctx);
std::string cmd_eval_perception(const CommandContext& ctx);
std::string cmd_eval_grasping(const CommandContext& ctx);
/// Renders the tables from stored metrics only; nothing is recomputed.
std::string cmd_report(const CommandContext& ctx);

/// Metrics documents carry a digest over their provenance and payload.
nlohmann::json sealed_document(const std::string& kind, const nlohmann::json& provenance, const nlohmann::json& payload);
/// Loads a sealed document, raising ProvenanceError when the digest does
/// not match its content.
nlohmann::json open_sealed(const std::string& path, const std::string& kind);

/// Loads the three trained models, verifying that they descend from the
/// dataset currently on disk.
Models load_models(const CommandContext& ctx);

}  // namespace hg
