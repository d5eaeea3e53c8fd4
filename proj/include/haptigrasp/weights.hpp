#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "haptigrasp/nn/tensor.hpp"

namespace hg {

inline constexpr std::uint32_t kWeightFormatVersion = 1;

struct WeightBlock {
  std::string name;
  Eigen::MatrixXd value;
};

/// Binary container: magic "HGW1", format version, architecture
/// fingerprint, free-form metadata (JSON), named blocks stored row-major
/// as raw IEEE doubles, and a trailing FNV-1a checksum over everything
/// before it. Little-endian hosts only.
struct WeightFile {
  std::string fingerprint;
  std::string metadata;
  std::vector<WeightBlock> blocks;

  const Eigen::MatrixXd& block(const std::string& name) const;
};

std::string weights_to_bytes(const WeightFile& file);

/// Checks run in order magic, version, checksum, fingerprint; each failure
/// has its own error type. An empty `expected_fingerprint` skips the last.
WeightFile weights_from_bytes(const std::string& bytes, const std::string& expected_fingerprint = "");

void save_weights(const std::string& path, const WeightFile& file);
WeightFile load_weights(const std::string& path, const std::string& expected_fingerprint = "");

WeightFile capture(const nn::ParamList<double>& params, std::string fingerprint, std::string metadata = "{}");

/// Copies blocks into `params` by name. Every name and shape is verified
/// before the first write, so a mismatch leaves `params` untouched.
void restore(nn::ParamList<double>& params, const WeightFile& file);

}  // namespace hg
