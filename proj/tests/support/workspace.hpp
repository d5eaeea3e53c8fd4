#pragma once

#include <filesystem>
#include <string>
#include <unistd.h>

#include "haptigrasp/commands.hpp"
#include "haptigrasp/config.hpp"

namespace hg::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag)
      : path_(std::filesystem::temp_directory_path() / ("hg_" + tag + "_" + std::to_string(::getpid()))) {
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string str() const { return path_.string(); }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

inline std::string source_path(const std::string& relative) { return std::string(HG_SOURCE_DIR) + "/" + relative; }

inline CommandContext profile_context(const std::string& profile, const std::string& root) {
  return {root, load_config(source_path("configs/" + profile + ".json"))};
}

}  // namespace hg::testing
