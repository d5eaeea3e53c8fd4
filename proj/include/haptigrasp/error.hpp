#pragma once

#include <stdexcept>
#include <string>

namespace hg {

/// Root of every error raised by the library. `code()` is the process
/// exit status the CLI uses for this class of failure.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what, int code = 1) : std::runtime_error(what), code_(code) {}
  int code() const noexcept { return code_; }

 private:
  int code_;
};

// Exit codes: 2 config/validation, 3 missing artifact, 4 provenance or
// fingerprint, 5 training, 6 corrupt file, 1 everything else.

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what) : Error("validation: " + what, 2) {}
};

class ArgumentError : public Error {
 public:
  explicit ArgumentError(const std::string& what) : Error("argument: " + what, 1) {}
};

class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& what) : Error("shape: " + what, 1) {}
};

class StateError : public Error {
 public:
  explicit StateError(const std::string& what) : Error("state: " + what, 1) {}
};

class ConsistencyError : public Error {
 public:
  explicit ConsistencyError(const std::string& what) : Error("consistency: " + what, 1) {}
};

class TrainingError : public Error {
 public:
  explicit TrainingError(const std::string& what) : Error("training: " + what, 5) {}
};

class MissingArtifactError : public Error {
 public:
  explicit MissingArtifactError(const std::string& what) : Error("missing artifact: " + what, 3) {}
};

class ProvenanceError : public Error {
 public:
  explicit ProvenanceError(const std::string& what) : Error("provenance: " + what, 4) {}
};

class FingerprintError : public Error {
 public:
  explicit FingerprintError(const std::string& what) : Error("fingerprint: " + what, 4) {}
};

class VersionError : public Error {
 public:
  explicit VersionError(const std::string& what) : Error("format version: " + what, 6) {}
};

class CorruptionError : public Error {
 public:
  explicit CorruptionError(const std::string& what) : Error("corrupt file: " + what, 6) {}
};

class StratificationError : public Error {
 public:
  explicit StratificationError(const std::string& what) : Error("stratification: " + what, 5) {}
};

}  // namespace hg
