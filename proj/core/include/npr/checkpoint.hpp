#pragma once

#include <cstdint>
#include <string>

#include "npr/training.hpp"

namespace npr {

/// Trained-model container: a one-line JSON manifest (format version, model
/// kind, specs, seed, step count, parameter count, checksum), a newline, then
/// the parameters as raw little-endian IEEE-754 doubles.  Writes go through a
/// temp file + rename; identical contents produce identical bytes.
struct Checkpoint {
  int format_version = 1;
  ModelSpec model;
  std::uint64_t seed = 0;
  long long steps = 0;
  ParamVector params;
};

void validate(const Checkpoint& cp);  // throws ConfigError

void save_checkpoint(const std::string& path, const Checkpoint& cp);  // throws IoError
Checkpoint load_checkpoint(const std::string& path);  // throws IoError on damage

}  // namespace npr
