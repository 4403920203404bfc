#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "colinf/mathcore/dense.hpp"

namespace colinf {

/// Versioned binary container for model parameters.
///
/// Layout (little endian): magic "COLINFCK", u32 version, string kind, u64 seed,
/// u64 table length + u64 entries, u32 stack count + named DenseParams, u32
/// matrix count + named matrices. Doubles are stored as raw IEEE-754 bits so a
/// load returns exactly what was saved.
struct Checkpoint {
  static constexpr std::uint32_t version = 1;

  std::string kind;
  std::uint64_t seed = 0;
  std::vector<std::uint64_t> table;
  std::vector<std::pair<std::string, DenseParams>> stacks;
  std::vector<std::pair<std::string, Matrix>> matrices;

  const DenseParams& stack(const std::string& name) const;
  const Matrix& matrix(const std::string& name) const;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace colinf
