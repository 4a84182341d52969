// Copyright 2026 The usfl Authors
// SPDX-License-Identifier: Apache-2.0
//
// Versioned JSON container of named arrays plus string metadata.

#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "usfl/tape.hpp"

namespace usfl {

inline constexpr int kCheckpointVersion = 1;

struct NamedArray {
  std::string name;
  nn::Matrix value;
};

struct CheckpointData {
  std::map<std::string, std::string> metadata;
  std::vector<NamedArray> arrays;

  const NamedArray* find(const std::string& name) const;
};

/// Appends every parameter of `params` as "<prefix>/<parameter name>".
void append_parameters(CheckpointData& data, const std::string& prefix,
                       const nn::ParameterSet& params);
/// Copies arrays back into `params`. Throws CheckpointError naming the first
/// array that is missing or has a different shape.
void restore_parameters(const CheckpointData& data, const std::string& prefix,
                        nn::ParameterSet& params);

std::string checkpoint_to_string(const CheckpointData& data);
CheckpointData checkpoint_from_string(const std::string& text);
void write_checkpoint(const std::filesystem::path& path, const CheckpointData& data);
CheckpointData read_checkpoint(const std::filesystem::path& path);

}  // namespace usfl
