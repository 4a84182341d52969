// Copyright 2026 The usfl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>

namespace usfl {

/// Derives an independent 64-bit seed for `stream` from a root seed
/// (splitmix64 finalizer over the combined value).
inline std::uint64_t derive_seed(std::uint64_t root, std::uint64_t stream) {
  std::uint64_t z = root + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

namespace seed_stream {
inline constexpr std::uint64_t env = 1;
inline constexpr std::uint64_t init = 2;
inline constexpr std::uint64_t exploration = 3;
inline constexpr std::uint64_t minibatch = 4;
inline constexpr std::uint64_t instances = 5;
}  // namespace seed_stream

}  // namespace usfl
