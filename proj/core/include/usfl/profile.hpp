// Copyright 2026 The usfl Authors
// SPDX-License-Identifier: Apache-2.0
//
// Workload description of a split DNN: per-layer FLOPs and payload sizes,
// optional semantic auto-encoder (SAE) overheads, and the split pairs the
// deployment permits. All sizes are bytes per sample; all FLOPs per sample.

#pragma once

#include <compare>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace usfl {

/// First and second split point. Layers 1..x run on the vehicle (part a),
/// x+1..y on the edge server (part b), y+1..L on the vehicle again (part c).
struct SplitPair {
  int x = 0;
  int y = 0;

  friend auto operator<=>(const SplitPair&, const SplitPair&) = default;
};

std::string to_string(SplitPair pair);

/// Optional architectural description kept alongside the measured numbers so
/// FLOP counts can be re-derived.
struct LayerGeometry {
  std::string kind;  // conv | maxpool | avgpool | fc
  int kernel = 1;
  int in_channels = 0;
  int out_channels = 0;
  int out_height = 1;
  int out_width = 1;
  int stride = 1;
};

struct LayerProfile {
  int index = 0;  // 1-based
  std::string name;
  double flops_forward = 0.0;
  double flops_backward = 0.0;
  double output_bytes_forward = 0.0;
  /// Size of the gradient this layer sends backwards (w.r.t. its input).
  double grad_bytes_backward = 0.0;
  double semantic_score = 0.0;
  std::optional<LayerGeometry> geometry;
};

struct SaeProfile {
  double encode_flops = 0.0;
  double decode_flops = 0.0;
  std::map<int, double> encoded_bytes_at;
};

class ModelProfile {
 public:
  /// Validates every invariant; throws ProfileError naming the offending
  /// layer or pair.
  ModelProfile(std::string name, std::vector<LayerProfile> layers,
               std::optional<SaeProfile> sae,
               std::vector<SplitPair> allowed_split_pairs,
               std::optional<SplitPair> default_split = std::nullopt);

  const std::string& name() const { return name_; }
  int total_layers() const { return static_cast<int>(layers_.size()); }
  const std::vector<LayerProfile>& layers() const { return layers_; }
  const LayerProfile& layer(int index) const;
  const std::optional<SaeProfile>& sae() const { return sae_; }
  const std::vector<SplitPair>& allowed_split_pairs() const { return pairs_; }
  SplitPair default_split() const { return default_split_; }

  bool is_allowed(SplitPair pair) const;
  /// Distinct first split points in ascending order.
  std::vector<int> first_split_candidates() const;
  /// Distinct second split points in ascending order.
  std::vector<int> second_split_candidates() const;

  /// Sum of forward and backward FLOPs over layers [from, to], inclusive.
  double cumulative_flops(int from_layer, int to_layer) const;

  /// Bytes per sample crossing a cut after `cut_layer`; the SAE-encoded size
  /// when `with_sae`.
  double smashed_size(int cut_layer, bool with_sae) const;

  /// Semantic-sensitive first split: argmax of the semantic score over
  /// [1, floor(L/2)], smallest index on ties.
  int select_semantic_split() const;

 private:
  std::string name_;
  std::vector<LayerProfile> layers_;
  std::optional<SaeProfile> sae_;
  std::vector<SplitPair> pairs_;
  SplitPair default_split_;
};

inline constexpr int kProfileSchemaVersion = 1;

ModelProfile parse_profile(std::string_view json_text);
ModelProfile load_profile(const std::filesystem::path& path);
std::string profile_to_json(const ModelProfile& profile);

}  // namespace usfl
