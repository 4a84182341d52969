// Copyright 2026 The usfl Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <fstream>
#include <sstream>

#include "support.hpp"
#include "usfl/error.hpp"
#include "usfl/profile.hpp"

using namespace usfl;
using usfl::testing::bundled_profile;
using usfl::testing::uniform_profile;
using usfl::testing::UniformLayers;

namespace {

// Geometry-based FLOP count written independently of the generator script.
double geometry_forward_flops(const LayerGeometry& g) {
  const double outputs = double(g.out_channels) * g.out_height * g.out_width;
  if (g.kind == "conv") return 2.0 * g.kernel * g.kernel * g.in_channels * outputs;
  if (g.kind == "maxpool") return double(g.kernel) * g.kernel * outputs;
  if (g.kind == "avgpool") return g.in_channels;
  if (g.kind == "fc") return 2.0 * g.in_channels * g.out_channels;
  return -1.0;
}

std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST_CASE("bundled profile has 18 layers and the ten allowed pairs") {
  const auto p = bundled_profile();
  CHECK(p->total_layers() == 18);
  const std::vector<SplitPair> expected{{1, 6}, {1, 7}, {1, 8}, {1, 9}, {2, 7},
                                        {2, 8}, {2, 9}, {3, 8}, {3, 9}, {4, 9}};
  CHECK(p->allowed_split_pairs() == expected);
  CHECK(p->first_split_candidates() == std::vector<int>{1, 2, 3, 4});
  CHECK(p->second_split_candidates() == std::vector<int>{6, 7, 8, 9});
}

TEST_CASE("bundled profile FLOPs and sizes match the layer geometry") {
  const auto p = bundled_profile();
  double prev_bytes = 3.0 * 32 * 32 * 4;  // CIFAR-10 input, fp32
  for (const LayerProfile& l : p->layers()) {
    INFO("layer " << l.index << " " << l.name);
    REQUIRE(l.geometry.has_value());
    const LayerGeometry& g = *l.geometry;
    CHECK(l.flops_forward == geometry_forward_flops(g));
    CHECK(l.flops_backward == 2.0 * l.flops_forward);
    CHECK(l.output_bytes_forward == 4.0 * g.out_channels * g.out_height * g.out_width);
    CHECK(l.grad_bytes_backward == prev_bytes);
    prev_bytes = l.output_bytes_forward;
  }
  // Spot value: 3x3 conv, 3 -> 64 channels, 32x32 output.
  CHECK(p->layer(1).flops_forward == 2.0 * 9 * 3 * 64 * 32 * 32);
}

TEST_CASE("cumulative_flops sums forward and backward over the range") {
  const ModelProfile p = uniform_profile(UniformLayers{}, {{1, 3}});
  CHECK(p.cumulative_flops(1, 4) == 8.0);
  CHECK(p.cumulative_flops(3, 3) == 2.0);
  CHECK_THROWS_AS(p.cumulative_flops(2, 1), InvalidArgument);
  CHECK_THROWS_AS(p.cumulative_flops(0, 3), InvalidArgument);
  CHECK_THROWS_AS(p.cumulative_flops(1, 7), InvalidArgument);

  const auto b = bundled_profile();
  for (int a = 1; a <= 17; ++a) {
    for (int c = a + 1; c <= 18; ++c) {
      for (int m = a; m < c; ++m) {
        CHECK(b->cumulative_flops(a, m) + b->cumulative_flops(m + 1, c) ==
              doctest::Approx(b->cumulative_flops(a, c)).epsilon(1e-15));
      }
    }
  }
}

TEST_CASE("smashed_size reads raw or encoded bytes") {
  const auto p = bundled_profile();
  for (int cut = 1; cut < 4; ++cut) {
    CHECK(p->smashed_size(cut + 1, false) < p->smashed_size(cut, false));
  }
  for (int cut = 1; cut <= 3; ++cut) {
    CHECK(p->smashed_size(cut, true) < p->smashed_size(cut, false));
  }
  CHECK(p->smashed_size(1, true) == 16384.0);

  const ModelProfile flat = uniform_profile(UniformLayers{}, {{1, 3}});
  for (int cut = 1; cut <= 6; ++cut) CHECK(flat.smashed_size(cut, false) == 100.0);
  CHECK_THROWS_AS(flat.smashed_size(1, true), ProfileError);
  CHECK_THROWS_AS(p->smashed_size(5, true), ProfileError);
}

TEST_CASE("select_semantic_split takes the first argmax in the first half") {
  UniformLayers spec;
  spec.scores = {0.1, 0.5, 0.3, 0.9, 0.95, 1.0};
  CHECK(uniform_profile(spec, {{1, 3}}).select_semantic_split() == 2);

  spec.scores = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6};
  CHECK(uniform_profile(spec, {{1, 3}}).select_semantic_split() == 3);

  spec.scores.assign(6, 0.4);
  CHECK(uniform_profile(spec, {{1, 3}}).select_semantic_split() == 1);

  CHECK(bundled_profile()->select_semantic_split() <= 9);
}

TEST_CASE("invalid profiles are rejected naming the culprit") {
  SUBCASE("pair with x == y") {
    try {
      uniform_profile(UniformLayers{}, {{5, 5}});
      FAIL("expected ProfileError");
    } catch (const ProfileError& e) {
      CHECK(std::string(e.what()).find("(5,5)") != std::string::npos);
    }
  }
  SUBCASE("pair beyond the last layer") {
    CHECK_THROWS_AS(uniform_profile(UniformLayers{}, {{1, 7}}), ProfileError);
  }
  SUBCASE("negative FLOPs") {
    UniformLayers spec;
    spec.flops_forward = -1.0;
    CHECK_THROWS_AS(uniform_profile(spec, {{1, 3}}), ProfileError);
  }
  SUBCASE("SAE missing a first split") {
    SaeProfile sae;
    sae.encoded_bytes_at = {{1, 10.0}};
    CHECK_THROWS_AS(uniform_profile(UniformLayers{}, {{1, 3}, {2, 4}}, sae), ProfileError);
  }
  SUBCASE("malformed JSON") {
    CHECK_THROWS_AS(parse_profile("{\"schema_version\": 1, "), ProfileError);
  }
  SUBCASE("wrong schema version") {
    std::string text = read_text(usfl::testing::bundled_profile_path());
    const auto pos = text.find("\"schema_version\": 1");
    REQUIRE(pos != std::string::npos);
    text.replace(pos, 19, "\"schema_version\": 9");
    CHECK_THROWS_AS(parse_profile(text), ProfileError);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_profile("/nonexistent/profile.json"), ProfileError);
  }
}

TEST_CASE("profile JSON round-trips") {
  const auto p = bundled_profile();
  const ModelProfile again = parse_profile(profile_to_json(*p));
  CHECK(again.name() == p->name());
  CHECK(again.allowed_split_pairs() == p->allowed_split_pairs());
  CHECK(again.default_split() == p->default_split());
  REQUIRE(again.total_layers() == p->total_layers());
  for (int l = 1; l <= p->total_layers(); ++l) {
    CHECK(again.layer(l).flops_forward == p->layer(l).flops_forward);
    CHECK(again.layer(l).grad_bytes_backward == p->layer(l).grad_bytes_backward);
    CHECK(again.layer(l).semantic_score == p->layer(l).semantic_score);
  }
  for (int cut = 1; cut <= 4; ++cut) CHECK(again.smashed_size(cut, true) == p->smashed_size(cut, true));
}
