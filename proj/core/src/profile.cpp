// Copyright 2026 The usfl Authors
// SPDX-License-Identifier: Apache-2.0

#include "usfl/profile.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "usfl/error.hpp"

namespace usfl {

using nlohmann::json;

std::string to_string(SplitPair pair) {
  return "(" + std::to_string(pair.x) + "," + std::to_string(pair.y) + ")";
}

namespace {

std::string layer_tag(int index) { return "layer " + std::to_string(index); }

void require_nonnegative(double v, int index, const char* field) {
  if (!(v >= 0.0) || !std::isfinite(v)) {
    throw ProfileError(layer_tag(index) + ": " + field +
                       " must be finite and >= 0");
  }
}

}  // namespace

ModelProfile::ModelProfile(std::string name, std::vector<LayerProfile> layers,
                           std::optional<SaeProfile> sae,
                           std::vector<SplitPair> allowed_split_pairs,
                           std::optional<SplitPair> default_split)
    : name_(std::move(name)),
      layers_(std::move(layers)),
      sae_(std::move(sae)),
      pairs_(std::move(allowed_split_pairs)) {
  if (layers_.empty()) throw ProfileError("profile has no layers");
  const int L = total_layers();
  for (int i = 0; i < L; ++i) {
    const auto& l = layers_[static_cast<size_t>(i)];
    if (l.index != i + 1) {
      throw ProfileError("layer at position " + std::to_string(i + 1) +
                         " has index " + std::to_string(l.index) +
                         "; layers must be indexed 1..L in order");
    }
    require_nonnegative(l.flops_forward, l.index, "flops_forward");
    require_nonnegative(l.flops_backward, l.index, "flops_backward");
    require_nonnegative(l.output_bytes_forward, l.index, "output_bytes_forward");
    require_nonnegative(l.grad_bytes_backward, l.index, "grad_bytes_backward");
    if (!(l.semantic_score >= 0.0 && l.semantic_score <= 1.0)) {
      throw ProfileError(layer_tag(l.index) + ": semantic_score must lie in [0,1]");
    }
  }
  if (pairs_.empty()) throw ProfileError("profile has no allowed split pairs");
  std::set<SplitPair> seen;
  for (const auto& p : pairs_) {
    if (!(1 <= p.x && p.x < p.y && p.y <= L)) {
      throw ProfileError("split pair " + to_string(p) +
                         " violates 1 <= X < Y <= L (L=" + std::to_string(L) + ")");
    }
    if (!seen.insert(p).second) {
      throw ProfileError("split pair " + to_string(p) + " listed twice");
    }
  }
  if (sae_) {
    if (!(sae_->encode_flops >= 0.0) || !(sae_->decode_flops >= 0.0)) {
      throw ProfileError("sae: encode/decode flops must be >= 0");
    }
    for (const auto& [cut, bytes] : sae_->encoded_bytes_at) {
      if (!(bytes >= 0.0)) {
        throw ProfileError("sae: encoded_bytes_at[" + std::to_string(cut) +
                           "] must be >= 0");
      }
    }
    for (int x : first_split_candidates()) {
      if (!sae_->encoded_bytes_at.contains(x)) {
        throw ProfileError("sae: encoded_bytes_at has no entry for first split " +
                           std::to_string(x));
      }
    }
  }
  default_split_ = default_split.value_or(pairs_.back());
  if (!is_allowed(default_split_)) {
    throw ProfileError("default split " + to_string(default_split_) +
                       " is not an allowed pair");
  }
}

const LayerProfile& ModelProfile::layer(int index) const {
  if (index < 1 || index > total_layers()) {
    throw InvalidArgument("layer index " + std::to_string(index) +
                          " outside [1," + std::to_string(total_layers()) + "]");
  }
  return layers_[static_cast<size_t>(index - 1)];
}

bool ModelProfile::is_allowed(SplitPair pair) const {
  return std::find(pairs_.begin(), pairs_.end(), pair) != pairs_.end();
}

std::vector<int> ModelProfile::first_split_candidates() const {
  std::set<int> xs;
  for (const auto& p : pairs_) xs.insert(p.x);
  return {xs.begin(), xs.end()};
}

std::vector<int> ModelProfile::second_split_candidates() const {
  std::set<int> ys;
  for (const auto& p : pairs_) ys.insert(p.y);
  return {ys.begin(), ys.end()};
}

double ModelProfile::cumulative_flops(int from_layer, int to_layer) const {
  if (from_layer < 1 || to_layer > total_layers() || from_layer > to_layer) {
    throw InvalidArgument("cumulative_flops: range [" + std::to_string(from_layer) +
                          "," + std::to_string(to_layer) + "] invalid for L=" +
                          std::to_string(total_layers()));
  }
  double sum = 0.0;
  for (int l = from_layer; l <= to_layer; ++l) {
    const auto& layer = layers_[static_cast<size_t>(l - 1)];
    sum += layer.flops_forward + layer.flops_backward;
  }
  return sum;
}

double ModelProfile::smashed_size(int cut_layer, bool with_sae) const {
  const auto& l = layer(cut_layer);
  if (!with_sae) return l.output_bytes_forward;
  if (!sae_) throw ProfileError("smashed_size: profile has no SAE entry");
  auto it = sae_->encoded_bytes_at.find(cut_layer);
  if (it == sae_->encoded_bytes_at.end()) {
    throw ProfileError("smashed_size: no SAE entry for cut layer " +
                       std::to_string(cut_layer));
  }
  return it->second;
}

int ModelProfile::select_semantic_split() const {
  const int L = total_layers();
  if (L < 2) throw InvalidArgument("select_semantic_split requires L >= 2");
  int best = 1;
  for (int l = 2; l <= L / 2; ++l) {
    if (layers_[static_cast<size_t>(l - 1)].semantic_score >
        layers_[static_cast<size_t>(best - 1)].semantic_score) {
      best = l;
    }
  }
  return best;
}

// JSON ----------------------------------------------------------------------

namespace {

template <typename T>
T field(const json& j, const char* key, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end()) throw ProfileError(where + ": missing field '" + key + "'");
  try {
    return it->get<T>();
  } catch (const json::exception& e) {
    throw ProfileError(where + ": field '" + key + "' has wrong type");
  }
}

SplitPair parse_pair(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number_integer() ||
      !j[1].is_number_integer()) {
    throw ProfileError(where + ": split pair must be [X, Y] integers");
  }
  return {j[0].get<int>(), j[1].get<int>()};
}

}  // namespace

ModelProfile parse_profile(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ProfileError(std::string("profile parse failure: ") + e.what());
  }
  const int version = field<int>(doc, "schema_version", "profile");
  if (version != kProfileSchemaVersion) {
    throw ProfileError("unsupported profile schema_version " +
                       std::to_string(version));
  }
  auto name = field<std::string>(doc, "name", "profile");
  const auto& jl = doc.at("layers");
  std::vector<LayerProfile> layers;
  for (size_t i = 0; i < jl.size(); ++i) {
    const auto& e = jl[i];
    const std::string where = "layers[" + std::to_string(i) + "]";
    LayerProfile l;
    l.index = field<int>(e, "index", where);
    l.name = e.value("name", std::string{});
    l.flops_forward = field<double>(e, "flops_forward", where);
    l.flops_backward = field<double>(e, "flops_backward", where);
    l.output_bytes_forward = field<double>(e, "output_bytes_forward", where);
    l.grad_bytes_backward = field<double>(e, "grad_bytes_backward", where);
    l.semantic_score = field<double>(e, "semantic_score", where);
    if (auto g = e.find("geometry"); g != e.end()) {
      LayerGeometry geo;
      geo.kind = field<std::string>(*g, "kind", where + ".geometry");
      geo.kernel = field<int>(*g, "kernel", where + ".geometry");
      geo.in_channels = field<int>(*g, "in_channels", where + ".geometry");
      geo.out_channels = field<int>(*g, "out_channels", where + ".geometry");
      geo.out_height = field<int>(*g, "out_height", where + ".geometry");
      geo.out_width = field<int>(*g, "out_width", where + ".geometry");
      geo.stride = g->value("stride", 1);
      l.geometry = geo;
    }
    layers.push_back(std::move(l));
  }
  if (auto t = doc.find("total_layers"); t != doc.end()) {
    if (t->get<int>() != static_cast<int>(layers.size())) {
      throw ProfileError("total_layers=" + std::to_string(t->get<int>()) +
                         " but " + std::to_string(layers.size()) +
                         " layers listed");
    }
  }
  std::optional<SaeProfile> sae;
  if (auto s = doc.find("sae"); s != doc.end() && !s->is_null()) {
    SaeProfile p;
    p.encode_flops = field<double>(*s, "encode_flops", "sae");
    p.decode_flops = field<double>(*s, "decode_flops", "sae");
    for (const auto& [k, v] : s->at("encoded_bytes_at").items()) {
      int cut = 0;
      try {
        cut = std::stoi(k);
      } catch (const std::exception&) {
        throw ProfileError("sae.encoded_bytes_at: key '" + k + "' is not a layer index");
      }
      p.encoded_bytes_at[cut] = v.get<double>();
    }
    sae = std::move(p);
  }
  std::vector<SplitPair> pairs;
  const auto& jp = doc.at("allowed_split_pairs");
  for (size_t i = 0; i < jp.size(); ++i) {
    pairs.push_back(parse_pair(jp[i], "allowed_split_pairs[" + std::to_string(i) + "]"));
  }
  std::optional<SplitPair> def;
  if (auto d = doc.find("default_split"); d != doc.end()) {
    def = parse_pair(*d, "default_split");
  }
  return ModelProfile(std::move(name), std::move(layers), std::move(sae),
                      std::move(pairs), def);
}

ModelProfile load_profile(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ProfileError("cannot open profile " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return parse_profile(buf.str());
  } catch (const ProfileError& e) {
    throw ProfileError(path.string() + ": " + e.what());
  } catch (const json::exception& e) {
    throw ProfileError(path.string() + ": " + e.what());
  }
}

std::string profile_to_json(const ModelProfile& profile) {
  json doc;
  doc["schema_version"] = kProfileSchemaVersion;
  doc["name"] = profile.name();
  doc["total_layers"] = profile.total_layers();
  json layers = json::array();
  for (const auto& l : profile.layers()) {
    json e{{"index", l.index},
           {"name", l.name},
           {"flops_forward", l.flops_forward},
           {"flops_backward", l.flops_backward},
           {"output_bytes_forward", l.output_bytes_forward},
           {"grad_bytes_backward", l.grad_bytes_backward},
           {"semantic_score", l.semantic_score}};
    if (l.geometry) {
      const auto& g = *l.geometry;
      e["geometry"] = {{"kind", g.kind},
                       {"kernel", g.kernel},
                       {"in_channels", g.in_channels},
                       {"out_channels", g.out_channels},
                       {"out_height", g.out_height},
                       {"out_width", g.out_width},
                       {"stride", g.stride}};
    }
    layers.push_back(std::move(e));
  }
  doc["layers"] = std::move(layers);
  if (profile.sae()) {
    json enc = json::object();
    for (const auto& [cut, bytes] : profile.sae()->encoded_bytes_at) {
      enc[std::to_string(cut)] = bytes;
    }
    doc["sae"] = {{"encode_flops", profile.sae()->encode_flops},
                  {"decode_flops", profile.sae()->decode_flops},
                  {"encoded_bytes_at", enc}};
  }
  json pairs = json::array();
  for (const auto& p : profile.allowed_split_pairs()) pairs.push_back({p.x, p.y});
  doc["allowed_split_pairs"] = pairs;
  doc["default_split"] = {profile.default_split().x, profile.default_split().y};
  return doc.dump(2);
}

}  // namespace usfl
