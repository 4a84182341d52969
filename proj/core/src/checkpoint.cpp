// Copyright 2026 The usfl Authors
// SPDX-License-Identifier: Apache-2.0

#include "usfl/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "usfl/error.hpp"

namespace usfl {

namespace {
constexpr const char* kFormat = "usfl-checkpoint";
}

const NamedArray* CheckpointData::find(const std::string& name) const {
  for (const auto& a : arrays) {
    if (a.name == name) return &a;
  }
  return nullptr;
}

void append_parameters(CheckpointData& data, const std::string& prefix,
                       const nn::ParameterSet& params) {
  for (size_t i = 0; i < params.count(); ++i) {
    data.arrays.push_back({prefix + "/" + params.at(i).name(), params.at(i).value()});
  }
}

void restore_parameters(const CheckpointData& data, const std::string& prefix,
                        nn::ParameterSet& params) {
  for (size_t i = 0; i < params.count(); ++i) {
    auto& p = params.at(i);
    const auto name = prefix + "/" + p.name();
    const auto* a = data.find(name);
    if (!a) throw CheckpointError("checkpoint has no array " + name);
    if (a->value.rows() != p.value().rows() || a->value.cols() != p.value().cols()) {
      throw CheckpointError("shape mismatch for array " + name + ": checkpoint has " +
                            std::to_string(a->value.rows()) + "x" +
                            std::to_string(a->value.cols()) + ", network expects " +
                            std::to_string(p.value().rows()) + "x" +
                            std::to_string(p.value().cols()));
    }
  }
  for (size_t i = 0; i < params.count(); ++i) {
    params.at(i).value() = data.find(prefix + "/" + params.at(i).name())->value;
  }
}

std::string checkpoint_to_string(const CheckpointData& data) {
  nlohmann::json j;
  j["format"] = kFormat;
  j["version"] = kCheckpointVersion;
  j["metadata"] = data.metadata;
  auto& arrays = j["arrays"] = nlohmann::json::array();
  for (const auto& a : data.arrays) {
    std::vector<double> flat(a.value.data(), a.value.data() + a.value.size());
    arrays.push_back({{"name", a.name},
                      {"rows", a.value.rows()},
                      {"cols", a.value.cols()},
                      {"data", flat}});
  }
  return j.dump();
}

CheckpointData checkpoint_from_string(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("corrupt checkpoint: ") + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != kFormat) {
      throw CheckpointError("not a checkpoint file");
    }
    const int version = j.at("version").get<int>();
    if (version != kCheckpointVersion) {
      throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
    }
    CheckpointData data;
    data.metadata = j.at("metadata").get<std::map<std::string, std::string>>();
    for (const auto& a : j.at("arrays")) {
      const auto rows = a.at("rows").get<Eigen::Index>();
      const auto cols = a.at("cols").get<Eigen::Index>();
      const auto flat = a.at("data").get<std::vector<double>>();
      const auto name = a.at("name").get<std::string>();
      if (rows < 0 || cols < 0 || static_cast<Eigen::Index>(flat.size()) != rows * cols) {
        throw CheckpointError("corrupt checkpoint: array " + name + " has " +
                              std::to_string(flat.size()) + " values for shape " +
                              std::to_string(rows) + "x" + std::to_string(cols));
      }
      data.arrays.push_back({name, Eigen::Map<const nn::Matrix>(flat.data(), rows, cols)});
    }
    return data;
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("corrupt checkpoint: ") + e.what());
  }
}

void write_checkpoint(const std::filesystem::path& path, const CheckpointData& data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot open " + path.string() + " for writing");
  out << checkpoint_to_string(data);
  if (!out) throw CheckpointError("failed writing " + path.string());
}

CheckpointData read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return checkpoint_from_string(ss.str());
}

}  // namespace usfl
