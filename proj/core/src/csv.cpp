// Copyright 2026 The usfl Authors
// SPDX-License-Identifier: Apache-2.0

#include "usfl/csv.hpp"

#include <sstream>

#include "usfl/error.hpp"

namespace usfl {
namespace {

std::string quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  bool quoted = false;
  for (size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      cells.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  cells.push_back(std::move(cur));
  return cells;
}

}  // namespace

CsvWriter::CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header)
    : path_(path), out_(path), columns_(header.size()) {
  if (!out_) throw Error("cannot write " + path.string());
  out_.precision(12);
  for (size_t i = 0; i < header.size(); ++i) out_ << (i ? "," : "") << quote(header[i]);
  out_ << "\n";
}

void CsvWriter::row(const std::vector<CsvCell>& cells) {
  if (cells.size() != columns_) {
    throw InvalidArgument("csv row has " + std::to_string(cells.size()) + " cells, expected " +
                          std::to_string(columns_));
  }
  for (size_t i = 0; i < cells.size(); ++i) {
    if (i) out_ << ",";
    std::visit(
        [this](const auto& v) {
          if constexpr (std::is_same_v<std::decay_t<decltype(v)>, std::string>) {
            out_ << quote(v);
          } else {
            out_ << v;
          }
        },
        cells[i]);
  }
  out_ << "\n";
  out_.flush();
  ++rows_;
}

size_t CsvTable::column(const std::string& name) const {
  for (size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  throw InvalidArgument("csv has no column " + name);
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path.string());
  CsvTable table;
  std::string line;
  if (std::getline(in, line)) table.header = split_line(line);
  while (std::getline(in, line)) {
    if (!line.empty()) table.rows.push_back(split_line(line));
  }
  return table;
}

}  // namespace usfl
