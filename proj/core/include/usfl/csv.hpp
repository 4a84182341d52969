// Copyright 2026 The usfl Authors
// SPDX-License-Identifier: Apache-2.0
//
// Minimal CSV output for run artifacts. Numbers are written with 12
// significant digits; text cells are quoted when they contain a separator.

#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <variant>
#include <vector>

namespace usfl {

using CsvCell = std::variant<std::string, double, long long>;

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header);

  void row(const std::vector<CsvCell>& cells);
  const std::filesystem::path& path() const { return path_; }
  size_t rows() const { return rows_; }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
  size_t columns_;
  size_t rows_ = 0;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Index of `name` in the header; throws when absent.
  size_t column(const std::string& name) const;
};

CsvTable read_csv(const std::filesystem::path& path);

}  // namespace usfl
