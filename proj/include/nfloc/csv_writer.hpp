// SPDX-License-Identifier: Apache-2.0
//
// nfloc - near-field multi-source localization with RF-chain-reduced arrays
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0

#ifndef NFLOC_CSV_WRITER_HPP
#define NFLOC_CSV_WRITER_HPP

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <stdexcept>
#include <string>

namespace nfloc {

/// Deterministic number formatting for CSV cells; the same value always
/// prints the same bytes.
inline std::string csv_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

inline std::string csv_number(int v) { return std::to_string(v); }
inline std::string csv_number(std::uint64_t v) { return std::to_string(v); }

/// Accumulates a CSV table: '#'-prefixed header comments, one header row,
/// data rows. Comma separated, UTF-8, '\n' line endings.
class CsvWriter {
 public:
  void comment(const std::string& text) { body_ += "# " + text + "\n"; }

  void header(std::initializer_list<const char*> columns) { append_cells(columns); }

  void row(std::initializer_list<std::string> cells) { append_cells(cells); }

  const std::string& str() const { return body_; }

  void write_file(const std::string& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open output file: " + path);
    out << body_;
    if (!out) throw std::runtime_error("failed writing output file: " + path);
  }

 private:
  template <typename Range>
  void append_cells(const Range& cells) {
    bool first = true;
    for (const auto& cell : cells) {
      if (!first) body_ += ',';
      body_ += cell;
      first = false;
    }
    body_ += '\n';
  }

  std::string body_;
};

}  // namespace nfloc

#endif  // NFLOC_CSV_WRITER_HPP
