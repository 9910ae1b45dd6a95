#pragma once

#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "ssa/core/error.hpp"

/**
 * @file csv.hpp
 *
 * Minimal comma-separated reader for numeric tables with a header row. Fields
 * may be double-quoted; an empty field is a missing value. Blank lines are
 * skipped.
 */

namespace ssa::io {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;  // source line of each row, 1-based

  std::optional<std::size_t> column(std::string_view name) const {
    for (std::size_t j = 0; j < header.size(); ++j) {
      if (header[j] == name) return j;
    }
    return std::nullopt;
  }
};

namespace csv_detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_line(const std::string& line, std::size_t line_no) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  bool was_quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        field.push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
      was_quoted = true;
    } else if (c == ',') {
      out.push_back(was_quoted ? field : trim(field));
      field.clear();
      was_quoted = false;
    } else {
      field.push_back(c);
    }
  }
  if (quoted) fail(ErrorKind::invalid_data, "line " + std::to_string(line_no) + ": unterminated quote");
  out.push_back(was_quoted ? field : trim(field));
  return out;
}

}  // namespace csv_detail

inline CsvTable parse_csv(std::istream& in) {
  CsvTable table;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (csv_detail::trim(line).empty()) continue;
    auto fields = csv_detail::split_line(line, line_no);
    if (!have_header) {
      if (line_no == 1 && fields.front().rfind("\xEF\xBB\xBF", 0) == 0) fields.front().erase(0, 3);
      table.header = std::move(fields);
      have_header = true;
      continue;
    }
    if (fields.size() != table.header.size()) {
      fail(ErrorKind::invalid_data, "line " + std::to_string(line_no) + ": expected " +
                                        std::to_string(table.header.size()) + " fields, found " +
                                        std::to_string(fields.size()));
    }
    table.rows.push_back(std::move(fields));
    table.line_numbers.push_back(line_no);
  }
  require(have_header, ErrorKind::invalid_data, "CSV input is empty (no header row)");
  return table;
}

inline CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::invalid_data, "cannot open data file '" + path + "'");
  return parse_csv(in);
}

/// Parses a finite decimal; empty or NA means missing. Anything else is a data error naming the cell.
inline std::optional<double> parse_cell(const CsvTable& t, std::size_t row, std::size_t col) {
  const std::string& s = t.rows[row][col];
  if (s.empty() || s == "NA") return std::nullopt;
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || !std::isfinite(v)) {
    fail(ErrorKind::invalid_data, "line " + std::to_string(t.line_numbers[row]) + ", column '" + t.header[col] +
                                      "': '" + s + "' is not a finite number");
  }
  return v;
}

inline double require_cell(const CsvTable& t, std::size_t row, std::size_t col) {
  const auto v = parse_cell(t, row, col);
  if (!v) {
    fail(ErrorKind::invalid_data, "line " + std::to_string(t.line_numbers[row]) + ", column '" + t.header[col] +
                                      "': value is required");
  }
  return *v;
}

inline std::size_t require_column(const CsvTable& t, std::string_view name) {
  const auto c = t.column(name);
  if (!c) fail(ErrorKind::invalid_data, "missing required column '" + std::string(name) + "'");
  return *c;
}

}  // namespace ssa::io
