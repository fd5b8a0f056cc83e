#pragma once

// CurveSet CSV: first line holds the grid, each following line one curve.
// Numbers are written in shortest round-trip form.

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "rdepth/fdata.hpp"

namespace rdepth {

inline std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc{}) throw std::runtime_error("failed to format number");
  return std::string(buf, end);
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

/// Parses a whole cell as a double; nullopt-style failure via bool.
inline bool parse_double(std::string_view cell, double& out) {
  cell = trim(cell);
  if (cell.empty()) return false;
  if (cell.front() == '+') cell.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), out);
  return ec == std::errc{} && ptr == cell.data() + cell.size();
}

inline std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      cells.push_back(line.substr(start));
      break;
    }
    cells.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return cells;
}

/// Parses one CSV line of numbers; `row` is 1-based for messages.
inline std::vector<double> parse_number_row(std::string_view line, std::size_t row) {
  std::vector<double> values;
  auto cells = split_commas(line);
  values.reserve(cells.size());
  for (std::size_t c = 0; c < cells.size(); ++c) {
    double v = 0.0;
    if (!parse_double(cells[c], v))
      throw ParseError("row " + std::to_string(row) + ", column " + std::to_string(c + 1) +
                       ": not a number: '" + std::string(trim(cells[c])) + "'");
    values.push_back(v);
  }
  return values;
}

inline CurveSet parse_curveset_csv(std::istream& in) {
  std::string line;
  std::size_t row = 0;
  std::vector<double> grid_points;
  std::vector<double> values;
  bool have_grid = false;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    auto numbers = parse_number_row(line, row);
    if (!have_grid) {
      for (std::size_t c = 1; c < numbers.size(); ++c) {
        if (!(numbers[c] > numbers[c - 1]))
          throw ParseError("row " + std::to_string(row) + ", column " + std::to_string(c + 1) +
                           ": grid is not strictly increasing");
      }
      for (std::size_t c = 0; c < numbers.size(); ++c) {
        if (!std::isfinite(numbers[c]))
          throw ParseError("row " + std::to_string(row) + ", column " + std::to_string(c + 1) +
                           ": grid point is not finite");
      }
      grid_points = std::move(numbers);
      have_grid = true;
      continue;
    }
    if (numbers.size() != grid_points.size())
      throw ParseError("row " + std::to_string(row) + ": expected " + std::to_string(grid_points.size()) +
                       " values, found " + std::to_string(numbers.size()));
    for (std::size_t c = 0; c < numbers.size(); ++c) {
      if (!std::isfinite(numbers[c]))
        throw ParseError("row " + std::to_string(row) + ", column " + std::to_string(c + 1) +
                         ": value is not finite");
    }
    values.insert(values.end(), numbers.begin(), numbers.end());
  }
  if (!have_grid) throw ParseError("curve set file is empty");
  if (values.empty()) throw ParseError("curve set file has a grid but no curves");
  return CurveSet(Grid(std::move(grid_points)), std::move(values));
}

inline CurveSet read_curveset_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return parse_curveset_csv(in);
}

inline void write_curveset_csv(const CurveSet& set, std::ostream& out) {
  auto write_row = [&](std::span<const double> row) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out << ',';
      out << format_double(row[i]);
    }
    out << '\n';
  };
  write_row(set.grid().points());
  for (Index r = 0; r < set.size(); ++r) write_row(set.row(r));
}

inline void write_curveset_csv(const CurveSet& set, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  write_curveset_csv(set, out);
}

}  // namespace rdepth
