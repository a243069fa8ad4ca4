#pragma once

#include "capfair/data/dataset.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace capfair {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  [[nodiscard]] int column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return static_cast<int>(i);
    }
    return -1;
  }
};

namespace detail {

inline std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r\"");
  const auto last = s.find_last_not_of(" \t\r\"");
  return first == std::string::npos ? std::string() : s.substr(first, last - first + 1);
}

inline std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace detail

inline CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "'");
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) throw Error("'" + path + "': missing header");
  t.header = detail::split_line(line);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    const auto cells = detail::split_line(line);
    if (cells.size() != t.header.size()) {
      throw Error("'" + path + "' line " + std::to_string(lineno) + ": expected " + std::to_string(t.header.size()) +
                  " fields, got " + std::to_string(cells.size()));
    }
    std::vector<double> row(cells.size());
    for (std::size_t k = 0; k < cells.size(); ++k) {
      const auto& c = cells[k];
      const auto res = std::from_chars(c.data(), c.data() + c.size(), row[k]);
      if (res.ec != std::errc() || res.ptr != c.data() + c.size()) {
        throw Error("'" + path + "' line " + std::to_string(lineno) + ", column '" + t.header[k] +
                    "': not a number: '" + c + "'");
      }
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline void write_dataset_csv(const std::string& path, const Dataset& d) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path + "'");
  for (std::size_t j = 0; j < d.names.size(); ++j) out << d.names[j] << ',';
  out << "y\n";
  for (Index i = 0; i < d.size(); ++i) {
    for (Index j = 0; j < d.dim(); ++j) out << format_double(d.x(j, i)) << ',';
    out << format_double(d.y[i]) << '\n';
  }
}

// Builds a dataset from the named columns (in that order) and the label column.
inline Dataset dataset_from_table(const CsvTable& t, const std::vector<std::string>& names,
                                  const std::string& label = "y") {
  std::vector<int> cols;
  for (const auto& n : names) {
    const int c = t.column(n);
    if (c < 0) throw Error("csv has no column '" + n + "'");
    cols.push_back(c);
  }
  const int yc = t.column(label);
  if (yc < 0) throw Error("csv has no label column '" + label + "'");
  Dataset d;
  d.names = names;
  d.x.resize(static_cast<Index>(names.size()), static_cast<Index>(t.rows.size()));
  d.y.resize(static_cast<Index>(t.rows.size()));
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    for (std::size_t k = 0; k < cols.size(); ++k) {
      d.x(static_cast<Index>(k), static_cast<Index>(i)) = t.rows[i][static_cast<std::size_t>(cols[k])];
    }
    const double y = t.rows[i][static_cast<std::size_t>(yc)];
    if (y != 0.0 && y != 1.0) throw Error("label column '" + label + "' must be 0/1 (row " + std::to_string(i + 1) + ")");
    d.y[static_cast<Index>(i)] = y;
  }
  return d;
}

inline Dataset read_dataset_csv(const std::string& path, const std::vector<std::string>& names) {
  Dataset d = dataset_from_table(read_csv(path), names);
  d.source = path;
  return d;
}

}  // namespace capfair
