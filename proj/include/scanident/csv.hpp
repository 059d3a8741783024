#pragma once

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "scanident/common.hpp"
#include "scanident/grid.hpp"
#include "scanident/identify.hpp"
#include "scanident/prefix.hpp"
#include "scanident/simulate.hpp"

namespace scanident {

// Shortest round-tripping decimal form.
inline std::string format_double(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

// Write-to-temp-then-rename so readers never observe a partial file and
// error paths leave no output behind.
inline void atomic_write(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + tmp.string());
    out << content;
    out.flush();
    if (!out) {
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw IoError("write failed: " + tmp.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("rename failed: " + path.string());
  }
}

inline std::string provenance_header(const std::vector<std::pair<std::string, std::string>>& kv) {
  std::string out = "# scanident v" + std::string(kVersion) + "\n";
  for (const auto& [k, v] : kv) out += "# " + k + "=" + v + "\n";
  return out;
}

inline std::string curve_to_csv(const SimilarityCurve& curve) {
  std::string out = provenance_header(curve.provenance);
  out += "x";
  for (const auto& s : curve.series) out += "," + s.name + "_mean," + s.name + "_se";
  out += ",reps\n";
  for (std::size_t p = 0; p < curve.xs.size(); ++p) {
    out += format_double(curve.xs[p]);
    for (const auto& s : curve.series) {
      out += "," + format_double(s.mean[p]) + "," + format_double(s.se[p]);
    }
    out += "," + std::to_string(curve.reps) + "\n";
  }
  return out;
}

// Parses a curve CSV back; used by round-trip tests and downstream tooling.
inline SimilarityCurve curve_from_csv(const std::string& text) {
  SimilarityCurve curve;
  std::istringstream in(text);
  std::string line;
  std::vector<std::string> names;
  bool header_done = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto eq = line.find('=');
      if (eq != std::string::npos && line.size() > 2) {
        curve.provenance.emplace_back(line.substr(2, eq - 2), line.substr(eq + 1));
      }
      continue;
    }
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!header_done) {
      header_done = true;
      if (cells.size() < 2 || cells.front() != "x" || cells.back() != "reps" ||
          (cells.size() - 2) % 2 != 0) {
        throw DataError("curve CSV: malformed header");
      }
      for (std::size_t i = 1; i + 1 < cells.size(); i += 2) {
        std::string name = cells[i];
        if (name.size() < 5 || name.substr(name.size() - 5) != "_mean") {
          throw DataError("curve CSV: malformed series column " + name);
        }
        name.resize(name.size() - 5);
        curve.series.push_back({name, {}, {}});
      }
      names = cells;
      continue;
    }
    if (cells.size() != names.size()) throw DataError("curve CSV: ragged row");
    curve.xs.push_back(std::stod(cells.front()));
    for (std::size_t s = 0; s < curve.series.size(); ++s) {
      curve.series[s].mean.push_back(std::stod(cells[1 + 2 * s]));
      curve.series[s].se.push_back(std::stod(cells[2 + 2 * s]));
    }
    curve.reps = std::stoi(cells.back());
  }
  if (!header_done) throw DataError("curve CSV: missing header");
  return curve;
}

inline std::string grid_stats_to_csv(const GridStats& stats,
                                     const std::vector<std::pair<std::string, std::string>>& kv = {}) {
  std::string out = provenance_header(kv);
  out += "# total_raw=" + std::to_string(stats.total_raw) + "\n";
  out += "# total_dedup=" + std::to_string(stats.total_dedup) + "\n";
  out += "# memory_bytes=" + std::to_string(stats.memory_bytes) + "\n";
  out += "scale,spacing,raw_count,dedup_count\n";
  for (const auto& layer : stats.layers) {
    out += layer.scale + "," + layer.spacing + "," + std::to_string(layer.raw) + "," +
           std::to_string(layer.dedup) + "\n";
  }
  return out;
}

template <typename Region>
std::string identification_to_csv(const Identification<Region>& est,
                                  const std::vector<std::pair<std::string, std::string>>& kv = {}) {
  std::string out = provenance_header(kv);
  out += "# found=" + std::string(est.found() ? "1" : "0") + "\n";
  out += "# max_stat=" + format_double(est.max_stat) + "\n";
  if constexpr (std::is_same_v<Region, Interval>) {
    out += "start,end,stat,threshold,iteration\n";
    for (const auto& pick : est.picks) {
      out += std::to_string(pick.region.start) + "," + std::to_string(pick.region.end) + "," +
             format_double(pick.stat) + "," + format_double(est.threshold) + "," +
             std::to_string(pick.iteration) + "\n";
    }
  } else {
    out += "j1,j2,k1,k2,stat,threshold,iteration\n";
    for (const auto& pick : est.picks) {
      out += std::to_string(pick.region.j1) + "," + std::to_string(pick.region.j2) + "," +
             std::to_string(pick.region.k1) + "," + std::to_string(pick.region.k2) + "," +
             format_double(pick.stat) + "," + format_double(est.threshold) + "," +
             std::to_string(pick.iteration) + "\n";
    }
  }
  return out;
}

namespace detail {

inline double parse_double_token(std::string token, const std::string& context) {
  // Trim whitespace and an optional trailing comma (single-column CSV).
  while (!token.empty() && (token.back() == '\r' || token.back() == ' ' || token.back() == '\t' ||
                            token.back() == ','))
    token.pop_back();
  std::size_t start = 0;
  while (start < token.size() && (token[start] == ' ' || token[start] == '\t')) ++start;
  token = token.substr(start);
  if (token.empty()) throw DataError(context + ": empty value");
  double v = 0.0;
  const auto res = std::from_chars(token.data(), token.data() + token.size(), v);
  if (res.ec != std::errc() || res.ptr != token.data() + token.size()) {
    throw DataError(context + ": cannot parse value '" + token + "'");
  }
  return v;
}

}  // namespace detail

// 1D input: one float per line (or a single CSV column). Blank lines and
// '#' comments are ignored.
inline std::vector<double> read_data_1d(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open input file: " + path.string());
  std::vector<double> values;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    bool blank = true;
    for (char ch : line) {
      if (ch != ' ' && ch != '\t' && ch != '\r') blank = false;
    }
    if (blank) continue;
    values.push_back(detail::parse_double_token(line, path.string() + ":" + std::to_string(lineno)));
  }
  return values;
}

// 2D input: row-major CSV, n rows by n columns.
inline Field2D read_data_2d(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open input file: " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::vector<double> row;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) {
      row.push_back(detail::parse_double_token(cell, path.string() + ":" + std::to_string(lineno)));
    }
    if (row.empty()) continue;
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw DataError(path.string() + ": ragged rows");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DataError(path.string() + ": no data rows");
  if (rows.size() != rows.front().size()) {
    throw DataError(path.string() + ": expected a square n x n grid, got " +
                    std::to_string(rows.size()) + " x " + std::to_string(rows.front().size()));
  }
  Field2D field;
  field.n = static_cast<index_t>(rows.size());
  field.values.reserve(rows.size() * rows.size());
  for (const auto& row : rows) {
    field.values.insert(field.values.end(), row.begin(), row.end());
  }
  return field;
}

}  // namespace scanident
