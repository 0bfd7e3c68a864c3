// Copyright (c) 2026 The stutterkit Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "stutter/error.hpp"
#include "stutter/metrics.hpp"

namespace stutter {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

inline CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoFailure, "cannot read " + path.string());
  CsvTable t;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::istringstream is(line);
    std::string f;
    while (std::getline(is, f, ',')) fields.push_back(f);
    if (first) t.header = std::move(fields);
    else t.rows.push_back(std::move(fields));
    first = false;
  }
  return t;
}

inline std::map<std::string, std::string> read_key_values(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoFailure, "cannot read " + path.string());
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq != std::string::npos) kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

inline double parse_metric(const std::string& s) {
  if (s == "NA" || s.empty()) return std::nan("");
  return std::stod(s);
}

namespace detail {

inline std::string cell(double v, int width) {
  char buf[32];
  if (std::isnan(v)) std::snprintf(buf, sizeof(buf), "%*s", width, "-");
  else std::snprintf(buf, sizeof(buf), "%*.2f", width, v);
  return buf;
}

inline MetricValues metrics_row(const CsvTable& t, const std::string& stat) {
  for (const auto& row : t.rows)
    if (!row.empty() && row[0] == stat) {
      if (row.size() != 1 + kMetricNames.size()) fail(ErrorCode::InvalidArgument, "malformed metrics row " + stat);
      MetricValues v{};
      for (std::size_t i = 0; i < v.size(); ++i) v[i] = parse_metric(row[i + 1]);
      return v;
    }
  fail(ErrorCode::InvalidArgument, "metrics.csv has no '" + stat + "' row");
}

}  // namespace detail

/// One table line per run directory: model name, then mean R P B I F TA with std below.
inline std::string render_table(const std::vector<std::filesystem::path>& run_dirs) {
  std::size_t name_width = 5;
  std::vector<std::string> names;
  for (const auto& dir : run_dirs) {
    const auto meta = read_key_values(dir / "run_meta.txt");
    const auto it = meta.find("model_name");
    names.push_back(it != meta.end() ? it->second : dir.filename().string());
    name_width = std::max(name_width, names.back().size());
  }
  std::ostringstream os;
  os << std::string(name_width, ' ').replace(0, 5, "Model");
  for (auto n : kMetricNames) os << ' ' << std::string(7 - n.size(), ' ') << n;
  os << '\n' << std::string(name_width + 8 * kMetricNames.size(), '-') << '\n';
  for (std::size_t i = 0; i < run_dirs.size(); ++i) {
    const CsvTable t = read_csv(run_dirs[i] / "metrics.csv");
    const MetricValues mean = detail::metrics_row(t, "mean");
    const MetricValues sd = detail::metrics_row(t, "std");
    os << names[i] << std::string(name_width - names[i].size(), ' ');
    for (double v : mean) os << ' ' << detail::cell(v, 7);
    os << '\n' << std::string(name_width, ' ');
    for (double v : sd) {
      if (std::isnan(v)) os << "        ";
      else {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "(%.2f)", v);
        os << ' ' << std::string(7 - std::min<std::size_t>(7, std::string(buf).size()), ' ') << buf;
      }
    }
    os << '\n';
  }
  return os.str();
}

struct SweepPoint {
  int layer = 0;
  MetricValues values{};
};

inline std::vector<SweepPoint> read_layer_sweep(const std::filesystem::path& path) {
  const CsvTable t = read_csv(path);
  std::vector<SweepPoint> out;
  for (const auto& row : t.rows) {
    if (row.size() != 1 + kMetricNames.size()) fail(ErrorCode::InvalidArgument, "malformed layer sweep row");
    SweepPoint p;
    p.layer = std::stoi(row[0]);
    for (std::size_t i = 0; i < p.values.size(); ++i) p.values[i] = parse_metric(row[i + 1]);
    out.push_back(p);
  }
  return out;
}

/// Line chart: one polyline per metric over the swept layers, y axis 0..100.
inline std::string render_layer_sweep_svg(const std::vector<SweepPoint>& points) {
  constexpr double W = 720, H = 420, left = 60, right = 120, top = 30, bottom = 50;
  constexpr std::array<const char*, 6> colors = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#000000"};
  int lo = 1, hi = 13;
  if (!points.empty()) {
    lo = points.front().layer;
    hi = points.front().layer;
    for (const auto& p : points) lo = std::min(lo, p.layer), hi = std::max(hi, p.layer);
  }
  const double span = std::max(1, hi - lo);
  const auto x = [&](int layer) { return left + (layer - lo) / span * (W - left - right); };
  const auto y = [&](double v) { return top + (100.0 - v) / 100.0 * (H - top - bottom); };
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(2);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
     << ' ' << H << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << W / 2 << "\" y=\"18\" text-anchor=\"middle\" font-size=\"14\">Accuracy by layer</text>\n";
  for (int g = 0; g <= 100; g += 20) {
    os << "<line x1=\"" << left << "\" y1=\"" << y(g) << "\" x2=\"" << W - right << "\" y2=\"" << y(g)
       << "\" stroke=\"#ddd\"/>\n<text class=\"ytick\" x=\"" << left - 6 << "\" y=\"" << y(g) + 4
       << "\" text-anchor=\"end\" font-size=\"11\">" << g << "</text>\n";
  }
  for (int l = lo; l <= hi; ++l)
    os << "<text class=\"xtick\" x=\"" << x(l) << "\" y=\"" << H - bottom + 18
       << "\" text-anchor=\"middle\" font-size=\"11\">L" << l << "</text>\n";
  os << "<text x=\"" << (left + W - right) / 2 << "\" y=\"" << H - 10
     << "\" text-anchor=\"middle\" font-size=\"12\">layer</text>\n";
  os << "<text x=\"16\" y=\"" << (top + H - bottom) / 2 << "\" transform=\"rotate(-90 16 " << (top + H - bottom) / 2
     << ")\" text-anchor=\"middle\" font-size=\"12\">accuracy (%)</text>\n";
  for (std::size_t m = 0; m < kMetricNames.size(); ++m) {
    os << "<polyline class=\"series\" data-metric=\"" << kMetricNames[m] << "\" fill=\"none\" stroke=\"" << colors[m]
       << "\" stroke-width=\"" << (m + 1 == kMetricNames.size() ? 2.5 : 1.5) << "\" points=\"";
    bool first = true;
    for (const auto& p : points) {
      if (std::isnan(p.values[m])) continue;
      os << (first ? "" : " ") << x(p.layer) << ',' << y(p.values[m]);
      first = false;
    }
    os << "\"/>\n";
    for (const auto& p : points)
      if (!std::isnan(p.values[m]))
        os << "<circle class=\"pt\" cx=\"" << x(p.layer) << "\" cy=\"" << y(p.values[m]) << "\" r=\"2.5\" fill=\""
           << colors[m] << "\"/>\n";
    const double ly = top + 10 + 18.0 * static_cast<double>(m);
    os << "<line x1=\"" << W - right + 15 << "\" y1=\"" << ly << "\" x2=\"" << W - right + 35 << "\" y2=\"" << ly
       << "\" stroke=\"" << colors[m] << "\" stroke-width=\"2\"/>\n<text x=\"" << W - right + 40 << "\" y=\"" << ly + 4
       << "\" font-size=\"12\">" << kMetricNames[m] << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace stutter
