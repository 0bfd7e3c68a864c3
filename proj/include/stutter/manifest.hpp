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

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "stutter/emb1.hpp"
#include "stutter/error.hpp"
#include "stutter/labels.hpp"

namespace stutter {

inline constexpr std::string_view kManifestHeader = "clip_id,podcast_id,label,source,layer,path";

struct ManifestRow {
  std::string clip_id;
  std::string podcast_id;
  ClassLabel label = ClassLabel::Fluent;
  Source source = Source::W2v2;
  int layer = 0;              // 0 for ecapa, 1..13 for w2v2
  std::string path;           // as written in the CSV
  std::filesystem::path resolved;  // absolute, or relative to the working directory
};

struct DatasetManifest {
  std::vector<ManifestRow> rows;
  std::filesystem::path base_dir;

  std::size_t size() const { return rows.size(); }
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline void strip_line(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

}  // namespace detail

/// Checks one row against the source/layer rules and the embedding header on disk.
inline void validate_row(const ManifestRow& row, std::size_t line_no) {
  const std::string where = "line " + std::to_string(line_no);
  if (row.clip_id.empty()) fail(ErrorCode::InvalidArgument, where + ": empty clip_id");
  if (row.source == Source::Ecapa && row.layer != 0)
    fail(ErrorCode::HeaderMismatch, where + ": ecapa rows must have layer 0");
  if (row.source == Source::W2v2 && (row.layer < 1 || row.layer > kNumW2v2Layers))
    fail(ErrorCode::HeaderMismatch, where + ": w2v2 layer must be in [1,13]");
  std::error_code ec;
  if (!std::filesystem::is_regular_file(row.resolved, ec))
    fail(ErrorCode::UnresolvablePath, where + ": " + row.resolved.string());
  const auto header = read_embedding_header(row.resolved);
  if (header.dims != static_cast<std::uint32_t>(expected_dim(row.source)))
    fail(ErrorCode::HeaderMismatch, where + ": " + std::string(to_string(row.source)) + " file has D=" +
                                        std::to_string(header.dims));
  if (header.frames < 1) fail(ErrorCode::HeaderMismatch, where + ": T=0");
  if (row.source == Source::Ecapa && header.frames != 1)
    fail(ErrorCode::HeaderMismatch, where + ": ecapa file has T=" + std::to_string(header.frames));
}

/// Parses manifest text. Relative paths resolve against base_dir.
inline DatasetManifest parse_manifest(std::istream& in, const std::filesystem::path& base_dir) {
  DatasetManifest manifest;
  manifest.base_dir = base_dir;
  std::string line;
  if (!std::getline(in, line)) fail(ErrorCode::MissingHeader, "empty manifest");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  detail::strip_line(line);
  if (line != kManifestHeader) fail(ErrorCode::MissingHeader, "expected '" + std::string(kManifestHeader) + "'");

  std::set<std::tuple<std::string, Source, int>> keys;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    detail::strip_line(line);
    if (line.empty()) continue;
    const auto fields = detail::split_csv_line(line);
    if (fields.size() != 6)
      fail(ErrorCode::InvalidArgument, "line " + std::to_string(line_no) + ": expected 6 fields");
    ManifestRow row;
    row.clip_id = fields[0];
    row.podcast_id = fields[1];
    const auto label = try_parse_label(fields[2]);
    if (!label) fail(ErrorCode::UnknownLabel, "line " + std::to_string(line_no) + ": '" + fields[2] + "'");
    row.label = *label;
    row.source = parse_source(fields[3]);
    try {
      std::size_t used = 0;
      row.layer = std::stoi(fields[4], &used);
      if (used != fields[4].size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      fail(ErrorCode::InvalidArgument, "line " + std::to_string(line_no) + ": bad layer '" + fields[4] + "'");
    }
    row.path = fields[5];
    const std::filesystem::path p(row.path);
    row.resolved = p.is_absolute() ? p : base_dir / p;
    if (!keys.emplace(row.clip_id, row.source, row.layer).second)
      fail(ErrorCode::DuplicateKey, "line " + std::to_string(line_no) + ": (" + row.clip_id + ", " +
                                        std::string(to_string(row.source)) + ", " + std::to_string(row.layer) + ")");
    validate_row(row, line_no);
    manifest.rows.push_back(std::move(row));
  }
  return manifest;
}

inline DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::UnresolvablePath, "manifest " + path.string());
  return parse_manifest(in, path.parent_path());
}

inline void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorCode::IoFailure, "cannot write " + path.string());
  out << kManifestHeader << '\n';
  for (const auto& r : manifest.rows)
    out << r.clip_id << ',' << r.podcast_id << ',' << to_string(r.label) << ',' << to_string(r.source) << ','
        << r.layer << ',' << r.path << '\n';
  if (!out) fail(ErrorCode::IoFailure, "short write to " + path.string());
}

/// Full check: loads the manifest, then decodes every payload (finiteness, size).
inline std::size_t validate_manifest(const std::filesystem::path& path) {
  const auto manifest = load_manifest(path);
  for (const auto& row : manifest.rows) (void)read_embedding(row.resolved);
  return manifest.size();
}

}  // namespace stutter
