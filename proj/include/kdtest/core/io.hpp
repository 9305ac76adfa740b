// Copyright 2026 The kdtest Authors.
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

// Ensemble file formats.
//
// Binary ("DFE1"):
//   bytes 0..3   ASCII "DFE1"
//   then         one UTF-8 JSON object terminated by '\n':
//                {"p":2,"dims":[nx,ny],"members":M,"weight_mode":"uniform",
//                 "coords":[[...],[...]]}
//                "weights":[...] is present only when weight_mode is
//                "explicit".
//   then         M * prod(dims) little-endian IEEE-754 float64 values,
//                member-major, points row-major (last axis fastest).
//
// CSV:
//   header "member,point,value", then one row per value with zero-based
//   member and flat point indices. The grid lives in a sidecar file
//   "<csv path>.grid.json" holding the same JSON object as the binary
//   header (the "members" key is ignored on read).
//
// Region mask CSV: header "point_index,region_id", one row per point.

#pragma once

#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <string>
#include <string_view>
#include <vector>

#include "kdtest/core/ensemble.hpp"
#include "kdtest/core/region.hpp"

namespace kdtest {

enum class FileFormat { kBinary, kCsv };

FileFormat parse_file_format(std::string_view text);
/// ".csv" selects CSV, anything else binary.
FileFormat format_from_extension(const std::filesystem::path& path);

nlohmann::json grid_to_json(const Grid& grid);
Grid grid_from_json(const nlohmann::json& j);

Ensemble load_ensemble(const std::filesystem::path& path, FileFormat format);
Ensemble load_ensemble(const std::filesystem::path& path);
void write_ensemble(const Ensemble& ens, const std::filesystem::path& path,
                    FileFormat format);
void write_ensemble(const Ensemble& ens, const std::filesystem::path& path);

/// A single field on a grid, stored in the binary layout with one member.
/// Unlike ensembles, NaN marks an undefined point.
struct GridField {
  GridPtr grid;
  std::vector<double> values;
};
void write_field(const GridField& field, const std::filesystem::path& path);
GridField load_field(const std::filesystem::path& path);

RegionMask load_region_mask(const std::filesystem::path& path, GridPtr grid);
void write_region_mask(const RegionMask& mask,
                       const std::filesystem::path& path);

/// Whole file as bytes; InputError if unreadable.
std::string read_all(const std::filesystem::path& path);
/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);
/// Whole-field numeric parsing with surrounding blanks allowed; `where`
/// prefixes the error message.
double parse_double(std::string_view s, const std::string& where);
std::int64_t parse_int(std::string_view s, const std::string& where);
std::vector<std::string_view> split(std::string_view line, char sep);

/// Writes `contents` to a sibling temporary file and renames it into
/// place, so readers never observe a partial file.
void write_file_atomic(const std::filesystem::path& path,
                       std::string_view contents);

}  // namespace kdtest
