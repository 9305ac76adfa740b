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

#include "kdtest/core/io.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <system_error>

#include "kdtest/core/error.hpp"

namespace kdtest {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr char kMagic[4] = {'D', 'F', 'E', '1'};

static_assert(std::endian::native == std::endian::little,
              "binary IO assumes a little-endian host");

}  // namespace

std::string read_all(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string format_double(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

double parse_double(std::string_view s, const std::string& where) {
  // from_chars for double is available in libstdc++ 11.
  double v = 0;
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw InputError(where + ": cannot parse number '" + std::string(s) + "'");
  }
  return v;
}

std::int64_t parse_int(std::string_view s, const std::string& where) {
  std::int64_t v = 0;
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw InputError(where + ": cannot parse integer '" + std::string(s) + "'");
  }
  return v;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

namespace {

std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

json header_json(const Grid& grid, std::size_t members) {
  json j = grid_to_json(grid);
  j["members"] = members;
  return j;
}

struct BinaryPayload {
  json header;
  GridPtr grid;
  std::size_t members = 0;
  std::vector<double> values;
};

BinaryPayload read_binary(const fs::path& path) {
  const std::string bytes = read_all(path);
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw InputError("malformed header in '" + path.string() +
                     "': missing DFE1 magic");
  }
  const auto nl = bytes.find('\n', 4);
  if (nl == std::string::npos) {
    throw InputError("malformed header in '" + path.string() +
                     "': no header terminator");
  }
  BinaryPayload out;
  try {
    out.header = json::parse(bytes.begin() + 4,
                             bytes.begin() + static_cast<std::ptrdiff_t>(nl));
    out.grid = make_grid(grid_from_json(out.header));
    out.members = out.header.at("members").get<std::size_t>();
  } catch (const json::exception& e) {
    throw InputError("malformed header in '" + path.string() + "': " + e.what());
  }
  const std::size_t expected = out.members * out.grid->size();
  const std::size_t payload = bytes.size() - nl - 1;
  if (payload < expected * sizeof(double)) {
    throw InputError("payload truncated in '" + path.string() + "': header declares " +
                     std::to_string(out.members) + " members, payload holds " +
                     std::to_string(payload / sizeof(double) / out.grid->size()));
  }
  if (payload > expected * sizeof(double)) {
    throw InputError("dimension mismatch in '" + path.string() +
                     "': payload longer than the header declares");
  }
  out.values.resize(expected);
  std::memcpy(out.values.data(), bytes.data() + nl + 1, expected * sizeof(double));
  return out;
}

void write_binary(const Grid& grid, std::size_t members,
                  std::span<const double> values, const fs::path& path) {
  std::string out(kMagic, 4);
  out += header_json(grid, members).dump();
  out += '\n';
  const std::size_t at = out.size();
  out.resize(at + values.size() * sizeof(double));
  std::memcpy(out.data() + at, values.data(), values.size() * sizeof(double));
  write_file_atomic(path, out);
}

fs::path sidecar(const fs::path& csv) {
  fs::path p = csv;
  p += ".grid.json";
  return p;
}

Ensemble load_csv(const fs::path& path) {
  GridPtr grid;
  try {
    grid = make_grid(grid_from_json(json::parse(read_all(sidecar(path)))));
  } catch (const json::exception& e) {
    throw InputError("malformed grid descriptor '" + sidecar(path).string() +
                     "': " + e.what());
  }
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line) || strip_cr(line) != "member,point,value") {
    throw InputError("malformed header in '" + path.string() +
                     "': expected 'member,point,value'");
  }
  const std::size_t g = grid->size();
  std::vector<double> values;
  std::vector<char> seen;
  std::size_t members = 0;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    line = strip_cr(line);
    if (line.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(row);
    auto f = split(line, ',');
    if (f.size() != 3) throw InputError(where + ": expected 3 fields");
    const auto mem = parse_int(f[0], where);
    const auto pt = parse_int(f[1], where);
    if (mem < 0 || pt < 0 || static_cast<std::size_t>(pt) >= g) {
      throw InputError(where + ": dimension mismatch, point index out of range");
    }
    const double v = parse_double(f[2], where);
    if (!std::isfinite(v)) {
      throw InputError(where + ": non-finite value at member " + std::to_string(mem) +
                       ", point " + std::to_string(pt));
    }
    if (static_cast<std::size_t>(mem) >= members) {
      members = static_cast<std::size_t>(mem) + 1;
      values.resize(members * g, 0.0);
      seen.resize(members * g, 0);
    }
    const std::size_t k = static_cast<std::size_t>(mem) * g + static_cast<std::size_t>(pt);
    if (seen[k]) throw InputError(where + ": duplicate (member, point)");
    seen[k] = 1;
    values[k] = v;
  }
  for (std::size_t k = 0; k < seen.size(); ++k) {
    if (!seen[k]) {
      throw InputError("dimension mismatch in '" + path.string() + "': member " +
                       std::to_string(k / g) + " lacks point " + std::to_string(k % g));
    }
  }
  return Ensemble(std::move(grid), std::move(values), path.stem().string());
}

void write_csv(const Ensemble& ens, const fs::path& path) {
  write_file_atomic(sidecar(path), grid_to_json(ens.grid()).dump(1) + "\n");
  std::string out = "member,point,value\n";
  out.reserve(ens.values().size() * 24);
  for (std::size_t i = 0; i < ens.members(); ++i) {
    auto m = ens.member(i);
    for (std::size_t p = 0; p < m.size(); ++p) {
      out += std::to_string(i);
      out += ',';
      out += std::to_string(p);
      out += ',';
      out += format_double(m[p]);
      out += '\n';
    }
  }
  write_file_atomic(path, out);
}

}  // namespace

FileFormat parse_file_format(std::string_view text) {
  if (text == "binary") return FileFormat::kBinary;
  if (text == "csv") return FileFormat::kCsv;
  throw InputError("unknown file format '" + std::string(text) + "'");
}

FileFormat format_from_extension(const fs::path& path) {
  return path.extension() == ".csv" ? FileFormat::kCsv : FileFormat::kBinary;
}

json grid_to_json(const Grid& grid) {
  json j;
  j["p"] = grid.dimension();
  j["dims"] = std::vector<std::size_t>(grid.dims().begin(), grid.dims().end());
  j["weight_mode"] = std::string(to_string(grid.weight_mode()));
  j["coords"] = grid.coords();
  if (grid.weight_mode() == WeightMode::kExplicit) {
    j["weights"] = std::vector<double>(grid.weights().begin(), grid.weights().end());
  }
  return j;
}

Grid grid_from_json(const json& j) {
  auto dims = j.at("dims").get<std::vector<std::size_t>>();
  if (j.contains("p") && j.at("p").get<std::size_t>() != dims.size()) {
    throw InputError("grid descriptor: p does not match dims");
  }
  auto coords = j.at("coords").get<std::vector<std::vector<double>>>();
  const auto mode = parse_weight_mode(j.value("weight_mode", std::string("uniform")));
  if (mode == WeightMode::kExplicit) {
    return Grid(std::move(dims), std::move(coords),
                j.at("weights").get<std::vector<double>>());
  }
  return Grid(std::move(dims), std::move(coords), mode);
}

Ensemble load_ensemble(const fs::path& path, FileFormat format) {
  if (format == FileFormat::kCsv) return load_csv(path);
  auto payload = read_binary(path);
  if (payload.members < 2) {
    throw InputError("'" + path.string() + "' holds fewer than 2 members");
  }
  return Ensemble(std::move(payload.grid), std::move(payload.values),
                  path.stem().string());
}

Ensemble load_ensemble(const fs::path& path) {
  return load_ensemble(path, format_from_extension(path));
}

void write_ensemble(const Ensemble& ens, const fs::path& path, FileFormat format) {
  if (format == FileFormat::kCsv) {
    write_csv(ens, path);
  } else {
    write_binary(ens.grid(), ens.members(), ens.values(), path);
  }
}

void write_ensemble(const Ensemble& ens, const fs::path& path) {
  write_ensemble(ens, path, format_from_extension(path));
}

void write_field(const GridField& field, const fs::path& path) {
  if (!field.grid || field.values.size() != field.grid->size()) {
    throw InputError("field: value count does not match grid");
  }
  write_binary(*field.grid, 1, field.values, path);
}

GridField load_field(const fs::path& path) {
  auto payload = read_binary(path);
  if (payload.members != 1) {
    throw InputError("'" + path.string() + "' is not a single-field file");
  }
  return {std::move(payload.grid), std::move(payload.values)};
}

RegionMask load_region_mask(const fs::path& path, GridPtr grid) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line) || strip_cr(line) != "point_index,region_id") {
    throw InputError("malformed header in '" + path.string() +
                     "': expected 'point_index,region_id'");
  }
  std::vector<std::int32_t> ids(grid->size(), 0);
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    line = strip_cr(line);
    if (line.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(row);
    auto f = split(line, ',');
    if (f.size() != 2) throw InputError(where + ": expected 2 fields");
    const auto pt = parse_int(f[0], where);
    const auto id = parse_int(f[1], where);
    if (pt < 0 || static_cast<std::size_t>(pt) >= ids.size()) {
      throw InputError(where + ": point index out of range");
    }
    ids[static_cast<std::size_t>(pt)] = static_cast<std::int32_t>(id);
  }
  return RegionMask(std::move(grid), std::move(ids));
}

void write_region_mask(const RegionMask& mask, const fs::path& path) {
  std::string out = "point_index,region_id\n";
  for (std::size_t i = 0; i < mask.ids().size(); ++i) {
    out += std::to_string(i) + "," + std::to_string(mask.ids()[i]) + "\n";
  }
  write_file_atomic(path, out);
}

void write_file_atomic(const fs::path& path, std::string_view contents) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write '" + tmp.string() + "'");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw InputError("write failed for '" + tmp.string() + "'");
  }
  fs::rename(tmp, path);
}

}  // namespace kdtest
