// Copyright 2026 The wkam Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

/**
 * @file io.hpp
 * @brief Serialization: CSV with 17 significant digits, binary snapshots of
 * value fields, atomic file writes and FNV-1a hashing.
 *
 * Snapshot layout (all integers and floats little-endian):
 *
 *   bytes 0..7   magic "WKAMSNAP"
 *   u32          format version (1)
 *   u32          dimension d
 *   u32          nx
 *   u32          nt
 *   u64          payload count (nx^d * nt)
 *   f64 * count  node values, time-major then space
 */

#pragma once

#include <bit>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "wkam/core.hpp"
#include "wkam/measures.hpp"

namespace wkam {

/// Shortest round-trip-safe decimal form (17 significant digits).
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

/// Writes `content` to a sibling temporary file and renames it over `path`.
inline void atomic_write(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw Error("cannot open " + tmp.string() + " for writing");
    os.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!os) throw Error("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

/// Numeric table with a header row; LF line endings, no quoting.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

  void add(const std::vector<double>& row) {
    if (row.size() != header_.size()) throw Error("csv row width mismatch");
    rows_.push_back(row);
  }
  std::size_t rows() const { return rows_.size(); }

  std::string str() const {
    std::string out;
    for (std::size_t i = 0; i < header_.size(); ++i) out += (i ? "," : "") + header_[i];
    out += '\n';
    for (const auto& r : rows_) {
      for (std::size_t i = 0; i < r.size(); ++i) {
        if (i) out += ',';
        out += format_double(r[i]);
      }
      out += '\n';
    }
    return out;
  }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<double>> rows_;
};

template <int D>
std::vector<std::string> coordinate_header() {
  std::vector<std::string> h;
  for (int i = 0; i < D; ++i) h.push_back("x" + std::to_string(i));
  h.push_back("t");
  return h;
}

/// One row per node: x0[, x1], t, then one column per layer.
template <int D>
CsvTable field_csv(const std::vector<std::pair<std::string, const ValueField<D>*>>& layers) {
  if (layers.empty()) throw Error("field_csv needs at least one layer");
  auto header = coordinate_header<D>();
  for (const auto& [name, f] : layers) header.push_back(name);
  CsvTable t(std::move(header));
  const auto& g = layers.front().second->grid();
  for (int k = 0; k < g.nt; ++k)
    for (int s = 0; s < g.space_nodes(); ++s) {
      std::vector<double> row;
      const Vec<D> x = g.position(s);
      row.insert(row.end(), x.begin(), x.end());
      row.push_back(g.time(k));
      for (const auto& [name, f] : layers) row.push_back(f->at(s, k));
      t.add(row);
    }
  return t;
}

/// Support atoms of a measure: x.., v.., t, weight.
template <int D>
CsvTable measure_csv(const DiscreteMeasure<D>& mu, double floor = 1e-12) {
  std::vector<std::string> header;
  for (int i = 0; i < D; ++i) header.push_back("x" + std::to_string(i));
  for (int i = 0; i < D; ++i) header.push_back("v" + std::to_string(i));
  header.push_back("t");
  header.push_back("weight");
  CsvTable t(std::move(header));
  const auto& g = mu.grid();
  for (int idx : mu.support(floor)) {
    std::vector<double> row;
    const Vec<D> x = g.position(mu.space_of(idx));
    const Vec<D> v = g.velocity(mu.velocity_of(idx));
    row.insert(row.end(), x.begin(), x.end());
    row.insert(row.end(), v.begin(), v.end());
    row.push_back(g.time(mu.slice_of(idx)));
    row.push_back(mu[static_cast<std::size_t>(idx)]);
    t.add(row);
  }
  return t;
}

// ---------------------------------------------------------------------------
// Binary snapshots
// ---------------------------------------------------------------------------

inline constexpr char kSnapshotMagic[8] = {'W', 'K', 'A', 'M', 'S', 'N', 'A', 'P'};
inline constexpr std::uint32_t kSnapshotVersion = 1;

namespace detail {
template <class U>
void put_le(std::string& out, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
template <class U>
U get_le(std::istream& is) {
  unsigned char b[sizeof(U)];
  if (!is.read(reinterpret_cast<char*>(b), sizeof(U))) throw Error("snapshot truncated");
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(b[i]) << (8 * i);
  return v;
}
}  // namespace detail

template <int D>
std::string snapshot_bytes(const ValueField<D>& f) {
  const auto& g = f.grid();
  std::string out(kSnapshotMagic, sizeof kSnapshotMagic);
  detail::put_le<std::uint32_t>(out, kSnapshotVersion);
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(D));
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(g.nx));
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(g.nt));
  detail::put_le<std::uint64_t>(out, static_cast<std::uint64_t>(g.nodes()));
  for (double v : f.data()) detail::put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  return out;
}

/// Reads a snapshot; nv and v_max of `like` are kept (they are not stored).
template <int D>
ValueField<D> read_snapshot(std::istream& is, SpaceTimeGrid<D> like = {}) {
  char magic[8];
  if (!is.read(magic, 8) || !std::equal(magic, magic + 8, kSnapshotMagic))
    throw Error("not a wkam snapshot (bad magic)");
  if (detail::get_le<std::uint32_t>(is) != kSnapshotVersion) throw Error("unsupported snapshot version");
  if (detail::get_le<std::uint32_t>(is) != static_cast<std::uint32_t>(D))
    throw Error("snapshot dimension mismatch");
  like.nx = static_cast<int>(detail::get_le<std::uint32_t>(is));
  like.nt = static_cast<int>(detail::get_le<std::uint32_t>(is));
  const auto count = detail::get_le<std::uint64_t>(is);
  if (count != static_cast<std::uint64_t>(like.nodes())) throw Error("snapshot payload size mismatch");
  ValueField<D> f(like);
  for (auto& v : f.data()) v = std::bit_cast<double>(detail::get_le<std::uint64_t>(is));
  return f;
}

}  // namespace wkam
