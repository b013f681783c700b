#pragma once

#include "pbdw/mesh.hpp"
#include "pbdw/sensors.hpp"
#include "pbdw/types.hpp"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace pbdw {

// ---------------------------------------------------------------------------
// Hashing (FNV-1a, 64-bit) — artifact identity for checkpoints and CSV
// provenance lines.
// ---------------------------------------------------------------------------

constexpr std::uint64_t kFnvOffset = 1469598103934665603ull;
constexpr std::uint64_t kFnvPrime = 1099511628211ull;

inline std::uint64_t hash_bytes(const void* data, std::size_t n,
                                std::uint64_t h = kFnvOffset) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= kFnvPrime;
  }
  return h;
}

inline std::uint64_t hash_of_string(const std::string& s) {
  return hash_bytes(s.data(), s.size());
}

inline std::uint64_t hash_combine(std::uint64_t h) { return h; }

template <typename T, typename... Rest>
std::uint64_t hash_combine(std::uint64_t h, const T& value, const Rest&... rest) {
  h = hash_bytes(&value, sizeof(T), h);
  return hash_combine(h, rest...);
}

std::uint64_t hash_vector(const Vector& v, std::uint64_t h = kFnvOffset);
std::uint64_t hash_vector(const RealVector& v, std::uint64_t h = kFnvOffset);

std::string hex_hash(std::uint64_t h);

// ---------------------------------------------------------------------------
// Number formatting. 17 significant digits round-trip IEEE doubles exactly,
// which is what the dump formats promise.
// ---------------------------------------------------------------------------

std::string format_double(double x);

// ---------------------------------------------------------------------------
// Field dump format: header "nx ny node_count" then one "x1 x2 re im" row
// per node in mesh order.
// ---------------------------------------------------------------------------

void write_field(const std::filesystem::path& path, const Mesh& mesh,
                 const DiscreteField& field);

struct FieldFile {
  int nx = 0;
  int ny = 0;
  std::vector<std::array<double, 2>> coordinates;
  Vector values;
};

FieldFile read_field(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// CSV writer: provenance comment line (config hash) + header + rows.
// ---------------------------------------------------------------------------

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, std::uint64_t config_hash,
            const std::vector<std::string>& columns);

  void row(const std::vector<std::string>& cells);
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
  std::size_t n_columns_;
};

std::string csv_cell(double x);
std::string csv_cell(int x);
std::string csv_cell(std::uint64_t x);

// Sensor list CSV: index,x1,x2,r. Measurement CSV: index,re,im.

void write_sensor_csv(const std::filesystem::path& path,
                      const std::vector<Sensor>& sensors, std::uint64_t config_hash);
std::vector<Sensor> read_sensor_csv(const std::filesystem::path& path);

void write_measurement_csv(const std::filesystem::path& path,
                           const Measurement& measurement, std::uint64_t config_hash);

}  // namespace pbdw
