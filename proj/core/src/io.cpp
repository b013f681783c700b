#include "pbdw/io.hpp"

#include <cstdio>
#include <sstream>

namespace pbdw {

std::uint64_t hash_vector(const Vector& v, std::uint64_t h) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double re = v[i].real();
    const double im = v[i].imag();
    h = hash_bytes(&re, sizeof(double), h);
    h = hash_bytes(&im, sizeof(double), h);
  }
  return h;
}

std::uint64_t hash_vector(const RealVector& v, std::uint64_t h) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double x = v[i];
    h = hash_bytes(&x, sizeof(double), h);
  }
  return h;
}

std::string hex_hash(std::uint64_t h) {
  char buf[19];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

void write_field(const std::filesystem::path& path, const Mesh& mesh,
                 const DiscreteField& field) {
  if (field.mesh_id != mesh.id) {
    throw ConfigError("write_field: field/mesh id mismatch");
  }
  std::ofstream out(path);
  if (!out) throw ConfigError("write_field: cannot open " + path.string());
  out << mesh.nx << ' ' << mesh.ny << ' ' << mesh.node_count() << '\n';
  for (int k = 0; k < mesh.node_count(); ++k) {
    out << format_double(mesh.nodes[static_cast<std::size_t>(k)][0]) << ' '
        << format_double(mesh.nodes[static_cast<std::size_t>(k)][1]) << ' '
        << format_double(field.values[k].real()) << ' '
        << format_double(field.values[k].imag()) << '\n';
  }
  if (!out) throw ConfigError("write_field: write failed for " + path.string());
}

FieldFile read_field(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("read_field: cannot open " + path.string());
  FieldFile f;
  int count = 0;
  if (!(in >> f.nx >> f.ny >> count)) {
    throw ConfigError("read_field: malformed header in " + path.string());
  }
  if (count != f.nx * f.ny || count <= 0) {
    throw ConfigError("read_field: inconsistent node count in " + path.string());
  }
  f.coordinates.resize(static_cast<std::size_t>(count));
  f.values.resize(count);
  for (int k = 0; k < count; ++k) {
    double re = 0.0, im = 0.0;
    if (!(in >> f.coordinates[static_cast<std::size_t>(k)][0] >>
          f.coordinates[static_cast<std::size_t>(k)][1] >> re >> im)) {
      throw ConfigError("read_field: truncated row " + std::to_string(k) +
                        " in " + path.string());
    }
    f.values[k] = Complex(re, im);
  }
  return f;
}

CsvWriter::CsvWriter(const std::filesystem::path& path, std::uint64_t config_hash,
                     const std::vector<std::string>& columns)
    : path_(path), out_(path), n_columns_(columns.size()) {
  if (!out_) throw ConfigError("CsvWriter: cannot open " + path.string());
  out_ << "# config_hash=" << hex_hash(config_hash) << '\n';
  for (std::size_t i = 0; i < columns.size(); ++i) {
    out_ << columns[i] << (i + 1 == columns.size() ? '\n' : ',');
  }
}

void CsvWriter::row(const std::vector<std::string>& cells) {
  if (cells.size() != n_columns_) {
    throw ConfigError("CsvWriter: row width " + std::to_string(cells.size()) +
                      " != header width " + std::to_string(n_columns_));
  }
  for (std::size_t i = 0; i < cells.size(); ++i) {
    out_ << cells[i] << (i + 1 == cells.size() ? '\n' : ',');
  }
  if (!out_) throw ConfigError("CsvWriter: write failed for " + path_.string());
}

std::string csv_cell(double x) { return format_double(x); }
std::string csv_cell(int x) { return std::to_string(x); }
std::string csv_cell(std::uint64_t x) { return std::to_string(x); }

void write_sensor_csv(const std::filesystem::path& path,
                      const std::vector<Sensor>& sensors, std::uint64_t config_hash) {
  CsvWriter csv(path, config_hash, {"index", "x1", "x2", "r"});
  for (std::size_t m = 0; m < sensors.size(); ++m) {
    csv.row({csv_cell(static_cast<int>(m)), csv_cell(sensors[m].x1),
             csv_cell(sensors[m].x2), csv_cell(sensors[m].width)});
  }
}

std::vector<Sensor> read_sensor_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("read_sensor_csv: cannot open " + path.string());
  std::vector<Sensor> sensors;
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty() || line.front() == '#') continue;
    if (!header_seen) {  // column header
      header_seen = true;
      continue;
    }
    std::stringstream row(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(row, cell, ',')) cells.push_back(cell);
    if (cells.size() != 4) {
      throw ConfigError("read_sensor_csv: malformed row '" + line + "'");
    }
    Sensor s;
    s.x1 = std::stod(cells[1]);
    s.x2 = std::stod(cells[2]);
    s.width = std::stod(cells[3]);
    s.validate();
    sensors.push_back(s);
  }
  if (sensors.empty()) throw ConfigError("read_sensor_csv: no sensors in " + path.string());
  return sensors;
}

void write_measurement_csv(const std::filesystem::path& path,
                           const Measurement& measurement, std::uint64_t config_hash) {
  CsvWriter csv(path, config_hash, {"index", "re", "im"});
  for (Eigen::Index m = 0; m < measurement.y.size(); ++m) {
    csv.row({csv_cell(static_cast<int>(m)), csv_cell(measurement.y[m].real()),
             csv_cell(measurement.y[m].imag())});
  }
}

}  // namespace pbdw
