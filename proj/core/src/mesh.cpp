#include "pbdw/mesh.hpp"

#include "pbdw/io.hpp"

#include <algorithm>
#include <cmath>

namespace pbdw {

double Mesh::h() const {
  const double hx = 1.0 / (nx - 1);
  const double hy = 1.0 / (ny - 1);
  return std::hypot(hx, hy);
}

Mesh build_mesh(int nx, int ny) {
  if (nx < 2 || ny < 2) {
    throw ConfigError("build_mesh: need at least 2 nodes per axis, got " +
                      std::to_string(nx) + "x" + std::to_string(ny));
  }
  Mesh m;
  m.nx = nx;
  m.ny = ny;
  m.nodes.reserve(static_cast<std::size_t>(nx) * ny);
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      m.nodes.push_back({static_cast<double>(i) / (nx - 1),
                         static_cast<double>(j) / (ny - 1)});
    }
  }
  m.elements.reserve(static_cast<std::size_t>(2) * (nx - 1) * (ny - 1));
  for (int j = 0; j < ny - 1; ++j) {
    for (int i = 0; i < nx - 1; ++i) {
      const int v00 = m.node_index(i, j);
      const int v10 = m.node_index(i + 1, j);
      const int v01 = m.node_index(i, j + 1);
      const int v11 = m.node_index(i + 1, j + 1);
      m.elements.push_back({v00, v10, v11});
      m.elements.push_back({v00, v11, v01});
    }
  }
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      if (i == 0 || i == nx - 1 || j == 0 || j == ny - 1) {
        m.boundary_nodes.push_back(m.node_index(i, j));
      }
    }
  }
  m.id = hash_combine(hash_of_string("pbdw-mesh"),
                      static_cast<std::uint64_t>(nx), static_cast<std::uint64_t>(ny));
  return m;
}

double element_area(const Mesh& mesh, int element) {
  const auto& e = mesh.elements[static_cast<std::size_t>(element)];
  const auto& a = mesh.nodes[static_cast<std::size_t>(e[0])];
  const auto& b = mesh.nodes[static_cast<std::size_t>(e[1])];
  const auto& c = mesh.nodes[static_cast<std::size_t>(e[2])];
  return 0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]));
}

Complex evaluate_field_at(const Mesh& mesh, const DiscreteField& field,
                          double x1, double x2) {
  constexpr double slack = 1e-12;
  if (x1 < -slack || x1 > 1.0 + slack || x2 < -slack || x2 > 1.0 + slack) {
    throw ConfigError("evaluate_field: point (" + std::to_string(x1) + ", " +
                      std::to_string(x2) + ") outside [0,1]^2");
  }
  if (field.mesh_id != mesh.id) {
    throw ConfigError("evaluate_field: field/mesh id mismatch");
  }
  x1 = std::clamp(x1, 0.0, 1.0);
  x2 = std::clamp(x2, 0.0, 1.0);
  const int ci = std::min(static_cast<int>(x1 * (mesh.nx - 1)), mesh.nx - 2);
  const int cj = std::min(static_cast<int>(x2 * (mesh.ny - 1)), mesh.ny - 2);
  const double s = x1 * (mesh.nx - 1) - ci;  // local cell coordinates in [0,1]
  const double t = x2 * (mesh.ny - 1) - cj;
  const Complex u00 = field.values[mesh.node_index(ci, cj)];
  const Complex u10 = field.values[mesh.node_index(ci + 1, cj)];
  const Complex u01 = field.values[mesh.node_index(ci, cj + 1)];
  const Complex u11 = field.values[mesh.node_index(ci + 1, cj + 1)];
  if (s >= t) {
    return u00 * (1.0 - s) + u10 * (s - t) + u11 * t;
  }
  return u00 * (1.0 - t) + u11 * s + u01 * (t - s);
}

Vector evaluate_field(const Mesh& mesh, const DiscreteField& field,
                      const std::vector<std::array<double, 2>>& points) {
  Vector out(static_cast<Eigen::Index>(points.size()));
  for (std::size_t k = 0; k < points.size(); ++k) {
    out[static_cast<Eigen::Index>(k)] =
        evaluate_field_at(mesh, field, points[k][0], points[k][1]);
  }
  return out;
}

DiscreteField make_field(const Mesh& mesh, Vector values) {
  if (values.size() != mesh.node_count()) {
    throw ConfigError("make_field: length " + std::to_string(values.size()) +
                      " does not match node count " + std::to_string(mesh.node_count()));
  }
  return DiscreteField{std::move(values), mesh.id};
}

DiscreteField zero_field(const Mesh& mesh) {
  return DiscreteField{Vector::Zero(mesh.node_count()), mesh.id};
}

}  // namespace pbdw
