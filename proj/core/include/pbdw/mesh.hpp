#pragma once

#include "pbdw/types.hpp"

#include <array>
#include <cstdint>
#include <vector>

namespace pbdw {

/// Structured P1 triangulation of the unit square. Nodes are ordered
/// row-major: node(i, j) = j * nx + i with coordinates (i/(nx-1), j/(ny-1)).
/// Each grid cell is split along the (0,0)-(1,1) diagonal into two
/// counterclockwise triangles.
struct Mesh {
  int nx = 0;
  int ny = 0;
  std::vector<std::array<double, 2>> nodes;
  std::vector<std::array<int, 3>> elements;
  std::vector<int> boundary_nodes;
  std::uint64_t id = 0;

  int node_count() const { return nx * ny; }
  int node_index(int i, int j) const { return j * nx + i; }
  double h() const;  // largest edge length of the grid cells
};

Mesh build_mesh(int nx, int ny);

double element_area(const Mesh& mesh, int element);

/// P1 interpolation of a nodal field at arbitrary points in [0,1]^2.
/// Exact at nodes; throws if a point lies outside the domain.
Vector evaluate_field(const Mesh& mesh, const DiscreteField& field,
                      const std::vector<std::array<double, 2>>& points);

Complex evaluate_field_at(const Mesh& mesh, const DiscreteField& field,
                          double x1, double x2);

DiscreteField make_field(const Mesh& mesh, Vector values);
DiscreteField zero_field(const Mesh& mesh);

}  // namespace pbdw
