#include "pbdw/inner_product.hpp"

#include "pbdw/io.hpp"

#include <array>
#include <vector>

namespace pbdw {

namespace {

struct ElementGeometry {
  double area;
  // Gradients of the three barycentric basis functions.
  std::array<std::array<double, 2>, 3> grad;
};

ElementGeometry element_geometry(const Mesh& mesh, int element) {
  const auto& e = mesh.elements[static_cast<std::size_t>(element)];
  const auto& a = mesh.nodes[static_cast<std::size_t>(e[0])];
  const auto& b = mesh.nodes[static_cast<std::size_t>(e[1])];
  const auto& c = mesh.nodes[static_cast<std::size_t>(e[2])];
  ElementGeometry g{};
  g.area = 0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]));
  const double inv = 1.0 / (2.0 * g.area);
  g.grad[0] = {(b[1] - c[1]) * inv, (c[0] - b[0]) * inv};
  g.grad[1] = {(c[1] - a[1]) * inv, (a[0] - c[0]) * inv};
  g.grad[2] = {(a[1] - b[1]) * inv, (b[0] - a[0]) * inv};
  return g;
}

}  // namespace

SparseReal assemble_stiffness(const Mesh& mesh) {
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(mesh.elements.size() * 9);
  for (std::size_t el = 0; el < mesh.elements.size(); ++el) {
    const auto g = element_geometry(mesh, static_cast<int>(el));
    const auto& e = mesh.elements[el];
    for (int k = 0; k < 3; ++k) {
      for (int l = 0; l < 3; ++l) {
        const double v = g.area * (g.grad[k][0] * g.grad[l][0] +
                                   g.grad[k][1] * g.grad[l][1]);
        triplets.emplace_back(e[k], e[l], v);
      }
    }
  }
  SparseReal s(mesh.node_count(), mesh.node_count());
  s.setFromTriplets(triplets.begin(), triplets.end());
  return s;
}

SparseReal assemble_mass(const Mesh& mesh) {
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(mesh.elements.size() * 9);
  for (std::size_t el = 0; el < mesh.elements.size(); ++el) {
    const double area = element_area(mesh, static_cast<int>(el));
    const auto& e = mesh.elements[el];
    for (int k = 0; k < 3; ++k) {
      for (int l = 0; l < 3; ++l) {
        triplets.emplace_back(e[k], e[l], area / 12.0 * (k == l ? 2.0 : 1.0));
      }
    }
  }
  SparseReal m(mesh.node_count(), mesh.node_count());
  m.setFromTriplets(triplets.begin(), triplets.end());
  return m;
}

InnerProduct::InnerProduct(const Mesh& mesh, InnerProductKind kind, SparseReal gram)
    : kind_(kind), gram_(std::move(gram)), mesh_id_(mesh.id) {
  id_ = hash_combine(hash_of_string("pbdw-inner-product"), mesh.id,
                     static_cast<int>(kind));
  auto fact = std::make_shared<Eigen::SimplicialLDLT<SparseReal>>();
  fact->compute(gram_);
  if (fact->info() != Eigen::Success) {
    throw NumericalError("inner product Gram factorization failed");
  }
  factorization_ = std::move(fact);
}

Vector InnerProduct::apply(const Vector& u) const {
  Vector out(u.size());
  out.real() = gram_ * u.real().eval();
  out.imag() = gram_ * u.imag().eval();
  return out;
}

Complex InnerProduct::dot(const Vector& u, const Vector& v) const {
  return v.dot(apply(u));  // Eigen's dot conjugates the left factor
}

double InnerProduct::norm(const Vector& u) const {
  const double n2 = dot(u, u).real();
  return n2 > 0.0 ? std::sqrt(n2) : 0.0;
}

RealVector InnerProduct::solve(const RealVector& f) const {
  return factorization_->solve(f);
}

Vector InnerProduct::solve(const Vector& f) const {
  Vector out(f.size());
  out.real() = factorization_->solve(f.real().eval()).eval();
  out.imag() = factorization_->solve(f.imag().eval()).eval();
  return out;
}

InnerProduct assemble_inner_product(const Mesh& mesh, InnerProductKind kind) {
  SparseReal gram = assemble_mass(mesh);
  if (kind == InnerProductKind::H1) {
    gram += assemble_stiffness(mesh);
  }
  gram.makeCompressed();
  return InnerProduct(mesh, kind, std::move(gram));
}

}  // namespace pbdw
