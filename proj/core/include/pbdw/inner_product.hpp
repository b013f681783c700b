#pragma once

#include "pbdw/mesh.hpp"
#include "pbdw/types.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <memory>

namespace pbdw {

using SparseReal = Eigen::SparseMatrix<double>;
using SparseComplex = Eigen::SparseMatrix<Complex>;

SparseReal assemble_stiffness(const Mesh& mesh);
SparseReal assemble_mass(const Mesh& mesh);

enum class InnerProductKind { H1, L2 };

/// Hilbert-space inner product on nodal fields, encoded by its (real,
/// symmetric positive definite) Gram matrix. The convention is
/// (u, v) = v^H G u: linear in the first argument, conjugate in the second.
class InnerProduct {
 public:
  InnerProduct(const Mesh& mesh, InnerProductKind kind, SparseReal gram);

  InnerProductKind kind() const { return kind_; }
  const SparseReal& gram() const { return gram_; }
  std::uint64_t id() const { return id_; }
  std::uint64_t mesh_id() const { return mesh_id_; }

  Vector apply(const Vector& u) const;  // G u
  Complex dot(const Vector& u, const Vector& v) const;
  double norm(const Vector& u) const;
  Complex dot(const DiscreteField& u, const DiscreteField& v) const {
    return dot(u.values, v.values);
  }
  double norm(const DiscreteField& u) const { return norm(u.values); }

  /// Solve G x = f. Used for Riesz representers and projections.
  RealVector solve(const RealVector& f) const;
  Vector solve(const Vector& f) const;

 private:
  InnerProductKind kind_;
  SparseReal gram_;
  std::uint64_t id_ = 0;
  std::uint64_t mesh_id_ = 0;
  std::shared_ptr<const Eigen::SimplicialLDLT<SparseReal>> factorization_;
};

InnerProduct assemble_inner_product(const Mesh& mesh, InnerProductKind kind);

}  // namespace pbdw
