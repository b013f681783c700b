#pragma once

#include "pbdw/helmholtz.hpp"
#include "pbdw/inner_product.hpp"
#include "pbdw/sensors.hpp"
#include "pbdw/types.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace pbdw {

/// Best-knowledge solutions over the parameter training grid.
struct SnapshotSet {
  std::vector<double> parameters;
  std::vector<DiscreteField> snapshots;
  HelmholtzConfig config;
};

SnapshotSet generate_snapshots(const Mesh& mesh, const std::vector<double>& grid,
                               const HelmholtzConfig& cfg, int threads = 0);

/// POD basis: modes orthonormal in the inner product used to build them,
/// singular values nonincreasing. The coupling matrix B with
/// B(m, n) = l_m(zeta_n) is filled by bind_sensors.
struct BackgroundBasis {
  std::vector<DiscreteField> modes;
  RealVector singular_values;   // all retained values, one per mode
  RealVector spectrum;          // full snapshot spectrum (for energy reports)
  Matrix B;                     // M x N, empty until a sensor set is bound
  std::uint64_t gram_id = 0;
  std::uint64_t mesh_id = 0;

  int size() const { return static_cast<int>(modes.size()); }
  std::uint64_t hash() const;
};

/// Method-of-snapshots POD in the given inner product. Requests beyond the
/// numerical rank are truncated (with a warning pushed to `warnings`).
BackgroundBasis pod(const SnapshotSet& snapshots, const InnerProduct& ip, int n,
                    std::vector<std::string>* warnings = nullptr);

BackgroundBasis bind_sensors(BackgroundBasis basis, const SensorSet& set);

/// Leading-n sub-basis (modes, singular values, and bound coupling columns).
BackgroundBasis basis_prefix(const BackgroundBasis& basis, int n);

/// Distance from the field to its best approximation in the basis span,
/// measured in the basis's inner-product norm.
double projection_error(const BackgroundBasis& basis, const InnerProduct& ip,
                        const DiscreteField& field);

/// Coefficients of the inner-product-orthogonal projection onto the basis.
Vector project_coefficients(const BackgroundBasis& basis, const InnerProduct& ip,
                            const DiscreteField& field);

/// Relative energy captured by the leading n singular values:
/// sqrt(sum_{k>n} sigma_k^2 / sum_k sigma_k^2).
double manifold_energy_residual(const BackgroundBasis& basis, int n);

/// Versioned text checkpoint; round-trips bit-exactly.
void save_basis(const std::filesystem::path& path, const BackgroundBasis& basis,
                InnerProductKind kind);

struct BasisFile {
  BackgroundBasis basis;
  InnerProductKind kind = InnerProductKind::H1;
};

BasisFile load_basis(const std::filesystem::path& path);

}  // namespace pbdw
