#pragma once

#include "pbdw/inner_product.hpp"
#include "pbdw/mesh.hpp"
#include "pbdw/types.hpp"

#include <functional>
#include <optional>
#include <string>

namespace pbdw {

enum class BoundaryCondition { DirichletPerfect, NeumannBiased };
enum class SourceBias { PerfectG, BiasedZeroG };

using ScalarField2D = std::function<Complex(double, double)>;

/// Configuration of one dissipative Helmholtz solve
///   -(1 + eps*mu*i) Lap(u) - mu^2 u = mu * q,   q = sin(mu x1) sin(mu x2) + g.
/// `forcing_override` replaces q entirely (keeping the mu factor on the
/// right-hand side); `rhs_override` replaces the whole right-hand side
/// integrand (used for manufactured solutions).
struct HelmholtzConfig {
  double mu = 6.0;
  double epsilon = 0.01;
  BoundaryCondition bc = BoundaryCondition::DirichletPerfect;
  SourceBias source = SourceBias::PerfectG;
  ScalarField2D forcing_override;
  ScalarField2D rhs_override;

  void validate() const;
};

/// sin(mu x1) sin(mu x2), the modeled part of the source.
double sinusoidal_source(double x1, double x2, double mu);

/// -0.5 sin(e^{-3 x1} sin(5 mu x2)), the source term the biased model omits.
double modulated_source_bias(double x1, double x2, double mu);

/// Full source q for a config (base + bias or override), without the mu factor.
Complex source_value(const HelmholtzConfig& cfg, double x1, double x2);

/// Assembles the stiffness and mass matrices once; each solve builds the
/// complex Galerkin system for its config. Immutable after construction and
/// safe to share across threads.
class HelmholtzSolver {
 public:
  explicit HelmholtzSolver(const Mesh& mesh);

  DiscreteField solve(const HelmholtzConfig& cfg) const;

  const Mesh& mesh() const { return *mesh_; }

 private:
  const Mesh* mesh_;
  SparseReal stiffness_;
  SparseReal mass_;
};

DiscreteField solve_helmholtz(const Mesh& mesh, const HelmholtzConfig& cfg);

}  // namespace pbdw
