#include "pbdw/helmholtz.hpp"

#include <Eigen/SparseLU>

#include <cmath>
#include <vector>

namespace pbdw {

void HelmholtzConfig::validate() const {
  if (!(mu > 0.0)) throw ConfigError("HelmholtzConfig: mu must be positive");
  if (epsilon < 0.0) throw ConfigError("HelmholtzConfig: epsilon must be nonnegative");
}

double sinusoidal_source(double x1, double x2, double mu) {
  return std::sin(mu * x1) * std::sin(mu * x2);
}

double modulated_source_bias(double x1, double x2, double mu) {
  return -0.5 * std::sin(std::exp(-3.0 * x1) * std::sin(5.0 * mu * x2));
}

Complex source_value(const HelmholtzConfig& cfg, double x1, double x2) {
  if (cfg.forcing_override) return cfg.forcing_override(x1, x2);
  double q = sinusoidal_source(x1, x2, cfg.mu);
  if (cfg.source == SourceBias::PerfectG) {
    q += modulated_source_bias(x1, x2, cfg.mu);
  }
  return Complex(q, 0.0);
}

HelmholtzSolver::HelmholtzSolver(const Mesh& mesh)
    : mesh_(&mesh), stiffness_(assemble_stiffness(mesh)), mass_(assemble_mass(mesh)) {}

DiscreteField HelmholtzSolver::solve(const HelmholtzConfig& cfg) const {
  cfg.validate();
  const Mesh& mesh = *mesh_;
  const int n = mesh.node_count();
  const Complex coeff(1.0, cfg.epsilon * cfg.mu);

  SparseComplex system = (coeff * stiffness_.cast<Complex>() -
                          cfg.mu * cfg.mu * mass_.cast<Complex>())
                             .eval();

  // Right-hand side by per-element edge-midpoint quadrature (degree 2).
  Vector rhs = Vector::Zero(n);
  const auto integrand = [&](double x1, double x2) -> Complex {
    if (cfg.rhs_override) return cfg.rhs_override(x1, x2);
    return cfg.mu * source_value(cfg, x1, x2);
  };
  for (std::size_t el = 0; el < mesh.elements.size(); ++el) {
    const auto& e = mesh.elements[el];
    const auto& a = mesh.nodes[static_cast<std::size_t>(e[0])];
    const auto& b = mesh.nodes[static_cast<std::size_t>(e[1])];
    const auto& c = mesh.nodes[static_cast<std::size_t>(e[2])];
    const double area = element_area(mesh, static_cast<int>(el));
    const double mid[3][2] = {{0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])},
                              {0.5 * (b[0] + c[0]), 0.5 * (b[1] + c[1])},
                              {0.5 * (c[0] + a[0]), 0.5 * (c[1] + a[1])}};
    const Complex f01 = integrand(mid[0][0], mid[0][1]);
    const Complex f12 = integrand(mid[1][0], mid[1][1]);
    const Complex f20 = integrand(mid[2][0], mid[2][1]);
    // Basis function k is 1/2 on the two edges adjacent to vertex k.
    rhs[e[0]] += area / 3.0 * 0.5 * (f01 + f20);
    rhs[e[1]] += area / 3.0 * 0.5 * (f01 + f12);
    rhs[e[2]] += area / 3.0 * 0.5 * (f12 + f20);
  }

  if (cfg.bc == BoundaryCondition::DirichletPerfect) {
    // Symmetric elimination: zero constrained rows and columns, unit diagonal.
    std::vector<bool> constrained(static_cast<std::size_t>(n), false);
    for (int idx : mesh.boundary_nodes) constrained[static_cast<std::size_t>(idx)] = true;
    for (int k = 0; k < system.outerSize(); ++k) {
      for (SparseComplex::InnerIterator it(system, k); it; ++it) {
        const bool r = constrained[static_cast<std::size_t>(it.row())];
        const bool c = constrained[static_cast<std::size_t>(it.col())];
        if (r || c) {
          it.valueRef() = (it.row() == it.col()) ? Complex(1.0, 0.0) : Complex(0.0, 0.0);
        }
      }
    }
    for (int idx : mesh.boundary_nodes) rhs[idx] = Complex(0.0, 0.0);
    system.prune([](Eigen::Index, Eigen::Index, const Complex& v) {
      return v != Complex(0.0, 0.0);
    });
  }
  system.makeCompressed();

  Eigen::SparseLU<SparseComplex> lu;
  lu.analyzePattern(system);
  lu.factorize(system);
  if (lu.info() != Eigen::Success) {
    throw NumericalError("helmholtz solve: factorization failed (mu=" +
                         std::to_string(cfg.mu) + "), system singular");
  }
  Vector u = lu.solve(rhs);

  const double rhs_norm = rhs.norm();
  const double residual = (system * u - rhs).norm();
  if (rhs_norm > 0.0 && !(residual <= 1e-10 * rhs_norm)) {
    // Cheap condition estimate from the computed solution.
    const double cond_est =
        system.coeffs().cwiseAbs().sum() / n * u.norm() / std::max(rhs_norm, 1e-300);
    throw NumericalError(
        "helmholtz solve: near-resonant system at mu=" + std::to_string(cfg.mu) +
        " (relative residual " + std::to_string(residual / rhs_norm) +
        ", condition estimate ~" + std::to_string(cond_est) + ")");
  }
  if (!all_finite(u)) {
    throw NumericalError("helmholtz solve: non-finite solution at mu=" +
                         std::to_string(cfg.mu));
  }
  return DiscreteField{std::move(u), mesh.id};
}

DiscreteField solve_helmholtz(const Mesh& mesh, const HelmholtzConfig& cfg) {
  return HelmholtzSolver(mesh).solve(cfg);
}

}  // namespace pbdw
