#pragma once

#include "pbdw/inner_product.hpp"
#include "pbdw/reduced_basis.hpp"
#include "pbdw/sensors.hpp"
#include "pbdw/types.hpp"

#include <vector>

namespace pbdw {

/// Background/update coefficient pair from one assimilation solve.
/// With xi = 0 this is the classical statement; xi > 0 adds Tikhonov
/// damping of the update while the orthogonality constraint stays exact.
struct PbdwCoefficients {
  Vector z;             // background coefficients, length N
  Vector eta;           // update coefficients, length M
  double xi = 0.0;
  double orthogonality_residual = 0.0;  // |B^H eta| / max(|eta|, tiny)
  double observation_residual = 0.0;    // |A eta + B z - y| / max(|y|, tiny)
};

struct PbdwSolution {
  PbdwCoefficients coefficients;
  DiscreteField reconstructed;
  DiscreteField background;  // sum z_n zeta_n alone
  DiscreteField update;      // sum eta_m q_m alone
};

/// Monolithic saddle solve of
///   [xi*M*I + A  B; B^H  0] [eta; z] = [y; 0].
PbdwCoefficients solve_saddle(const Matrix& A, const Matrix& B, const Vector& y,
                              double xi);

/// Same solution via the two-step decomposition: N-dimensional weighted
/// least squares for z, then eta = W_xi (y - B z).
PbdwCoefficients solve_two_step(const Matrix& A, const Matrix& B, const Vector& y,
                                double xi);

/// Background stage of the two-step decomposition alone (shared with the
/// operator-predicted update path).
Vector solve_background(const Matrix& A, const Matrix& B, const Vector& y,
                        double xi);

/// Fills orthogonality and observation residual diagnostics for a
/// coefficient pair, whatever produced it.
void fill_pbdw_diagnostics(PbdwCoefficients& coefficients, const Matrix& A,
                           const Matrix& B, const Vector& y);

/// Assemble the nodal fields for a coefficient pair.
PbdwSolution assemble_solution(const BackgroundBasis& basis, const SensorSet& set,
                               PbdwCoefficients coefficients);

PbdwSolution solve_pbdw(const BackgroundBasis& basis, const SensorSet& set,
                        const Measurement& measurement, double xi);

struct StabilityReport {
  double beta = 0.0;
  int n = 0;
  int m = 0;
  Vector least_stable_mode;  // coefficients in the basis, length N
  bool necessarily_unstable = false;  // N > M
};

/// Inf-sup constant between the background span and the update span,
/// beta^2 = lambda_min(B^H A^{-1} B) for an orthonormal basis.
StabilityReport inf_sup(const Matrix& B, const Matrix& A);

struct ErrorBoundReport {
  double lhs = 0.0;
  double rhs = 0.0;
  double beta = 0.0;
  bool satisfied = false;
};

/// A-priori recovery bound for the noise-free, unregularized statement:
///   |u_true - u_NM| <= (1 + 1/beta) inf_{q in U_M ∩ Z_N^perp} |P_perp u_true - q|.
/// Refuses regularized or noisy inputs, where the bound is not claimed.
ErrorBoundReport error_bound_check(const PbdwSolution& solution,
                                   const DiscreteField& u_true,
                                   const BackgroundBasis& basis,
                                   const SensorSet& set, const InnerProduct& ip,
                                   const Measurement& measurement);

/// Generalized cross-validation over a grid of positive weights:
/// minimizes |(I - H(xi)) y|^2 / trace(I - H(xi))^2 where H maps data to
/// predicted observations. Ties break toward the larger weight.
double gcv_select(const Matrix& A, const Matrix& B, const Vector& y,
                  const std::vector<double>& xi_grid);

struct Metrics {
  double e_exact = 0.0;   // squared L2 recovery error
  double e_estim = 0.0;   // squared L2 background-estimate error
  double eta_norm = 0.0;  // L2 norm of the update field
  double e_svd = 0.0;     // L2 norm of the basis projection residual of u_true
  double rel_error = 0.0; // relative (unsquared) L2 recovery error
};

Metrics compute_metrics(const PbdwSolution& solution, const DiscreteField& u_true,
                        const BackgroundBasis& basis, const InnerProduct& h1,
                        const InnerProduct& l2);

}  // namespace pbdw
