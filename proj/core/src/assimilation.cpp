#include "pbdw/assimilation.hpp"

#include "pbdw/instrument.hpp"

#include <Eigen/Cholesky>
#include <Eigen/LU>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>

namespace pbdw {

namespace {

constexpr double kTiny = 1e-300;

void check_system(const Matrix& A, const Matrix& B, const Vector& y, double xi) {
  const Eigen::Index m = A.rows();
  if (A.cols() != m) throw ConfigError("assimilation: A must be square");
  if (B.rows() != m) throw ConfigError("assimilation: B row count must match A");
  if (y.size() != m) throw ConfigError("assimilation: y length must match A");
  if (B.cols() > m) {
    throw ConfigError("assimilation: more background modes than observations (N > M)");
  }
  if (xi < 0.0) throw ConfigError("assimilation: negative regularization weight");
  if (B.cols() > 0) {
    Eigen::JacobiSVD<Matrix> svd(B);
    const auto& sv = svd.singularValues();
    const double tol = sv[0] * 1e-12;
    Eigen::Index deficient = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i) {
      if (sv[i] <= tol) ++deficient;
    }
    if (deficient > 0) {
      throw NumericalError("assimilation: unobservable background, " +
                           std::to_string(deficient) +
                           " coupling column(s) rank-deficient");
    }
  }
}

/// Cholesky factor of (xi*M*I + A), the update-space weight.
class UpdateWeight {
 public:
  UpdateWeight(const Matrix& A, double xi) : xi_tilde_(xi * A.rows()) {
    Matrix w = A;
    w.diagonal().array() += xi_tilde_;
    llt_.compute(w);
    if (llt_.info() != Eigen::Success) {
      throw NumericalError("assimilation: update weight not positive definite");
    }
    instrument::record_factorization(static_cast<int>(A.rows()), "update_weight");
  }

  double xi_tilde() const { return xi_tilde_; }
  Vector solve(const Vector& rhs) const { return llt_.solve(rhs); }
  Matrix solve(const Matrix& rhs) const { return llt_.solve(rhs); }

 private:
  double xi_tilde_ = 0.0;
  Eigen::LLT<Matrix> llt_;
};

Vector background_stage(const UpdateWeight& weight, const Matrix& B, const Vector& y) {
  if (B.cols() == 0) return Vector(0);
  const Matrix wb = weight.solve(B);
  const Matrix normal = B.adjoint() * wb;
  const Vector rhs = B.adjoint() * weight.solve(y);
  Eigen::PartialPivLU<Matrix> lu(normal);
  instrument::record_factorization(static_cast<int>(B.cols()), "background_normal");
  const Vector z = lu.solve(rhs);
  if (!all_finite(z)) {
    throw NumericalError("assimilation: background stage produced non-finite z");
  }
  return z;
}

/// With as many modes as observations the constraint's null space is
/// trivial: the update vanishes identically and the background interpolates
/// the data. Solving the block system numerically would only produce
/// round-off noise for eta.
bool square_coupling_shortcut(const Matrix& B, const Vector& y, PbdwCoefficients& c) {
  if (B.cols() == 0 || B.cols() != B.rows()) return false;
  c.eta = Vector::Zero(B.rows());
  c.z = Eigen::PartialPivLU<Matrix>(B).solve(y);
  instrument::record_factorization(static_cast<int>(B.cols()), "square_coupling");
  if (!all_finite(c.z)) {
    throw NumericalError("assimilation: singular square coupling matrix");
  }
  return true;
}

}  // namespace

void fill_pbdw_diagnostics(PbdwCoefficients& c, const Matrix& A, const Matrix& B,
                           const Vector& y) {
  const double eta_norm = c.eta.norm();
  c.orthogonality_residual =
      B.cols() > 0 ? (B.adjoint() * c.eta).norm() / std::max(eta_norm, kTiny) : 0.0;
  const Vector residual = A * c.eta + B * c.z - y + c.xi * A.rows() * c.eta;
  c.observation_residual = residual.norm() / std::max(y.norm(), kTiny);
}

PbdwCoefficients solve_saddle(const Matrix& A, const Matrix& B, const Vector& y,
                              double xi) {
  check_system(A, B, y, xi);
  {
    PbdwCoefficients c;
    c.xi = xi;
    if (square_coupling_shortcut(B, y, c)) {
      fill_pbdw_diagnostics(c, A, B, y);
      return c;
    }
  }
  const Eigen::Index m = A.rows();
  const Eigen::Index n = B.cols();
  Matrix system = Matrix::Zero(m + n, m + n);
  system.topLeftCorner(m, m) = A;
  system.topLeftCorner(m, m).diagonal().array() += xi * static_cast<double>(m);
  system.topRightCorner(m, n) = B;
  system.bottomLeftCorner(n, m) = B.adjoint();
  Vector rhs = Vector::Zero(m + n);
  rhs.head(m) = y;

  Eigen::PartialPivLU<Matrix> lu(system);
  instrument::record_factorization(static_cast<int>(m + n), "saddle");
  const Vector solution = lu.solve(rhs);
  if (!all_finite(solution)) {
    throw NumericalError("solve_saddle: singular block system");
  }

  PbdwCoefficients c;
  c.eta = solution.head(m);
  c.z = solution.tail(n);
  c.xi = xi;
  fill_pbdw_diagnostics(c, A, B, y);
  return c;
}

PbdwCoefficients solve_two_step(const Matrix& A, const Matrix& B, const Vector& y,
                                double xi) {
  check_system(A, B, y, xi);
  {
    PbdwCoefficients c;
    c.xi = xi;
    if (square_coupling_shortcut(B, y, c)) {
      fill_pbdw_diagnostics(c, A, B, y);
      return c;
    }
  }
  const UpdateWeight weight(A, xi);
  PbdwCoefficients c;
  c.z = background_stage(weight, B, y);
  c.eta = weight.solve((y - B * c.z).eval());
  c.xi = xi;
  if (!all_finite(c.eta)) {
    throw NumericalError("solve_two_step: non-finite update coefficients");
  }
  fill_pbdw_diagnostics(c, A, B, y);
  return c;
}

Vector solve_background(const Matrix& A, const Matrix& B, const Vector& y,
                        double xi) {
  check_system(A, B, y, xi);
  {
    PbdwCoefficients c;
    if (square_coupling_shortcut(B, y, c)) return c.z;
  }
  const UpdateWeight weight(A, xi);
  return background_stage(weight, B, y);
}

PbdwSolution assemble_solution(const BackgroundBasis& basis, const SensorSet& set,
                               PbdwCoefficients coefficients) {
  if (coefficients.z.size() != basis.size()) {
    throw ConfigError("assemble_solution: z length does not match basis size");
  }
  if (coefficients.eta.size() != set.size()) {
    throw ConfigError("assemble_solution: eta length does not match sensor count");
  }
  const Eigen::Index nodes =
      set.representers.empty() ? 0 : set.representers.front().size();
  Vector background = Vector::Zero(nodes);
  for (int j = 0; j < basis.size(); ++j) {
    background += coefficients.z[j] * basis.modes[static_cast<std::size_t>(j)].values;
  }
  Vector update = Vector::Zero(nodes);
  for (int m = 0; m < set.size(); ++m) {
    update += coefficients.eta[m] * set.representers[static_cast<std::size_t>(m)].values;
  }
  PbdwSolution solution;
  solution.background = DiscreteField{background, set.mesh_id};
  solution.update = DiscreteField{update, set.mesh_id};
  solution.reconstructed = DiscreteField{background + update, set.mesh_id};
  solution.coefficients = std::move(coefficients);
  return solution;
}

PbdwSolution solve_pbdw(const BackgroundBasis& basis, const SensorSet& set,
                        const Measurement& measurement, double xi) {
  if (basis.B.rows() != set.size()) {
    throw ConfigError("solve_pbdw: basis has no coupling matrix for this sensor set");
  }
  return assemble_solution(basis, set,
                           solve_saddle(set.A, basis.B, measurement.y, xi));
}

StabilityReport inf_sup(const Matrix& B, const Matrix& A) {
  StabilityReport report;
  report.m = static_cast<int>(A.rows());
  report.n = static_cast<int>(B.cols());
  if (report.n == 0) {
    report.beta = 1.0;
    return report;
  }
  if (report.n > report.m) {
    report.beta = 0.0;
    report.necessarily_unstable = true;
    report.least_stable_mode = Vector::Zero(report.n);
    return report;
  }
  Eigen::LLT<Matrix> llt(A);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("inf_sup: A not positive definite");
  }
  const Matrix projected = B.adjoint() * llt.solve(B);
  const Matrix hermitian = 0.5 * (projected + projected.adjoint());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(hermitian);
  if (eig.info() != Eigen::Success) {
    throw NumericalError("inf_sup: eigendecomposition failed");
  }
  const double lambda_min = eig.eigenvalues()[0];
  report.beta = lambda_min > 0.0 ? std::sqrt(lambda_min) : 0.0;
  report.least_stable_mode = eig.eigenvectors().col(0);
  return report;
}

ErrorBoundReport error_bound_check(const PbdwSolution& solution,
                                   const DiscreteField& u_true,
                                   const BackgroundBasis& basis,
                                   const SensorSet& set, const InnerProduct& ip,
                                   const Measurement& measurement) {
  if (solution.coefficients.xi > 0.0) {
    throw ConfigError("error_bound_check: bound is only claimed for xi = 0");
  }
  if (measurement.noise_level > 0.0) {
    throw ConfigError("error_bound_check: bound is only claimed for noise-free data");
  }
  ErrorBoundReport report;
  const StabilityReport stability = inf_sup(basis.B, set.A);
  if (stability.beta <= 0.0) {
    throw NumericalError("error_bound_check: beta = 0, bound undefined");
  }
  report.beta = stability.beta;

  report.lhs = ip.norm((u_true.values - solution.reconstructed.values).eval());

  // Component of the truth outside the background span.
  Vector w = u_true.values;
  const Vector coeffs = project_coefficients(basis, ip, u_true);
  for (int j = 0; j < basis.size(); ++j) {
    w -= coeffs[j] * basis.modes[static_cast<std::size_t>(j)].values;
  }
  // Best approximation of w from U_M subject to orthogonality to Z_N:
  // the same saddle system with data l_m(w).
  Vector d(set.size());
  const DiscreteField w_field{w, u_true.mesh_id};
  for (int m = 0; m < set.size(); ++m) d[m] = set.apply(m, w_field);
  const PbdwCoefficients fit = solve_saddle(set.A, basis.B, d, 0.0);
  Vector residual = w;
  for (int m = 0; m < set.size(); ++m) {
    residual -= fit.eta[m] * set.representers[static_cast<std::size_t>(m)].values;
  }
  const double best_fit = ip.norm(residual);
  report.rhs = (1.0 + 1.0 / stability.beta) * best_fit;
  report.satisfied = report.lhs <= report.rhs * (1.0 + 1e-9) + 1e-12;
  return report;
}

double gcv_select(const Matrix& A, const Matrix& B, const Vector& y,
                  const std::vector<double>& xi_grid) {
  if (xi_grid.empty()) throw ConfigError("gcv_select: empty grid");
  for (double xi : xi_grid) {
    if (!(xi > 0.0)) throw ConfigError("gcv_select: grid weights must be positive");
  }
  const Eigen::Index m = A.rows();
  double best_xi = std::numeric_limits<double>::quiet_NaN();
  double best_score = std::numeric_limits<double>::infinity();
  bool any = false;
  for (double xi : xi_grid) {
    check_system(A, B, y, xi);
    const UpdateWeight weight(A, xi);
    const Vector z = background_stage(weight, B, y);
    const Vector eta = weight.solve((y - B * z).eval());
    const double numerator = std::pow(weight.xi_tilde() * eta.norm(), 2);

    // trace(I - H) with H the data-to-predicted-observations map:
    // I - H = xi_tilde W (I - B S).
    const Matrix w_full = weight.solve(Matrix(Matrix::Identity(m, m)));
    double trace = w_full.trace().real();
    if (B.cols() > 0) {
      const Matrix wb = weight.solve(B);
      const Matrix normal = B.adjoint() * wb;
      trace -= (Eigen::PartialPivLU<Matrix>(normal).solve(wb.adjoint() * wb))
                   .trace()
                   .real();
    }
    trace *= weight.xi_tilde();
    const double score = numerator / (trace * trace);
    if (!std::isfinite(score)) continue;
    any = true;
    if (score <= best_score) {  // ties break toward the larger weight
      best_score = score;
      best_xi = xi;
    }
  }
  if (!any) throw NumericalError("gcv_select: no finite GCV score on the grid");
  return best_xi;
}

Metrics compute_metrics(const PbdwSolution& solution, const DiscreteField& u_true,
                        const BackgroundBasis& basis, const InnerProduct& h1,
                        const InnerProduct& l2) {
  Metrics metrics;
  const Vector recovery_error = u_true.values - solution.reconstructed.values;
  const Vector estimate_error = u_true.values - solution.background.values;
  const double e_exact_norm = l2.norm(recovery_error);
  metrics.e_exact = e_exact_norm * e_exact_norm;
  const double e_estim_norm = l2.norm(estimate_error);
  metrics.e_estim = e_estim_norm * e_estim_norm;
  metrics.eta_norm = l2.norm(solution.update.values);

  Vector residual = u_true.values;
  const Vector coeffs = project_coefficients(basis, h1, u_true);
  for (int j = 0; j < basis.size(); ++j) {
    residual -= coeffs[j] * basis.modes[static_cast<std::size_t>(j)].values;
  }
  metrics.e_svd = l2.norm(residual);

  const double truth_norm = l2.norm(u_true.values);
  metrics.rel_error = e_exact_norm / std::max(truth_norm, kTiny);
  return metrics;
}

}  // namespace pbdw
