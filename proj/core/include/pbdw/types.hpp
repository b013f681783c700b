#pragma once

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace pbdw {

using Complex = std::complex<double>;
using Vector = Eigen::VectorXcd;
using Matrix = Eigen::MatrixXcd;
using RealVector = Eigen::VectorXd;
using RealMatrix = Eigen::MatrixXd;

/// Raised for invalid user-facing configuration (bad sizes, malformed
/// files, inconsistent ids). Maps to exit code 2 in the CLI.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Raised when a linear-algebra stage fails (singular system, failed
/// Cholesky, non-finite values). Maps to exit code 3 in the CLI.
struct NumericalError : std::runtime_error {
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

/// Complex nodal vector over a fixed mesh. `mesh_id` ties the field to the
/// mesh it was built on so cross-mesh mixups fail loudly.
struct DiscreteField {
  Vector values;
  std::uint64_t mesh_id = 0;

  Eigen::Index size() const { return values.size(); }
};

inline bool all_finite(const Vector& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i].real()) || !std::isfinite(v[i].imag())) return false;
  }
  return true;
}

/// Stack a complex vector as [Re; Im].
inline RealVector realify(const Vector& v) {
  RealVector out(2 * v.size());
  out.head(v.size()) = v.real();
  out.tail(v.size()) = v.imag();
  return out;
}

/// Inverse of realify.
inline Vector derealify(const RealVector& v) {
  if (v.size() % 2 != 0) throw ConfigError("derealify: odd-length vector");
  const Eigen::Index m = v.size() / 2;
  Vector out(m);
  out.real() = v.head(m);
  out.imag() = v.tail(m);
  return out;
}

}  // namespace pbdw
