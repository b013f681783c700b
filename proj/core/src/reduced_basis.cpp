#include "pbdw/reduced_basis.hpp"

#include "pbdw/io.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <atomic>
#include <fstream>
#include <thread>

namespace pbdw {

SnapshotSet generate_snapshots(const Mesh& mesh, const std::vector<double>& grid,
                               const HelmholtzConfig& cfg, int threads) {
  if (grid.empty()) throw ConfigError("generate_snapshots: empty parameter grid");
  SnapshotSet set;
  set.parameters = grid;
  set.config = cfg;
  set.snapshots.resize(grid.size());

  const HelmholtzSolver solver(mesh);
  if (threads <= 0) {
    threads = static_cast<int>(std::min<std::size_t>(
        grid.size(), std::max(1u, std::thread::hardware_concurrency())));
  }

  std::atomic<std::size_t> next{0};
  std::vector<std::string> errors(grid.size());
  auto worker = [&]() {
    for (std::size_t k = next.fetch_add(1); k < grid.size(); k = next.fetch_add(1)) {
      HelmholtzConfig local = cfg;
      local.mu = grid[k];
      try {
        set.snapshots[k] = solver.solve(local);
      } catch (const std::exception& e) {
        errors[k] = e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  for (std::size_t k = 0; k < grid.size(); ++k) {
    if (!errors[k].empty()) {
      throw NumericalError("generate_snapshots: solve failed at mu=" +
                           std::to_string(grid[k]) + ": " + errors[k]);
    }
  }
  return set;
}

std::uint64_t BackgroundBasis::hash() const {
  std::uint64_t h = hash_of_string("pbdw-basis");
  h = hash_combine(h, mesh_id, gram_id, size());
  for (const auto& mode : modes) h = hash_vector(mode.values, h);
  return h;
}

BackgroundBasis pod(const SnapshotSet& snapshots, const InnerProduct& ip, int n,
                    std::vector<std::string>* warnings) {
  const int k = static_cast<int>(snapshots.snapshots.size());
  if (k == 0) throw ConfigError("pod: no snapshots");
  if (n < 0 || n > k) {
    throw ConfigError("pod: requested " + std::to_string(n) + " modes from " +
                      std::to_string(k) + " snapshots");
  }
  for (const auto& s : snapshots.snapshots) {
    if (s.mesh_id != snapshots.snapshots.front().mesh_id) {
      throw ConfigError("pod: snapshots on mixed meshes");
    }
  }

  // Method of snapshots: KxK correlation in the chosen inner product.
  Matrix corr(k, k);
  std::vector<Vector> applied(static_cast<std::size_t>(k));
  for (int j = 0; j < k; ++j) {
    applied[static_cast<std::size_t>(j)] =
        ip.apply(snapshots.snapshots[static_cast<std::size_t>(j)].values);
  }
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) {
      corr(i, j) = snapshots.snapshots[static_cast<std::size_t>(i)].values.dot(
          applied[static_cast<std::size_t>(j)]);
    }
  }
  corr = 0.5 * (corr + corr.adjoint()).eval();

  Eigen::SelfAdjointEigenSolver<Matrix> eig(corr);
  if (eig.info() != Eigen::Success) {
    throw NumericalError("pod: eigendecomposition failed");
  }
  // Eigen returns ascending eigenvalues; flip to nonincreasing.
  const RealVector lambda = eig.eigenvalues().reverse();
  const Matrix vectors = eig.eigenvectors().rowwise().reverse();

  BackgroundBasis basis;
  basis.mesh_id = snapshots.snapshots.front().mesh_id;
  basis.gram_id = ip.id();

  // First pass: raw modes from the eigenvectors. The eigenvector basis
  // loses orthogonality like eps * (sigma_1/sigma_j)^2, so a second
  // Gram-Schmidt pass in the target metric follows.
  std::vector<Vector> modes;
  for (int j = 0; j < k && lambda[j] > 0.0 && lambda[j] > lambda[0] * 1e-30; ++j) {
    Vector coeffs = vectors.col(j);
    // Deterministic phase: rotate the largest-magnitude coefficient to the
    // positive real axis.
    Eigen::Index imax = 0;
    coeffs.cwiseAbs().maxCoeff(&imax);
    const Complex pivot = coeffs[imax];
    if (std::abs(pivot) > 0.0) coeffs *= std::conj(pivot) / std::abs(pivot);

    Vector mode = Vector::Zero(snapshots.snapshots.front().size());
    for (int i = 0; i < k; ++i) {
      mode += coeffs[i] * snapshots.snapshots[static_cast<std::size_t>(i)].values;
    }
    mode /= std::sqrt(lambda[j]);
    modes.push_back(std::move(mode));
  }

  for (int pass = 0; pass < 2; ++pass) {
    for (std::size_t j = 0; j < modes.size(); ++j) {
      Vector mode = modes[j];
      for (std::size_t i = 0; i < j; ++i) {
        mode -= ip.dot(mode, modes[i]) * modes[i];
      }
      const double norm = ip.norm(mode);
      if (norm <= 1e-10) {
        // The direction collapsed onto earlier modes; everything past it is
        // numerically dependent.
        modes.resize(j);
        break;
      }
      modes[j] = mode / norm;
    }
  }

  // Honest spectrum: energies of the snapshot set along the orthonormal
  // modes, immune to eigensolver noise in the tiny eigenvalues. Modes are
  // reordered by that energy (stable, so signal modes keep their order).
  const int built = static_cast<int>(modes.size());
  std::vector<double> energy(static_cast<std::size_t>(built), 0.0);
  for (int j = 0; j < built; ++j) {
    for (int i = 0; i < k; ++i) {
      energy[static_cast<std::size_t>(j)] += std::norm(
          modes[static_cast<std::size_t>(j)].dot(applied[static_cast<std::size_t>(i)]));
    }
  }
  std::vector<int> order(static_cast<std::size_t>(built));
  for (int j = 0; j < built; ++j) order[static_cast<std::size_t>(j)] = j;
  std::stable_sort(order.begin(), order.end(), [&energy](int a, int b) {
    return energy[static_cast<std::size_t>(a)] > energy[static_cast<std::size_t>(b)];
  });

  basis.spectrum = RealVector::Zero(k);
  for (int j = 0; j < built; ++j) {
    basis.spectrum[j] = std::sqrt(energy[static_cast<std::size_t>(order[static_cast<std::size_t>(j)])]);
  }

  const double sigma_tol = built > 0 ? basis.spectrum[0] * 1e-12 : 0.0;
  int usable = 0;
  while (usable < std::min(n, built) && basis.spectrum[usable] > sigma_tol) ++usable;
  if (usable < n && warnings != nullptr) {
    warnings->push_back("pod: requested " + std::to_string(n) +
                        " modes but numerical rank is " + std::to_string(usable) +
                        "; truncating");
  }

  basis.singular_values = basis.spectrum.head(usable);
  basis.modes.reserve(static_cast<std::size_t>(usable));
  for (int j = 0; j < usable; ++j) {
    basis.modes.push_back(DiscreteField{
        std::move(modes[static_cast<std::size_t>(order[static_cast<std::size_t>(j)])]),
        basis.mesh_id});
  }
  return basis;
}

BackgroundBasis bind_sensors(BackgroundBasis basis, const SensorSet& set) {
  if (basis.mesh_id != set.mesh_id) {
    throw ConfigError("bind_sensors: basis and sensor set on different meshes");
  }
  if (basis.gram_id != set.inner_product_id) {
    throw ConfigError("bind_sensors: basis and sensor set use different inner products");
  }
  const int m = set.size();
  const int n = basis.size();
  basis.B.resize(m, n);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      basis.B(i, j) = set.functionals[static_cast<std::size_t>(i)]
                          .cast<Complex>()
                          .dot(basis.modes[static_cast<std::size_t>(j)].values);
    }
  }
  return basis;
}

BackgroundBasis basis_prefix(const BackgroundBasis& basis, int n) {
  if (n < 0 || n > basis.size()) {
    throw ConfigError("basis_prefix: invalid size " + std::to_string(n) +
                      " for basis of " + std::to_string(basis.size()) + " modes");
  }
  BackgroundBasis prefix;
  prefix.modes.assign(basis.modes.begin(), basis.modes.begin() + n);
  prefix.singular_values = basis.singular_values.head(n);
  prefix.spectrum = basis.spectrum;
  prefix.gram_id = basis.gram_id;
  prefix.mesh_id = basis.mesh_id;
  if (basis.B.size() > 0) prefix.B = basis.B.leftCols(n);
  return prefix;
}

Vector project_coefficients(const BackgroundBasis& basis, const InnerProduct& ip,
                            const DiscreteField& field) {
  if (basis.gram_id != ip.id()) {
    throw ConfigError("project_coefficients: mismatched inner product");
  }
  Vector coeffs(basis.size());
  const Vector applied = ip.apply(field.values);
  for (int j = 0; j < basis.size(); ++j) {
    // (field, zeta_j) — linear in field, conjugate on the mode.
    coeffs[j] = basis.modes[static_cast<std::size_t>(j)].values.dot(applied);
  }
  return coeffs;
}

double projection_error(const BackgroundBasis& basis, const InnerProduct& ip,
                        const DiscreteField& field) {
  Vector residual = field.values;
  const Vector coeffs = project_coefficients(basis, ip, field);
  for (int j = 0; j < basis.size(); ++j) {
    residual -= coeffs[j] * basis.modes[static_cast<std::size_t>(j)].values;
  }
  return ip.norm(residual);
}

void save_basis(const std::filesystem::path& path, const BackgroundBasis& basis,
                InnerProductKind kind) {
  std::ofstream out(path);
  if (!out) throw ConfigError("save_basis: cannot open " + path.string());
  out << "pbdw-basis v1\n";
  out << (kind == InnerProductKind::H1 ? "H1" : "L2") << ' ' << basis.size() << ' '
      << basis.mesh_id << ' ' << basis.gram_id << '\n';
  out << basis.spectrum.size();
  for (Eigen::Index j = 0; j < basis.spectrum.size(); ++j) {
    out << ' ' << format_double(basis.spectrum[j]);
  }
  out << '\n';
  for (int j = 0; j < basis.size(); ++j) {
    out << format_double(basis.singular_values[j]) << ' '
        << basis.modes[static_cast<std::size_t>(j)].size() << '\n';
    const auto& mode = basis.modes[static_cast<std::size_t>(j)].values;
    for (Eigen::Index i = 0; i < mode.size(); ++i) {
      out << format_double(mode[i].real()) << ' ' << format_double(mode[i].imag())
          << '\n';
    }
  }
  if (!out) throw ConfigError("save_basis: write failed for " + path.string());
}

BasisFile load_basis(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("load_basis: cannot open " + path.string());
  std::string magic;
  std::getline(in, magic);
  if (magic != "pbdw-basis v1") {
    throw ConfigError("load_basis: unrecognized checkpoint header in " + path.string());
  }
  BasisFile file;
  std::string kind;
  int n = 0;
  in >> kind >> n >> file.basis.mesh_id >> file.basis.gram_id;
  if (kind == "H1") file.kind = InnerProductKind::H1;
  else if (kind == "L2") file.kind = InnerProductKind::L2;
  else throw ConfigError("load_basis: unknown inner-product kind " + kind);
  Eigen::Index spectrum_size = 0;
  in >> spectrum_size;
  file.basis.spectrum.resize(spectrum_size);
  for (Eigen::Index j = 0; j < spectrum_size; ++j) in >> file.basis.spectrum[j];
  file.basis.singular_values.resize(n);
  for (int j = 0; j < n; ++j) {
    Eigen::Index nodes = 0;
    in >> file.basis.singular_values[j] >> nodes;
    Vector mode(nodes);
    for (Eigen::Index i = 0; i < nodes; ++i) {
      double re = 0.0, im = 0.0;
      in >> re >> im;
      mode[i] = Complex(re, im);
    }
    file.basis.modes.push_back(DiscreteField{std::move(mode), file.basis.mesh_id});
  }
  if (!in) throw ConfigError("load_basis: truncated checkpoint " + path.string());
  return file;
}

double manifold_energy_residual(const BackgroundBasis& basis, int n) {
  const auto& s = basis.spectrum;
  if (s.size() == 0) throw ConfigError("manifold_energy_residual: empty spectrum");
  double total = 0.0;
  double tail = 0.0;
  for (Eigen::Index j = 0; j < s.size(); ++j) {
    total += s[j] * s[j];
    if (j >= n) tail += s[j] * s[j];
  }
  if (total <= 0.0) return 0.0;
  return std::sqrt(tail / total);
}

}  // namespace pbdw
