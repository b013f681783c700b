#include "pbdw/reduced_basis.hpp"

#include "test_support.hpp"

#include <doctest.h>

#include <cstdio>
#include <filesystem>

using namespace pbdw;

namespace {

struct RbFixture {
  Mesh mesh = build_mesh(33, 33);
  InnerProduct h1 = assemble_inner_product(mesh, InnerProductKind::H1);
  InnerProduct l2 = assemble_inner_product(mesh, InnerProductKind::L2);

  HelmholtzConfig biased() const {
    HelmholtzConfig cfg;
    cfg.mu = 6.0;
    cfg.epsilon = 0.01;
    cfg.bc = BoundaryCondition::NeumannBiased;
    cfg.source = SourceBias::BiasedZeroG;
    return cfg;
  }

  SnapshotSet default_snapshots(int count = 12) const {
    std::vector<double> grid(static_cast<std::size_t>(count));
    for (int k = 0; k < count; ++k) {
      grid[static_cast<std::size_t>(k)] = 5.8 + 0.4 * k / std::max(count - 1, 1);
    }
    return generate_snapshots(mesh, grid, biased(), 0);
  }
};

}  // namespace

TEST_CASE("snapshot generation covers the grid and stays finite") {
  RbFixture fx;
  const SnapshotSet one = generate_snapshots(fx.mesh, {6.0}, fx.biased(), 0);
  CHECK(one.snapshots.size() == 1);

  const SnapshotSet set = fx.default_snapshots(51);
  CHECK(set.snapshots.size() == 51);
  for (const auto& s : set.snapshots) CHECK(all_finite(s.values));

  CHECK_THROWS_AS(generate_snapshots(fx.mesh, {}, fx.biased(), 0), ConfigError);
}

TEST_CASE("biased and perfect models produce different snapshots") {
  RbFixture fx;
  HelmholtzConfig perfect = fx.biased();
  perfect.bc = BoundaryCondition::DirichletPerfect;
  perfect.source = SourceBias::PerfectG;
  bool any_gap = false;
  for (double mu : {5.8, 6.0, 6.2}) {
    HelmholtzConfig b = fx.biased();
    b.mu = mu;
    HelmholtzConfig p = perfect;
    p.mu = mu;
    const DiscreteField ub = solve_helmholtz(fx.mesh, b);
    const DiscreteField up = solve_helmholtz(fx.mesh, p);
    const double gap = fx.l2.norm((ub.values - up.values).eval()) /
                       std::max(fx.l2.norm(up.values), 1e-300);
    if (gap > 0.01) any_gap = true;
  }
  CHECK(any_gap);
}

TEST_CASE("pod of identical snapshots is rank one") {
  RbFixture fx;
  const DiscreteField snap = solve_helmholtz(fx.mesh, fx.biased());
  SnapshotSet set;
  set.parameters = {6.0, 6.0, 6.0};
  set.snapshots = {snap, snap, snap};
  set.config = fx.biased();

  std::vector<std::string> warnings;
  const BackgroundBasis basis = pod(set, fx.h1, 3, &warnings);
  CHECK(basis.size() == 1);
  CHECK(!warnings.empty());
  CHECK(basis.spectrum[1] <= 1e-12 * basis.spectrum[0]);

  const double snap_norm = fx.h1.norm(snap.values);
  const double align =
      std::abs(fx.h1.dot(snap.values, basis.modes[0].values)) / snap_norm;
  CHECK(std::abs(align - 1.0) <= 1e-10);
}

TEST_CASE("pod modes are orthonormal and nested") {
  RbFixture fx;
  const SnapshotSet set = fx.default_snapshots();
  const BackgroundBasis b5 = pod(set, fx.h1, 5, nullptr);
  const BackgroundBasis b6 = pod(set, fx.h1, 6, nullptr);

  for (int i = 0; i < b5.size(); ++i) {
    for (int j = 0; j < b5.size(); ++j) {
      const Complex dot = fx.h1.dot(b5.modes[static_cast<std::size_t>(i)].values,
                                    b5.modes[static_cast<std::size_t>(j)].values);
      CHECK(std::abs(dot - (i == j ? 1.0 : 0.0)) <= 1e-10);
    }
  }
  for (int j = 0; j + 1 < b5.size(); ++j) {
    CHECK(b5.singular_values[j] >= b5.singular_values[j + 1]);
  }
  for (int j = 0; j < 5; ++j) {
    const double gap = (b5.modes[static_cast<std::size_t>(j)].values -
                        b6.modes[static_cast<std::size_t>(j)].values)
                           .norm();
    CHECK(gap <= 1e-10 * b5.modes[static_cast<std::size_t>(j)].values.norm());
  }
}

TEST_CASE("retained plus residual energy matches the snapshot energy") {
  RbFixture fx;
  const SnapshotSet set = fx.default_snapshots();
  const int n = 4;
  const BackgroundBasis basis = pod(set, fx.h1, n, nullptr);

  double residual_energy = 0.0;
  double total_energy = 0.0;
  for (const auto& snap : set.snapshots) {
    const double e = projection_error(basis, fx.h1, snap);
    residual_energy += e * e;
    const double full = fx.h1.norm(snap.values);
    total_energy += full * full;
  }
  double tail = 0.0;
  for (Eigen::Index j = n; j < basis.spectrum.size(); ++j) {
    tail += basis.spectrum[j] * basis.spectrum[j];
  }
  // Residual + retained = total, relative to the total snapshot energy.
  CHECK(std::abs(residual_energy - tail) <= 1e-8 * total_energy);
}

TEST_CASE("binding sensors fills the coupling matrix both ways") {
  RbFixture fx;
  const SnapshotSet set = fx.default_snapshots();
  BackgroundBasis basis = pod(set, fx.h1, 4, nullptr);
  const SensorSet sensors =
      build_sensor_set(fx.mesh, random_placement(6, 0.02, -1.0, 13), fx.h1);
  basis = bind_sensors(std::move(basis), sensors);
  CHECK(basis.B.rows() == 6);
  CHECK(basis.B.cols() == 4);

  for (int m = 0; m < 6; ++m) {
    for (int n = 0; n < 4; ++n) {
      const Complex through_quadrature =
          sensors.apply(m, basis.modes[static_cast<std::size_t>(n)]);
      const Complex through_gram =
          fx.h1.dot(basis.modes[static_cast<std::size_t>(n)].values,
                    sensors.representers[static_cast<std::size_t>(m)].values);
      CHECK(std::abs(basis.B(m, n) - through_quadrature) <= 1e-12);
      CHECK(std::abs(basis.B(m, n) - through_gram) <=
            1e-10 * std::max(1.0, std::abs(through_gram)));
    }
  }
}

TEST_CASE("empty background binds to a zero-column coupling matrix") {
  RbFixture fx;
  const SnapshotSet set = fx.default_snapshots(3);
  BackgroundBasis basis = pod(set, fx.h1, 0, nullptr);
  const SensorSet sensors = build_sensor_set(fx.mesh, {{0.5, 0.5, 0.02}}, fx.h1);
  basis = bind_sensors(std::move(basis), sensors);
  CHECK(basis.B.rows() == 1);
  CHECK(basis.B.cols() == 0);
}

TEST_CASE("a representer-aligned mode couples with its own norm") {
  RbFixture fx;
  const SensorSet sensors = build_sensor_set(fx.mesh, {{0.45, 0.55, 0.02}}, fx.h1);
  const DiscreteField& q = sensors.representers[0];
  const double q_norm = fx.h1.norm(q.values);

  SnapshotSet synthetic;
  synthetic.parameters = {0.0};
  synthetic.snapshots = {q};
  BackgroundBasis basis = pod(synthetic, fx.h1, 1, nullptr);
  basis = bind_sensors(std::move(basis), sensors);
  CHECK(std::abs(basis.B(0, 0) - Complex(q_norm, 0.0)) <= 1e-10 * q_norm);
}

TEST_CASE("projection error vanishes in-span and is total out-of-span") {
  RbFixture fx;
  const SnapshotSet set = fx.default_snapshots();
  const BackgroundBasis basis = pod(set, fx.h1, 3, nullptr);

  Rng rng(31);
  Vector in_span = Vector::Zero(fx.mesh.node_count());
  for (int j = 0; j < basis.size(); ++j) {
    in_span += Complex(rng.normal(), rng.normal()) *
               basis.modes[static_cast<std::size_t>(j)].values;
  }
  const DiscreteField in_field{in_span, fx.mesh.id};
  CHECK(projection_error(basis, fx.h1, in_field) <= 1e-10 * fx.h1.norm(in_span));

  // Orthogonalize a random field against the basis to get a pure complement.
  DiscreteField out_field = test::random_field(fx.mesh, rng);
  const Vector coeffs = project_coefficients(basis, fx.h1, out_field);
  for (int j = 0; j < basis.size(); ++j) {
    out_field.values -= coeffs[j] * basis.modes[static_cast<std::size_t>(j)].values;
  }
  const double n = fx.h1.norm(out_field.values);
  CHECK(std::abs(projection_error(basis, fx.h1, out_field) - n) <= 1e-10 * n);
}

TEST_CASE("projection error is nonincreasing in the basis size") {
  RbFixture fx;
  const SnapshotSet set = fx.default_snapshots();
  const BackgroundBasis full = pod(set, fx.h1, 8, nullptr);
  Rng rng(41);
  for (int trial = 0; trial < 20; ++trial) {
    const DiscreteField v = test::random_field(fx.mesh, rng);
    double previous = std::numeric_limits<double>::infinity();
    for (int n = 1; n <= full.size(); ++n) {
      const double e = projection_error(basis_prefix(full, n), fx.h1, v);
      CHECK(e <= previous + 1e-12 * std::max(previous, 1.0));
      previous = e;
    }
  }
}

TEST_CASE("basis checkpoint round-trips bit-exactly") {
  RbFixture fx;
  const SnapshotSet set = fx.default_snapshots(5);
  const BackgroundBasis basis = pod(set, fx.h1, 4, nullptr);

  const auto path = std::filesystem::temp_directory_path() / "pbdw_basis_roundtrip.txt";
  save_basis(path, basis, InnerProductKind::H1);
  const BasisFile loaded = load_basis(path);
  std::filesystem::remove(path);

  CHECK(loaded.kind == InnerProductKind::H1);
  CHECK(loaded.basis.size() == basis.size());
  CHECK(loaded.basis.mesh_id == basis.mesh_id);
  CHECK(loaded.basis.gram_id == basis.gram_id);
  CHECK(loaded.basis.spectrum == basis.spectrum);
  CHECK(loaded.basis.singular_values == basis.singular_values);
  for (int j = 0; j < basis.size(); ++j) {
    CHECK(loaded.basis.modes[static_cast<std::size_t>(j)].values ==
          basis.modes[static_cast<std::size_t>(j)].values);
  }
}
