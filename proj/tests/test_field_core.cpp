#include "pbdw/helmholtz.hpp"
#include "pbdw/inner_product.hpp"
#include "pbdw/mesh.hpp"

#include "test_support.hpp"

#include <doctest.h>

#include <Eigen/Eigenvalues>

#include <cmath>
#include <map>
#include <numbers>

using namespace pbdw;

TEST_CASE("build_mesh counts and geometry") {
  const Mesh tiny = build_mesh(2, 2);
  CHECK(tiny.node_count() == 4);
  CHECK(tiny.elements.size() == 2);
  CHECK(tiny.boundary_nodes.size() == 4);

  const Mesh small = build_mesh(3, 3);
  CHECK(small.node_count() == 9);
  CHECK(small.elements.size() == 8);
  CHECK(small.boundary_nodes.size() == 8);

  CHECK_THROWS_AS(build_mesh(1, 5), ConfigError);
  CHECK_THROWS_AS(build_mesh(5, 0), ConfigError);
}

TEST_CASE("mesh areas sum to the unit square") {
  const Mesh mesh = build_mesh(65, 65);
  double total = 0.0;
  for (std::size_t e = 0; e < mesh.elements.size(); ++e) {
    const double area = element_area(mesh, static_cast<int>(e));
    CHECK(area > 0.0);
    total += area;
  }
  CHECK(std::abs(total - 1.0) <= 1e-12);
}

TEST_CASE("mesh is a valid triangulation") {
  const Mesh mesh = build_mesh(6, 5);
  for (const auto& node : mesh.nodes) {
    CHECK(node[0] >= 0.0);
    CHECK(node[0] <= 1.0);
    CHECK(node[1] >= 0.0);
    CHECK(node[1] <= 1.0);
  }
  for (int b : mesh.boundary_nodes) {
    const auto& p = mesh.nodes[static_cast<std::size_t>(b)];
    const bool on_edge = std::abs(p[0]) <= 1e-14 || std::abs(p[0] - 1.0) <= 1e-14 ||
                         std::abs(p[1]) <= 1e-14 || std::abs(p[1] - 1.0) <= 1e-14;
    CHECK(on_edge);
  }
  // Every interior edge must be shared by exactly two triangles.
  std::map<std::pair<int, int>, int> edge_count;
  for (const auto& e : mesh.elements) {
    for (int k = 0; k < 3; ++k) {
      const int a = e[static_cast<std::size_t>(k)];
      const int b = e[static_cast<std::size_t>((k + 1) % 3)];
      edge_count[{std::min(a, b), std::max(a, b)}] += 1;
    }
  }
  auto is_boundary_edge = [&mesh](int a, int b) {
    const auto& pa = mesh.nodes[static_cast<std::size_t>(a)];
    const auto& pb = mesh.nodes[static_cast<std::size_t>(b)];
    for (int d = 0; d < 2; ++d) {
      for (double edge : {0.0, 1.0}) {
        if (std::abs(pa[d] - edge) <= 1e-14 && std::abs(pb[d] - edge) <= 1e-14) {
          return true;
        }
      }
    }
    return false;
  };
  for (const auto& [edge, count] : edge_count) {
    if (is_boundary_edge(edge.first, edge.second)) {
      CHECK(count == 1);
    } else {
      CHECK(count == 2);
    }
  }
}

TEST_CASE("L2 gram integrates constants exactly") {
  const Mesh mesh = build_mesh(17, 17);
  const InnerProduct l2 = assemble_inner_product(mesh, InnerProductKind::L2);
  const Complex c(1.3, -0.4);
  const Vector field = Vector::Constant(mesh.node_count(), c);
  const Complex result = l2.dot(field, field);
  CHECK(std::abs(result.real() - std::norm(c)) <= 1e-10);
  CHECK(std::abs(result.imag()) <= 1e-12);
}

TEST_CASE("H1 gram matches the analytic integral of u = x1") {
  const Mesh mesh = build_mesh(65, 65);
  const InnerProduct h1 = assemble_inner_product(mesh, InnerProductKind::H1);
  const DiscreteField u = test::nodal_field(mesh, [](double x1, double) {
    return Complex(x1, 0.0);
  });
  // integral of |grad u|^2 = 1, integral of u^2 = 1/3.
  const double expected = 1.0 + 1.0 / 3.0;
  CHECK(std::abs(h1.dot(u, u).real() - expected) <= 2e-3);
}

TEST_CASE("gram matrices are symmetric and positive") {
  const Mesh mesh = build_mesh(9, 9);
  const InnerProduct h1 = assemble_inner_product(mesh, InnerProductKind::H1);
  const SparseReal& g = h1.gram();
  const SparseReal diff = SparseReal(g - SparseReal(g.transpose()));
  double max_diff = 0.0, max_abs = 0.0;
  for (int k = 0; k < g.outerSize(); ++k) {
    for (SparseReal::InnerIterator it(g, k); it; ++it) {
      max_abs = std::max(max_abs, std::abs(it.value()));
    }
    for (SparseReal::InnerIterator it(diff, k); it; ++it) {
      max_diff = std::max(max_diff, std::abs(it.value()));
    }
  }
  CHECK(max_diff <= 1e-14 * max_abs);

  Rng rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    const DiscreteField v = test::random_field(mesh, rng);
    CHECK(h1.dot(v, v).real() > 0.0);
  }
}

TEST_CASE("zero source with Dirichlet walls gives the zero state") {
  const Mesh mesh = build_mesh(17, 17);
  HelmholtzConfig cfg;
  cfg.mu = 1.0;  // well below the first resonance
  cfg.epsilon = 0.0;
  cfg.bc = BoundaryCondition::DirichletPerfect;
  cfg.rhs_override = [](double, double) { return Complex(0.0, 0.0); };
  const DiscreteField u = solve_helmholtz(mesh, cfg);
  CHECK(u.values.lpNorm<Eigen::Infinity>() <= 1e-12);
}

TEST_CASE("Dirichlet solutions vanish on the boundary") {
  const Mesh mesh = build_mesh(33, 33);
  HelmholtzConfig cfg;
  cfg.mu = 6.0;
  cfg.epsilon = 0.01;
  cfg.bc = BoundaryCondition::DirichletPerfect;
  cfg.source = SourceBias::PerfectG;
  const DiscreteField u = solve_helmholtz(mesh, cfg);
  for (int b : mesh.boundary_nodes) {
    CHECK(std::abs(u.values[b]) <= 1e-12);
  }
}

TEST_CASE("manufactured solution converges at second order") {
  // u* = sin(pi x1) sin(pi x2) satisfies the Dirichlet condition;
  // the right-hand side follows by substitution.
  const double mu = 6.0;
  const double eps = 0.01;
  const Complex coeff(1.0, eps * mu);
  auto exact = [](double x1, double x2) {
    return std::sin(std::numbers::pi * x1) * std::sin(std::numbers::pi * x2);
  };
  auto rhs = [&](double x1, double x2) {
    const double lap = -2.0 * std::numbers::pi * std::numbers::pi * exact(x1, x2);
    return -coeff * lap - mu * mu * exact(x1, x2);
  };

  std::vector<double> errors;
  for (int n : {17, 33, 65}) {
    const Mesh mesh = build_mesh(n, n);
    HelmholtzConfig cfg;
    cfg.mu = mu;
    cfg.epsilon = eps;
    cfg.bc = BoundaryCondition::DirichletPerfect;
    cfg.rhs_override = rhs;
    const DiscreteField u = solve_helmholtz(mesh, cfg);
    const InnerProduct l2 = assemble_inner_product(mesh, InnerProductKind::L2);
    const DiscreteField reference = test::nodal_field(mesh, [&](double a, double b) {
      return Complex(exact(a, b), 0.0);
    });
    errors.push_back(l2.norm((u.values - reference.values).eval()));
  }
  const double rate1 = std::log2(errors[0] / errors[1]);
  const double rate2 = std::log2(errors[1] / errors[2]);
  CHECK(rate1 >= 1.8);
  CHECK(rate2 >= 1.8);
}

TEST_CASE("dissipation keeps the open-boundary system solvable near resonance") {
  const Mesh mesh = build_mesh(17, 17);
  const HelmholtzSolver solver(mesh);
  // Sweep across the first open-boundary resonances pi^2 (k^2 + l^2).
  for (int i = 0; i < 20; ++i) {
    HelmholtzConfig cfg;
    cfg.mu = 2.0 + 0.42 * i;
    cfg.epsilon = 0.01;
    cfg.bc = BoundaryCondition::NeumannBiased;
    cfg.source = SourceBias::BiasedZeroG;
    const DiscreteField u = solver.solve(cfg);
    CHECK(all_finite(u.values));
  }
}

TEST_CASE("undamped solve at a discrete resonance is rejected") {
  const Mesh mesh = build_mesh(9, 9);
  // Discrete generalized eigenvalue of (stiffness, mass): the exact
  // wavenumber at which the undamped open-boundary operator is singular.
  const RealMatrix s = RealMatrix(assemble_stiffness(mesh));
  const RealMatrix m = RealMatrix(assemble_mass(mesh));
  Eigen::GeneralizedSelfAdjointEigenSolver<RealMatrix> eig(s, m);
  double lambda = 0.0;
  for (Eigen::Index i = 0; i < eig.eigenvalues().size(); ++i) {
    if (eig.eigenvalues()[i] > 1e-8) {
      lambda = eig.eigenvalues()[i];
      break;
    }
  }
  REQUIRE(lambda > 0.0);
  HelmholtzConfig cfg;
  cfg.mu = std::sqrt(lambda);
  cfg.epsilon = 0.0;
  cfg.bc = BoundaryCondition::NeumannBiased;
  cfg.source = SourceBias::BiasedZeroG;
  CHECK_THROWS_AS(solve_helmholtz(mesh, cfg), NumericalError);
}

TEST_CASE("field evaluation is exact at nodes and for linear fields") {
  const Mesh mesh = build_mesh(8, 11);
  Rng rng(3);
  const DiscreteField f = test::random_field(mesh, rng);
  for (int trial = 0; trial < 25; ++trial) {
    const int node = static_cast<int>(rng.below(static_cast<std::uint64_t>(mesh.node_count())));
    const auto& p = mesh.nodes[static_cast<std::size_t>(node)];
    CHECK(evaluate_field_at(mesh, f, p[0], p[1]) == f.values[node]);
  }

  const DiscreteField linear = test::nodal_field(mesh, [](double x1, double x2) {
    return Complex(x1 + 2.0 * x2, 0.0);
  });
  for (int trial = 0; trial < 50; ++trial) {
    const double x1 = rng.uniform();
    const double x2 = rng.uniform();
    const Complex value = evaluate_field_at(mesh, linear, x1, x2);
    CHECK(std::abs(value - Complex(x1 + 2.0 * x2, 0.0)) <= 1e-13);
  }

  CHECK_THROWS_AS(evaluate_field_at(mesh, f, 1.2, 0.5), ConfigError);
  CHECK_THROWS_AS(evaluate_field_at(mesh, f, 0.5, -0.1), ConfigError);
}

TEST_CASE("edge midpoints interpolate to the endpoint mean") {
  const Mesh mesh = build_mesh(5, 5);
  Rng rng(11);
  const DiscreteField f = test::random_field(mesh, rng);
  for (const auto& element : mesh.elements) {
    for (int k = 0; k < 3; ++k) {
      const int a = element[static_cast<std::size_t>(k)];
      const int b = element[static_cast<std::size_t>((k + 1) % 3)];
      const auto& pa = mesh.nodes[static_cast<std::size_t>(a)];
      const auto& pb = mesh.nodes[static_cast<std::size_t>(b)];
      const Complex expected = 0.5 * (f.values[a] + f.values[b]);
      const Complex actual = evaluate_field_at(mesh, f, 0.5 * (pa[0] + pb[0]),
                                               0.5 * (pa[1] + pb[1]));
      CHECK(std::abs(actual - expected) <= 1e-13);
    }
  }
}

TEST_CASE("galerkin residual contract holds on a representative solve") {
  const Mesh mesh = build_mesh(33, 33);
  HelmholtzConfig cfg;
  cfg.mu = 7.3;
  cfg.epsilon = 0.01;
  cfg.bc = BoundaryCondition::NeumannBiased;
  cfg.source = SourceBias::BiasedZeroG;
  // The solver enforces the residual contract internally and throws
  // otherwise; a successful solve with finite values is the observable.
  const DiscreteField u = solve_helmholtz(mesh, cfg);
  CHECK(all_finite(u.values));
  CHECK(u.values.norm() > 0.0);
}
