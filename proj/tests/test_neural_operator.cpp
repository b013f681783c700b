#include "pbdw/operator_model.hpp"

#include "test_support.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>

using namespace pbdw;

namespace {

/// Central finite differences against the analytic gradient on a sample of
/// coordinates. Returns the worst relative mismatch.
double fd_worst_error(const std::function<double(const RealVector&)>& loss,
                      const RealVector& at, const RealVector& analytic,
                      Rng& rng, int n_coords) {
  const double h = 1e-5;
  double worst = 0.0;
  for (int trial = 0; trial < n_coords; ++trial) {
    const auto i = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(at.size())));
    RealVector plus = at;
    RealVector minus = at;
    plus[i] += h;
    minus[i] -= h;
    const double fd = (loss(plus) - loss(minus)) / (2.0 * h);
    const double denom = std::max({std::abs(fd), std::abs(analytic[i]), 1e-8});
    worst = std::max(worst, std::abs(fd - analytic[i]) / denom);
  }
  return worst;
}

struct OperatorFixture {
  Mesh mesh = build_mesh(17, 17);
  InnerProduct h1 = assemble_inner_product(mesh, InnerProductKind::H1);
  SensorSet sensors = build_sensor_set(mesh, random_placement(8, 0.02, -1.0, 2), h1);
  BackgroundBasis basis;
  HelmholtzConfig truth_cfg;

  OperatorFixture() {
    std::vector<double> grid(7);
    for (int k = 0; k < 7; ++k) grid[static_cast<std::size_t>(k)] = 5.8 + 0.4 * k / 6.0;
    HelmholtzConfig bk;
    bk.mu = 6.0;
    bk.epsilon = 0.01;
    bk.bc = BoundaryCondition::NeumannBiased;
    bk.source = SourceBias::BiasedZeroG;
    basis = bind_sensors(pod(generate_snapshots(mesh, grid, bk, 0), h1, 2, nullptr),
                         sensors);
    truth_cfg = bk;
    truth_cfg.bc = BoundaryCondition::DirichletPerfect;
    truth_cfg.source = SourceBias::PerfectG;
  }

  TrainingSet dataset(int pairs, std::uint64_t seed = 3) const {
    return generate_training_set(mesh, truth_cfg, ForcingFamily{}, sensors, basis,
                                 pairs, seed);
  }
};

}  // namespace

TEST_CASE("zero-parameter network maps everything to zero") {
  MlpParams params = mlp_init({3, 5, 2}, 1);
  for (auto& w : params.weights) w.setZero();
  for (auto& b : params.biases) b.setZero();
  const RealMatrix out = mlp_forward(params, RealMatrix::Random(3, 4));
  CHECK(out.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("a single affine layer is an exact matrix product") {
  MlpParams params = mlp_init({3, 2}, 7);
  const RealMatrix input = RealMatrix::Random(3, 5);
  const RealMatrix out = mlp_forward(params, input);
  const RealMatrix expected = (params.weights[0] * input).colwise() + params.biases[0];
  CHECK((out - expected).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("batched forward equals concatenated single passes") {
  MlpParams params = mlp_init({4, 6, 6, 3}, 11);
  Rng rng(13);
  RealMatrix batch(4, 2);
  for (int i = 0; i < 4; ++i) {
    batch(i, 0) = rng.normal();
    batch(i, 1) = rng.normal();
  }
  const RealMatrix joint = mlp_forward(params, batch);
  const RealMatrix first = mlp_forward(params, batch.col(0));
  const RealMatrix second = mlp_forward(params, batch.col(1));
  CHECK((joint.col(0) - first.col(0)).cwiseAbs().maxCoeff() <= 1e-14);
  CHECK((joint.col(1) - second.col(0)).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("reverse-mode gradient matches finite differences") {
  MlpParams params = mlp_init({4, 8, 8, 3}, 17);
  Rng rng(19);
  RealMatrix input(4, 6);
  RealMatrix target(3, 6);
  for (Eigen::Index i = 0; i < input.size(); ++i) input.data()[i] = rng.normal();
  for (Eigen::Index i = 0; i < target.size(); ++i) target.data()[i] = rng.normal();

  const OutputLoss mse = [&target](const RealMatrix& out, RealMatrix& grad) {
    grad = 2.0 * (out - target);
    return (out - target).squaredNorm();
  };
  const auto [value, grads] = mlp_gradient(params, input, mse);
  CHECK(value > 0.0);

  const RealVector flat = flatten_parameters(params);
  const RealVector analytic = flatten_gradients(grads);
  auto loss_at = [&](const RealVector& theta) {
    MlpParams p = params;
    unflatten_parameters(p, theta);
    RealMatrix unused;
    const RealMatrix out = mlp_forward(p, input);
    return (out - target).squaredNorm();
  };
  CHECK(fd_worst_error(loss_at, flat, analytic, rng, 50) <= 1e-5);
}

TEST_CASE("gradient of a constant loss vanishes and scales linearly") {
  MlpParams params = mlp_init({3, 5, 2}, 23);
  const RealMatrix input = RealMatrix::Random(3, 4);
  const OutputLoss constant = [](const RealMatrix& out, RealMatrix& grad) {
    grad.setZero();
    (void)out;
    return 42.0;
  };
  const auto [value, grads] = mlp_gradient(params, input, constant);
  CHECK(value == 42.0);
  CHECK(flatten_gradients(grads).cwiseAbs().maxCoeff() == 0.0);

  RealMatrix target = RealMatrix::Random(2, 4);
  const OutputLoss mse = [&target](const RealMatrix& out, RealMatrix& grad) {
    grad = 2.0 * (out - target);
    return (out - target).squaredNorm();
  };
  const OutputLoss doubled = [&target](const RealMatrix& out, RealMatrix& grad) {
    grad = 4.0 * (out - target);
    return 2.0 * (out - target).squaredNorm();
  };
  const auto [v1, g1] = mlp_gradient(params, input, mse);
  const auto [v2, g2] = mlp_gradient(params, input, doubled);
  CHECK(std::abs(v2 - 2.0 * v1) <= 1e-12 * std::abs(v1));
  CHECK((flatten_gradients(g2) - 2.0 * flatten_gradients(g1)).cwiseAbs().maxCoeff() <=
        1e-12 * flatten_gradients(g1).cwiseAbs().maxCoeff());
}

TEST_CASE("adam leaves parameters alone under zero gradients") {
  MlpParams params = mlp_init({2, 4, 1}, 29);
  const RealVector before = flatten_parameters(params);
  AdamState state = AdamState::init(params);
  state.m_weights[0].setConstant(0.5);  // nonzero moment decays
  adam_step(params, zero_gradients(params), state, 1e-3);
  // The first-moment estimate decays toward zero but a bias-corrected zero
  // gradient still moves nothing only when moments started at zero; with a
  // seeded nonzero moment the parameters move. Reset and verify the clean case.
  MlpParams clean = mlp_init({2, 4, 1}, 29);
  AdamState clean_state = AdamState::init(clean);
  adam_step(clean, zero_gradients(clean), clean_state, 1e-3);
  CHECK(flatten_parameters(clean) == before);
  CHECK(clean_state.step == 1);
}

TEST_CASE("adam descends a quadratic bowl monotonically") {
  MlpParams params = mlp_init({1, 3}, 31);  // parameters are the optimizees
  params.weights[0] << 2.0, -1.5, 1.0;      // start well away from the floor
  params.biases[0].setZero();
  AdamState state = AdamState::init(params);
  const RealMatrix input = RealMatrix::Ones(1, 1);
  auto bowl = [](const RealMatrix& out, RealMatrix& grad) {
    grad = 2.0 * out;
    return out.squaredNorm();
  };
  const double initial = 2.0 * 2.0 + 1.5 * 1.5 + 1.0;
  double previous = std::numeric_limits<double>::infinity();
  for (int step = 0; step < 100; ++step) {
    auto [value, grads] = mlp_gradient(params, input, bowl);
    CHECK(value <= previous + 1e-14);
    previous = value;
    adam_step(params, grads, state, 0.01);
  }
  CHECK(previous < 0.5 * initial);
}

TEST_CASE("adam trajectories are bitwise reproducible per seed") {
  auto run = []() {
    MlpParams params = mlp_init({2, 6, 2}, 37);
    AdamState state = AdamState::init(params);
    Rng rng(41);
    RealMatrix input(2, 8);
    RealMatrix target(2, 8);
    for (Eigen::Index i = 0; i < input.size(); ++i) input.data()[i] = rng.normal();
    for (Eigen::Index i = 0; i < target.size(); ++i) target.data()[i] = rng.normal();
    const OutputLoss mse = [&target](const RealMatrix& out, RealMatrix& grad) {
      grad = 2.0 * (out - target);
      return (out - target).squaredNorm();
    };
    for (int step = 0; step < 50; ++step) {
      auto [value, grads] = mlp_gradient(params, input, mse);
      (void)value;
      adam_step(params, grads, state, 1e-3);
    }
    return flatten_parameters(params);
  };
  CHECK(run() == run());
}

TEST_CASE("realify and derealify are inverse maps") {
  Rng rng(43);
  for (int trial = 0; trial < 20; ++trial) {
    Vector v(1 + static_cast<Eigen::Index>(rng.below(12)));
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = Complex(rng.normal(), rng.normal());
    CHECK(derealify(realify(v)) == v);
  }
}

TEST_CASE("trunk basis without background modes is the identity") {
  OperatorFixture fx;
  BackgroundBasis empty;
  empty.mesh_id = fx.mesh.id;
  empty.gram_id = fx.h1.id();
  empty.B = Matrix::Zero(fx.sensors.size(), 0);
  const TrunkBasis trunk = build_trunk_basis(fx.sensors, empty);
  CHECK((trunk.phi - Matrix::Identity(fx.sensors.size(), fx.sensors.size()))
            .cwiseAbs()
            .maxCoeff() == 0.0);
}

TEST_CASE("trunk basis columns are orthogonal to every background mode") {
  OperatorFixture fx;
  const TrunkBasis trunk = build_trunk_basis(fx.sensors, fx.basis);
  const Matrix residual = fx.basis.B.adjoint() * trunk.phi;
  CHECK(residual.cwiseAbs().maxCoeff() <= 1e-10);

  // Idempotence: applying the constraint projector again changes nothing.
  Eigen::LLT<Matrix> llt(fx.sensors.A);
  const Matrix w = llt.solve(fx.basis.B);
  const Matrix small = fx.basis.B.adjoint() * w;
  const Matrix reprojected =
      trunk.phi - w * Eigen::PartialPivLU<Matrix>(small).solve(
                          fx.basis.B.adjoint() * trunk.phi);
  CHECK((reprojected - trunk.phi).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("a sensor direction inside the background span is rejected") {
  OperatorFixture fx;
  // Single background mode aligned with the first representer: the first
  // coordinate direction has no component outside the span.
  const Vector q = fx.sensors.representers[0].values;
  BackgroundBasis aligned;
  aligned.mesh_id = fx.mesh.id;
  aligned.gram_id = fx.h1.id();
  aligned.modes.push_back(DiscreteField{q / fx.h1.norm(q), fx.mesh.id});
  aligned.singular_values = RealVector::Ones(1);
  aligned.spectrum = RealVector::Ones(1);
  const BackgroundBasis bound = bind_sensors(aligned, fx.sensors);
  CHECK_THROWS_AS(build_trunk_basis(fx.sensors, bound), NumericalError);
}

TEST_CASE("training pairs come from classical solves and are reproducible") {
  OperatorFixture fx;
  const TrainingSet a = fx.dataset(6, 99);
  const TrainingSet b = fx.dataset(6, 99);
  CHECK(a.inputs == b.inputs);
  CHECK(a.targets == b.targets);
  CHECK(a.descriptor == b.descriptor);
  CHECK(a.pair_count() == 6);

  // Targets satisfy the orthogonality property of the classical statement.
  for (int i = 0; i < a.pair_count(); ++i) {
    const Vector eta = a.targets.col(i);
    CHECK((fx.basis.B.adjoint() * eta).norm() <= 1e-9 * std::max(eta.norm(), 1e-300));
  }
}

TEST_CASE("strong mode is structurally orthogonal, trained or not") {
  OperatorFixture fx;
  const TrainingSet dataset = fx.dataset(12);
  TrainOptions options;
  options.epochs = 0;  // untrained: initialization only
  options.seed = 5;
  const OperatorModel untrained = train_strong(dataset, fx.sensors, fx.basis, options);

  options.epochs = 150;
  const OperatorModel trained = train_strong(dataset, fx.sensors, fx.basis, options);

  Rng rng(47);
  for (int trial = 0; trial < 50; ++trial) {
    RealVector v(fx.sensors.size());
    // Half in-distribution scale, half far out of distribution.
    const double scale = trial % 2 == 0 ? 1.0 : 50.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = scale * rng.normal();
    for (const OperatorModel* model : {&untrained, &trained}) {
      const Vector eta = predict_update(*model, v);
      CHECK((fx.basis.B.adjoint() * eta).norm() <=
            1e-10 * std::max(eta.norm(), 1e-300));
    }
  }

  // Deterministic inference.
  RealVector v = RealVector::Ones(fx.sensors.size());
  CHECK(predict_update(trained, v) == predict_update(trained, v));
}

TEST_CASE("weak-mode penalty vanishes on strong-mode output") {
  OperatorFixture fx;
  const TrainingSet dataset = fx.dataset(10);
  TrainOptions options;
  options.epochs = 50;
  options.seed = 5;
  const OperatorModel strong = train_strong(dataset, fx.sensors, fx.basis, options);
  const Matrix predictions =
      strong_predict(strong.branch, strong.trunk_basis, dataset.inputs);
  const double penalty =
      (fx.basis.B.adjoint() * predictions).squaredNorm() / dataset.pair_count();
  CHECK(penalty <= 1e-18);
}

TEST_CASE("weak loss with zero penalty weight is the plain mean squared error") {
  OperatorFixture fx;
  const TrainingSet dataset = fx.dataset(10);
  TrainOptions options;
  options.epochs = 0;
  options.seed = 9;
  options.omega1 = 1.0;
  options.omega2 = 0.0;
  const OperatorModel model = train_weak(dataset, fx.sensors, fx.basis, options);

  const Matrix predictions =
      weak_predict(model.branch, model.trunk, model.centers, dataset.inputs);
  const double mse =
      (realify(Eigen::Map<const Vector>(predictions.data(), predictions.size())) -
       realify(Eigen::Map<const Vector>(dataset.targets.data(), dataset.targets.size())))
          .squaredNorm() /
      dataset.pair_count();
  const WeakEvaluation eval =
      weak_loss(model.branch, model.trunk, model.centers, model.coupling, 1.0, 0.0,
                dataset.inputs, dataset.targets, nullptr, nullptr);
  CHECK(std::abs(eval.loss - mse) <= 1e-10 * std::max(mse, 1.0));
}

TEST_CASE("weak and strong loss gradients match finite differences") {
  OperatorFixture fx;
  const TrainingSet dataset = fx.dataset(6);
  const int m = fx.sensors.size();
  Rng rng(53);

  // Compact networks keep the finite-difference sweep quick.
  MlpParams branch = mlp_init({m, m, 2 * m}, 3);
  MlpParams trunk = mlp_init({2, m, 2 * m}, 4);
  RealMatrix centers(2, m);
  for (int j = 0; j < m; ++j) {
    centers(0, j) = fx.sensors.sensors[static_cast<std::size_t>(j)].x1;
    centers(1, j) = fx.sensors.sensors[static_cast<std::size_t>(j)].x2;
  }

  for (double omega2 : {0.0, 1.0}) {
    MlpGradients branch_grads = zero_gradients(branch);
    MlpGradients trunk_grads = zero_gradients(trunk);
    weak_loss(branch, trunk, centers, fx.basis.B, 1.0, omega2, dataset.inputs,
              dataset.targets, &branch_grads, &trunk_grads);

    const Eigen::Index n_branch = flatten_parameters(branch).size();
    RealVector flat(n_branch + flatten_parameters(trunk).size());
    flat.head(n_branch) = flatten_parameters(branch);
    flat.tail(flat.size() - n_branch) = flatten_parameters(trunk);
    RealVector analytic(flat.size());
    analytic.head(n_branch) = flatten_gradients(branch_grads);
    analytic.tail(flat.size() - n_branch) = flatten_gradients(trunk_grads);

    auto loss_at = [&](const RealVector& theta) {
      MlpParams b = branch;
      MlpParams t = trunk;
      unflatten_parameters(b, theta.head(n_branch).eval());
      unflatten_parameters(t, theta.tail(theta.size() - n_branch).eval());
      return weak_loss(b, t, centers, fx.basis.B, 1.0, omega2, dataset.inputs,
                       dataset.targets, nullptr, nullptr)
          .loss;
    };
    CHECK(fd_worst_error(loss_at, flat, analytic, rng, 50) <= 1e-5);
  }

  const TrunkBasis trunk_basis = build_trunk_basis(fx.sensors, fx.basis);
  MlpGradients branch_grads = zero_gradients(branch);
  strong_loss(branch, trunk_basis, dataset.inputs, dataset.targets, &branch_grads);
  const RealVector flat = flatten_parameters(branch);
  const RealVector analytic = flatten_gradients(branch_grads);
  auto loss_at = [&](const RealVector& theta) {
    MlpParams b = branch;
    unflatten_parameters(b, theta);
    return strong_loss(b, trunk_basis, dataset.inputs, dataset.targets, nullptr);
  };
  CHECK(fd_worst_error(loss_at, flat, analytic, rng, 50) <= 1e-5);
}

TEST_CASE("training is reproducible and records loss curves") {
  OperatorFixture fx;
  const TrainingSet dataset = fx.dataset(12);
  TrainOptions options;
  options.epochs = 40;
  options.seed = 21;
  const OperatorModel a = train_strong(dataset, fx.sensors, fx.basis, options);
  const OperatorModel b = train_strong(dataset, fx.sensors, fx.basis, options);
  CHECK(flatten_parameters(a.branch) == flatten_parameters(b.branch));
  CHECK(a.history.size() == 41);
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    CHECK(a.history[i].train_loss == b.history[i].train_loss);
    CHECK(a.history[i].test_loss == b.history[i].test_loss);
  }
  CHECK(a.history.back().train_loss < a.history.front().train_loss);
}

TEST_CASE("hybrid reconstruction with the classical update is the classical state") {
  OperatorFixture fx;
  const DiscreteField u_true = solve_helmholtz(fx.mesh, fx.truth_cfg);
  const Measurement meas = observe(fx.sensors, u_true, 0.0, 0);

  const PbdwCoefficients classical =
      solve_two_step(fx.sensors.A, fx.basis.B, meas.y, 0.0);
  const PbdwSolution classical_solution =
      assemble_solution(fx.basis, fx.sensors, classical);

  PbdwCoefficients spliced;
  spliced.z = solve_background(fx.sensors.A, fx.basis.B, meas.y, 0.0);
  spliced.eta = classical.eta;
  spliced.xi = 0.0;
  const PbdwSolution hybrid_like = assemble_solution(fx.basis, fx.sensors, spliced);
  CHECK(hybrid_like.reconstructed.values == classical_solution.reconstructed.values);
}

TEST_CASE("hybrid reconstruction fills diagnostics and checks identity") {
  OperatorFixture fx;
  const TrainingSet dataset = fx.dataset(12);
  TrainOptions options;
  options.epochs = 100;
  options.seed = 31;
  const OperatorModel model = train_strong(dataset, fx.sensors, fx.basis, options);

  const DiscreteField u_true = solve_helmholtz(fx.mesh, fx.truth_cfg);
  const Measurement meas = observe(fx.sensors, u_true, 0.0, 0);
  RealVector v(fx.sensors.size());
  for (int i = 0; i < fx.sensors.size(); ++i) {
    const auto& s = fx.sensors.sensors[static_cast<std::size_t>(i)];
    v[i] = source_value(fx.truth_cfg, s.x1, s.x2).real();
  }
  const PbdwSolution hybrid =
      hybrid_reconstruct(model, fx.sensors, fx.basis, meas, v, 0.0);
  CHECK(hybrid.coefficients.orthogonality_residual <= 1e-10);
  CHECK(all_finite(hybrid.reconstructed.values));

  // Wrong-length input and mismatched artifacts are refused.
  CHECK_THROWS_AS(predict_update(model, RealVector::Ones(3)), ConfigError);
  BackgroundBasis other = fx.basis;
  other.modes.pop_back();
  other.B = fx.basis.B.leftCols(1);
  other.singular_values = fx.basis.singular_values.head(1);
  CHECK_THROWS_AS(hybrid_reconstruct(model, fx.sensors, other, meas, v, 0.0),
                  ConfigError);
}

TEST_CASE("model checkpoints round-trip and refuse mismatched artifacts") {
  OperatorFixture fx;
  const TrainingSet dataset = fx.dataset(10);
  TrainOptions options;
  options.epochs = 30;
  options.seed = 77;
  const OperatorModel model = train_strong(dataset, fx.sensors, fx.basis, options);

  const auto path = std::filesystem::temp_directory_path() / "pbdw_model_roundtrip.txt";
  save_model(path, model);
  const OperatorModel loaded = load_model(path, fx.sensors.hash(), fx.basis.hash());
  CHECK(flatten_parameters(loaded.branch) == flatten_parameters(model.branch));
  CHECK(loaded.trunk_basis.phi == model.trunk_basis.phi);
  CHECK(loaded.mode == OrthogonalityMode::Strong);

  CHECK_THROWS_AS(load_model(path, fx.sensors.hash() + 1, fx.basis.hash()), ConfigError);
  CHECK_THROWS_AS(load_model(path, fx.sensors.hash(), fx.basis.hash() + 1), ConfigError);
  std::filesystem::remove(path);

  const auto dataset_path =
      std::filesystem::temp_directory_path() / "pbdw_dataset_roundtrip.txt";
  save_training_set(dataset_path, dataset);
  const TrainingSet reloaded = load_training_set(dataset_path);
  std::filesystem::remove(dataset_path);
  CHECK(reloaded.inputs == dataset.inputs);
  CHECK(reloaded.targets == dataset.targets);
  CHECK(reloaded.descriptor == dataset.descriptor);
  CHECK(reloaded.sensor_set_hash == dataset.sensor_set_hash);
}

TEST_CASE("strong training reaches a lower floor than weak at equal budget") {
  OperatorFixture fx;
  const TrainingSet dataset = fx.dataset(30);
  TrainOptions options;
  options.epochs = 400;
  options.seed = 13;
  options.omega1 = 1.0;
  options.omega2 = 1.0;
  const OperatorModel strong = train_strong(dataset, fx.sensors, fx.basis, options);
  const OperatorModel weak = train_weak(dataset, fx.sensors, fx.basis, options);

  // Compare the data-fidelity floor reached on the training split.
  const double strong_mse = strong.history.back().train_loss;
  const WeakEvaluation weak_eval =
      weak_loss(weak.branch, weak.trunk, weak.centers, weak.coupling, 1.0, 0.0,
                dataset.inputs, dataset.targets, nullptr, nullptr);
  CHECK(strong_mse <= weak_eval.data_term);
}
