#include "pbdw/operator_model.hpp"

#include "pbdw/io.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <fstream>
#include <sstream>

namespace pbdw {

namespace {

constexpr double kTiny = 1e-300;

RealMatrix sensor_centers(const SensorSet& set) {
  RealMatrix centers(2, set.size());
  for (int m = 0; m < set.size(); ++m) {
    centers(0, m) = set.sensors[static_cast<std::size_t>(m)].x1;
    centers(1, m) = set.sensors[static_cast<std::size_t>(m)].x2;
  }
  return centers;
}

}  // namespace

TrunkBasis build_trunk_basis(const SensorSet& set, const BackgroundBasis& basis) {
  const int m = set.size();
  const int n = basis.size();
  if (m < 1) throw ConfigError("build_trunk_basis: empty sensor set");
  TrunkBasis trunk;
  if (n == 0) {
    trunk.phi = Matrix::Identity(m, m);
    return trunk;
  }
  if (basis.B.rows() != m) {
    throw ConfigError("build_trunk_basis: basis not bound to this sensor set");
  }

  // Orthonormalize the observed background directions A^{-1} B in the
  // update-space metric (two modified Gram-Schmidt passes).
  Eigen::LLT<Matrix> llt(set.A);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("build_trunk_basis: update Gram not positive definite");
  }
  Matrix w = llt.solve(basis.B);
  for (int pass = 0; pass < 2; ++pass) {
    for (int j = 0; j < n; ++j) {
      Vector col = w.col(j);
      for (int k = 0; k < j; ++k) {
        const Complex overlap = w.col(k).dot(set.A * col);
        col -= overlap * w.col(k);
      }
      const double norm = std::sqrt(std::abs(col.dot(set.A * col)));
      if (norm <= 1e-14) {
        throw NumericalError("build_trunk_basis: background directions degenerate "
                             "in the update space");
      }
      w.col(j) = col / norm;
    }
  }

  // Project each sensor coordinate direction out of the constrained span.
  const Matrix aw = set.A * w;  // column k: A w_k, so <e_m, w_k>_A = conj(aw(m, k))
  trunk.phi = Matrix::Identity(m, m);
  for (int col = 0; col < m; ++col) {
    Vector phi = trunk.phi.col(col);
    for (int k = 0; k < n; ++k) {
      phi -= std::conj(aw(col, k)) * w.col(k);
    }
    if (phi.norm() <= 1e-12) {
      throw NumericalError("build_trunk_basis: sensor direction " + std::to_string(col) +
                           " lies fully inside the background span");
    }
    trunk.phi.col(col) = phi;
  }
  return trunk;
}

TrainingSet generate_training_set(const Mesh& mesh, const HelmholtzConfig& truth_cfg,
                                  const ForcingFamily& family, const SensorSet& set,
                                  const BackgroundBasis& basis, int pair_count,
                                  std::uint64_t seed) {
  if (pair_count < 1) throw ConfigError("generate_training_set: need at least one pair");
  if (basis.B.rows() != set.size()) {
    throw ConfigError("generate_training_set: basis not bound to this sensor set");
  }
  const HelmholtzSolver solver(mesh);
  const RealMatrix centers = sensor_centers(set);

  TrainingSet dataset;
  dataset.inputs.resize(set.size(), pair_count);
  dataset.targets.resize(set.size(), pair_count);
  dataset.seed = seed;
  dataset.sensor_set_hash = set.hash();
  dataset.basis_hash = basis.hash();
  {
    std::ostringstream descriptor;
    descriptor << "bias family amp[" << family.amplitude_lo << "," << family.amplitude_hi
               << "] decay[" << family.decay_lo << "," << family.decay_hi << "] freq["
               << family.frequency_lo << "," << family.frequency_hi << "] mu="
               << truth_cfg.mu;
    dataset.descriptor = descriptor.str();
  }

  Rng rng(seed);
  for (int i = 0; i < pair_count; ++i) {
    const double amplitude = rng.uniform(family.amplitude_lo, family.amplitude_hi);
    const double decay = rng.uniform(family.decay_lo, family.decay_hi);
    const double frequency = rng.uniform(family.frequency_lo, family.frequency_hi);
    const double mu = truth_cfg.mu;
    auto forcing = [amplitude, decay, frequency, mu](double x1, double x2) -> Complex {
      const double bias =
          -amplitude * std::sin(std::exp(-decay * x1) * std::sin(frequency * mu * x2));
      return Complex(sinusoidal_source(x1, x2, mu) + bias, 0.0);
    };
    HelmholtzConfig cfg = truth_cfg;
    cfg.forcing_override = forcing;
    const DiscreteField truth = solver.solve(cfg);
    const Measurement meas = observe(set, truth, 0.0, 0);
    const PbdwCoefficients coeffs = solve_saddle(set.A, basis.B, meas.y, 0.0);
    dataset.targets.col(i) = coeffs.eta;
    for (int m = 0; m < set.size(); ++m) {
      dataset.inputs(m, i) = forcing(centers(0, m), centers(1, m)).real();
    }
  }
  return dataset;
}

Matrix weak_predict(const MlpParams& branch, const MlpParams& trunk,
                    const RealMatrix& centers, const RealMatrix& inputs) {
  const int m = static_cast<int>(centers.cols());
  const RealMatrix branch_out = mlp_forward(branch, inputs);       // 2M x K
  const RealMatrix trunk_out = mlp_forward(trunk, centers);        // 2M x M
  const RealMatrix re = trunk_out.topRows(m).transpose() * branch_out.topRows(m);
  const RealMatrix im = trunk_out.bottomRows(m).transpose() * branch_out.bottomRows(m);
  Matrix out(m, inputs.cols());
  out.real() = re;
  out.imag() = im;
  return out;
}

Matrix strong_predict(const MlpParams& branch, const TrunkBasis& trunk_basis,
                      const RealMatrix& inputs) {
  const int m = static_cast<int>(trunk_basis.phi.rows());
  const RealMatrix branch_out = mlp_forward(branch, inputs);  // 2M x K
  Matrix beta(m, inputs.cols());
  beta.real() = branch_out.topRows(m);
  beta.imag() = branch_out.bottomRows(m);
  return trunk_basis.phi * beta;
}

double mean_orthogonality_residual(const Matrix& coupling, const Matrix& predictions) {
  if (coupling.cols() == 0 || predictions.cols() == 0) return 0.0;
  double total = 0.0;
  for (Eigen::Index i = 0; i < predictions.cols(); ++i) {
    const double eta_norm = predictions.col(i).norm();
    total += (coupling.adjoint() * predictions.col(i)).norm() / std::max(eta_norm, kTiny);
  }
  return total / static_cast<double>(predictions.cols());
}

WeakEvaluation weak_loss(const MlpParams& branch, const MlpParams& trunk,
                         const RealMatrix& centers, const Matrix& coupling,
                         double omega1, double omega2, const RealMatrix& inputs,
                         const Matrix& targets, MlpGradients* branch_grads,
                         MlpGradients* trunk_grads) {
  const int m = static_cast<int>(centers.cols());
  const int k = static_cast<int>(inputs.cols());
  if (targets.cols() != k || targets.rows() != m) {
    throw ConfigError("weak_loss: target batch shape mismatch");
  }

  MlpTape branch_tape;
  MlpTape trunk_tape;
  const RealMatrix branch_out = mlp_forward(branch, inputs, branch_tape);
  const RealMatrix trunk_out = mlp_forward(trunk, centers, trunk_tape);

  const RealMatrix re = trunk_out.topRows(m).transpose() * branch_out.topRows(m);
  const RealMatrix im = trunk_out.bottomRows(m).transpose() * branch_out.bottomRows(m);

  const RealMatrix err_re = re - targets.real();
  const RealMatrix err_im = im - targets.imag();
  WeakEvaluation eval;
  eval.data_term = (err_re.squaredNorm() + err_im.squaredNorm()) / k;

  Matrix eta(m, k);
  eta.real() = re;
  eta.imag() = im;
  const Matrix coupled = coupling.adjoint() * eta;  // N x K
  eval.penalty_term = coupled.squaredNorm() / k;
  eval.loss = omega1 * eval.data_term + omega2 * eval.penalty_term;

  if (branch_grads != nullptr || trunk_grads != nullptr) {
    RealMatrix d_re = (2.0 * omega1 / k) * err_re;
    RealMatrix d_im = (2.0 * omega1 / k) * err_im;
    if (coupling.cols() > 0 && omega2 != 0.0) {
      const Matrix back = coupling * coupled;  // M x K
      d_re += (2.0 * omega2 / k) * back.real();
      d_im += (2.0 * omega2 / k) * back.imag();
    }
    RealMatrix d_branch(2 * m, k);
    d_branch.topRows(m) = trunk_out.topRows(m) * d_re;
    d_branch.bottomRows(m) = trunk_out.bottomRows(m) * d_im;
    RealMatrix d_trunk(2 * m, m);
    d_trunk.topRows(m) = branch_out.topRows(m) * d_re.transpose();
    d_trunk.bottomRows(m) = branch_out.bottomRows(m) * d_im.transpose();
    if (branch_grads != nullptr) {
      mlp_backward(branch, branch_tape, d_branch, *branch_grads);
    }
    if (trunk_grads != nullptr) {
      mlp_backward(trunk, trunk_tape, d_trunk, *trunk_grads);
    }
  }
  return eval;
}

double strong_loss(const MlpParams& branch, const TrunkBasis& trunk_basis,
                   const RealMatrix& inputs, const Matrix& targets,
                   MlpGradients* branch_grads) {
  const int m = static_cast<int>(trunk_basis.phi.rows());
  const int k = static_cast<int>(inputs.cols());
  if (targets.cols() != k || targets.rows() != m) {
    throw ConfigError("strong_loss: target batch shape mismatch");
  }

  MlpTape tape;
  const RealMatrix branch_out = mlp_forward(branch, inputs, tape);
  Matrix beta(m, k);
  beta.real() = branch_out.topRows(m);
  beta.imag() = branch_out.bottomRows(m);
  const Matrix eta = trunk_basis.phi * beta;

  const Matrix err = eta - targets;
  const double loss = err.squaredNorm() / k;

  if (branch_grads != nullptr) {
    const RealMatrix d_re = (2.0 / k) * err.real();
    const RealMatrix d_im = (2.0 / k) * err.imag();
    const RealMatrix phi_re = trunk_basis.phi.real();
    const RealMatrix phi_im = trunk_basis.phi.imag();
    RealMatrix d_branch(2 * m, k);
    d_branch.topRows(m) = phi_re.transpose() * d_re + phi_im.transpose() * d_im;
    d_branch.bottomRows(m) = -phi_im.transpose() * d_re + phi_re.transpose() * d_im;
    mlp_backward(branch, tape, d_branch, *branch_grads);
  }
  return loss;
}

namespace {

struct Split {
  RealMatrix train_in, test_in;
  Matrix train_target, test_target;
};

Split split_dataset(const TrainingSet& dataset, double test_fraction,
                    std::uint64_t seed) {
  const int k = dataset.pair_count();
  int n_test = static_cast<int>(std::floor(test_fraction * k));
  if (k > 1 && n_test == 0 && test_fraction > 0.0) n_test = 1;
  if (n_test >= k) n_test = k - 1;
  Rng rng(seed ^ 0x9e3779b97f4a7c15ull);
  const auto perm = rng.permutation(static_cast<std::size_t>(k));
  Split split;
  const int n_train = k - n_test;
  split.train_in.resize(dataset.inputs.rows(), n_train);
  split.train_target.resize(dataset.targets.rows(), n_train);
  split.test_in.resize(dataset.inputs.rows(), std::max(n_test, 1));
  split.test_target.resize(dataset.targets.rows(), std::max(n_test, 1));
  for (int i = 0; i < n_train; ++i) {
    split.train_in.col(i) = dataset.inputs.col(static_cast<Eigen::Index>(perm[i]));
    split.train_target.col(i) = dataset.targets.col(static_cast<Eigen::Index>(perm[i]));
  }
  for (int i = 0; i < n_test; ++i) {
    split.test_in.col(i) =
        dataset.inputs.col(static_cast<Eigen::Index>(perm[n_train + i]));
    split.test_target.col(i) =
        dataset.targets.col(static_cast<Eigen::Index>(perm[n_train + i]));
  }
  if (n_test == 0) {  // degenerate split: reuse the training data for curves
    split.test_in = split.train_in;
    split.test_target = split.train_target;
  }
  return split;
}

std::vector<int> layer_widths(int input, int hidden_width, int hidden_layers, int output) {
  std::vector<int> widths;
  widths.push_back(input);
  for (int l = 0; l < hidden_layers; ++l) widths.push_back(hidden_width);
  widths.push_back(output);
  return widths;
}

void check_dataset(const TrainingSet& dataset, const SensorSet& set,
                   const BackgroundBasis& basis) {
  if (dataset.pair_count() < 1) throw ConfigError("train: empty dataset");
  if (dataset.inputs.rows() != set.size()) {
    throw ConfigError("train: dataset sensor dimension mismatch");
  }
  if (dataset.sensor_set_hash != set.hash()) {
    throw ConfigError("train: dataset was generated against a different sensor set");
  }
  if (dataset.basis_hash != basis.hash()) {
    throw ConfigError("train: dataset was generated against a different basis");
  }
}

}  // namespace

OperatorModel train_weak(const TrainingSet& dataset, const SensorSet& set,
                         const BackgroundBasis& basis, const TrainOptions& options) {
  check_dataset(dataset, set, basis);
  const int m = set.size();

  OperatorModel model;
  model.mode = OrthogonalityMode::Weak;
  model.centers = sensor_centers(set);
  model.coupling = basis.B;
  model.sensor_set_hash = set.hash();
  model.basis_hash = basis.hash();
  model.omega1 = options.omega1;
  model.omega2 = options.omega2;
  model.target_scale = std::max(dataset.targets.cwiseAbs().maxCoeff(), 1e-300);
  model.branch = mlp_init(layer_widths(m, m, options.branch_hidden_layers, 2 * m),
                          options.seed);
  model.trunk = mlp_init(layer_widths(2, m, options.trunk_hidden_layers, 2 * m),
                         options.seed + 1);

  Split split = split_dataset(dataset, options.test_fraction, options.seed);
  split.train_target /= model.target_scale;
  split.test_target /= model.target_scale;
  AdamState branch_state = AdamState::init(model.branch);
  AdamState trunk_state = AdamState::init(model.trunk);
  double lr = options.learning_rate;

  auto record = [&](int epoch) {
    const WeakEvaluation train_eval =
        weak_loss(model.branch, model.trunk, model.centers, model.coupling,
                  options.omega1, options.omega2, split.train_in, split.train_target,
                  nullptr, nullptr);
    const WeakEvaluation test_eval =
        weak_loss(model.branch, model.trunk, model.centers, model.coupling,
                  options.omega1, options.omega2, split.test_in, split.test_target,
                  nullptr, nullptr);
    const Matrix predictions =
        weak_predict(model.branch, model.trunk, model.centers, split.test_in);
    model.history.push_back(LossRecord{epoch, train_eval.loss, test_eval.loss,
                                       mean_orthogonality_residual(model.coupling,
                                                                   predictions)});
  };
  record(0);

  for (int epoch = 1; epoch <= options.epochs; ++epoch) {
    MlpGradients branch_grads = zero_gradients(model.branch);
    MlpGradients trunk_grads = zero_gradients(model.trunk);
    const WeakEvaluation eval =
        weak_loss(model.branch, model.trunk, model.centers, model.coupling,
                  options.omega1, options.omega2, split.train_in, split.train_target,
                  &branch_grads, &trunk_grads);
    if (!std::isfinite(eval.loss)) {
      throw NumericalError("train_weak: loss diverged at epoch " + std::to_string(epoch));
    }
    adam_step(model.branch, branch_grads, branch_state, lr);
    adam_step(model.trunk, trunk_grads, trunk_state, lr);
    lr *= options.lr_decay;
    record(epoch);
  }
  return model;
}

OperatorModel train_strong(const TrainingSet& dataset, const SensorSet& set,
                           const BackgroundBasis& basis, const TrainOptions& options) {
  check_dataset(dataset, set, basis);
  const int m = set.size();

  OperatorModel model;
  model.mode = OrthogonalityMode::Strong;
  model.centers = sensor_centers(set);
  model.coupling = basis.B;
  model.sensor_set_hash = set.hash();
  model.basis_hash = basis.hash();
  model.target_scale = std::max(dataset.targets.cwiseAbs().maxCoeff(), 1e-300);
  model.trunk_basis = build_trunk_basis(set, basis);
  model.branch = mlp_init(layer_widths(m, m, options.branch_hidden_layers, 2 * m),
                          options.seed);

  Split split = split_dataset(dataset, options.test_fraction, options.seed);
  split.train_target /= model.target_scale;
  split.test_target /= model.target_scale;
  AdamState branch_state = AdamState::init(model.branch);
  double lr = options.learning_rate;

  auto record = [&](int epoch) {
    const double train = strong_loss(model.branch, model.trunk_basis, split.train_in,
                                     split.train_target, nullptr);
    const double test = strong_loss(model.branch, model.trunk_basis, split.test_in,
                                    split.test_target, nullptr);
    const Matrix predictions =
        strong_predict(model.branch, model.trunk_basis, split.test_in);
    model.history.push_back(LossRecord{epoch, train, test,
                                       mean_orthogonality_residual(model.coupling,
                                                                   predictions)});
  };
  record(0);

  for (int epoch = 1; epoch <= options.epochs; ++epoch) {
    MlpGradients branch_grads = zero_gradients(model.branch);
    const double loss = strong_loss(model.branch, model.trunk_basis, split.train_in,
                                    split.train_target, &branch_grads);
    if (!std::isfinite(loss)) {
      throw NumericalError("train_strong: loss diverged at epoch " + std::to_string(epoch));
    }
    adam_step(model.branch, branch_grads, branch_state, lr);
    lr *= options.lr_decay;
    record(epoch);
  }
  return model;
}

Vector predict_update(const OperatorModel& model, const RealVector& v_sampled) {
  if (v_sampled.size() != model.sensor_count()) {
    throw ConfigError("predict_update: input sampled at " + std::to_string(v_sampled.size()) +
                      " points, model expects " + std::to_string(model.sensor_count()));
  }
  const RealMatrix input = v_sampled;
  if (model.mode == OrthogonalityMode::Strong) {
    return model.target_scale *
           strong_predict(model.branch, model.trunk_basis, input).col(0);
  }
  return model.target_scale *
         weak_predict(model.branch, model.trunk, model.centers, input).col(0);
}

PbdwSolution hybrid_reconstruct(const OperatorModel& model, const SensorSet& set,
                                const BackgroundBasis& basis, const Measurement& measurement,
                                const RealVector& v_sampled, double xi) {
  if (model.sensor_set_hash != set.hash()) {
    throw ConfigError("hybrid_reconstruct: model/sensor-set mismatch");
  }
  if (model.basis_hash != basis.hash()) {
    throw ConfigError("hybrid_reconstruct: model/basis mismatch");
  }
  PbdwCoefficients coefficients;
  coefficients.z = solve_background(set.A, basis.B, measurement.y, xi);
  coefficients.eta = predict_update(model, v_sampled);
  coefficients.xi = xi;
  fill_pbdw_diagnostics(coefficients, set.A, basis.B, measurement.y);
  return assemble_solution(basis, set, std::move(coefficients));
}

// --- Checkpoint format ------------------------------------------------------

namespace {

constexpr const char* kModelMagic = "pbdw-model v1";
constexpr const char* kDatasetMagic = "pbdw-dataset v1";

void write_mlp(std::ostream& out, const MlpParams& params) {
  out << params.widths.size();
  for (int w : params.widths) out << ' ' << w;
  out << ' ' << params.seed << '\n';
  for (std::size_t l = 0; l < params.layer_count(); ++l) {
    for (Eigen::Index i = 0; i < params.weights[l].size(); ++i) {
      out << format_double(params.weights[l].data()[i]) << '\n';
    }
    for (Eigen::Index i = 0; i < params.biases[l].size(); ++i) {
      out << format_double(params.biases[l].data()[i]) << '\n';
    }
  }
}

MlpParams read_mlp(std::istream& in) {
  std::size_t n_widths = 0;
  if (!(in >> n_widths) || n_widths < 2) {
    throw ConfigError("model checkpoint: malformed layer list");
  }
  std::vector<int> widths(n_widths);
  for (auto& w : widths) in >> w;
  std::uint64_t seed = 0;
  in >> seed;
  MlpParams params = mlp_init(widths, 0);
  params.seed = seed;
  for (std::size_t l = 0; l < params.layer_count(); ++l) {
    for (Eigen::Index i = 0; i < params.weights[l].size(); ++i) {
      in >> params.weights[l].data()[i];
    }
    for (Eigen::Index i = 0; i < params.biases[l].size(); ++i) {
      in >> params.biases[l].data()[i];
    }
  }
  if (!in) throw ConfigError("model checkpoint: truncated parameter blob");
  return params;
}

void write_complex_matrix(std::ostream& out, const Matrix& m) {
  out << m.rows() << ' ' << m.cols() << '\n';
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      out << format_double(m(i, j).real()) << ' ' << format_double(m(i, j).imag())
          << '\n';
    }
  }
}

Matrix read_complex_matrix(std::istream& in) {
  Eigen::Index rows = 0, cols = 0;
  if (!(in >> rows >> cols) || rows < 0 || cols < 0) {
    throw ConfigError("checkpoint: malformed matrix header");
  }
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) {
      double re = 0.0, im = 0.0;
      in >> re >> im;
      m(i, j) = Complex(re, im);
    }
  }
  if (!in) throw ConfigError("checkpoint: truncated matrix blob");
  return m;
}

void write_real_matrix(std::ostream& out, const RealMatrix& m) {
  out << m.rows() << ' ' << m.cols() << '\n';
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      out << format_double(m(i, j)) << '\n';
    }
  }
}

RealMatrix read_real_matrix(std::istream& in) {
  Eigen::Index rows = 0, cols = 0;
  if (!(in >> rows >> cols) || rows < 0 || cols < 0) {
    throw ConfigError("checkpoint: malformed matrix header");
  }
  RealMatrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) in >> m(i, j);
  }
  if (!in) throw ConfigError("checkpoint: truncated matrix blob");
  return m;
}

}  // namespace

void save_model(const std::filesystem::path& path, const OperatorModel& model) {
  std::ofstream out(path);
  if (!out) throw ConfigError("save_model: cannot open " + path.string());
  out << kModelMagic << '\n';
  out << (model.mode == OrthogonalityMode::Weak ? "weak" : "strong") << '\n';
  out << model.sensor_set_hash << ' ' << model.basis_hash << ' '
      << format_double(model.omega1) << ' ' << format_double(model.omega2) << ' '
      << format_double(model.target_scale) << '\n';
  write_real_matrix(out, model.centers);
  write_complex_matrix(out, model.coupling);
  write_mlp(out, model.branch);
  if (model.mode == OrthogonalityMode::Weak) {
    write_mlp(out, model.trunk);
  } else {
    write_complex_matrix(out, model.trunk_basis.phi);
  }
  if (!out) throw ConfigError("save_model: write failed for " + path.string());
}

OperatorModel load_model(const std::filesystem::path& path, std::uint64_t expect_sensor_hash,
                         std::uint64_t expect_basis_hash) {
  std::ifstream in(path);
  if (!in) throw ConfigError("load_model: cannot open " + path.string());
  std::string magic;
  std::getline(in, magic);
  if (magic != kModelMagic) {
    throw ConfigError("load_model: unrecognized checkpoint header in " + path.string());
  }
  std::string mode;
  in >> mode;
  OperatorModel model;
  if (mode == "weak") {
    model.mode = OrthogonalityMode::Weak;
  } else if (mode == "strong") {
    model.mode = OrthogonalityMode::Strong;
  } else {
    throw ConfigError("load_model: unknown mode tag '" + mode + "'");
  }
  in >> model.sensor_set_hash >> model.basis_hash >> model.omega1 >> model.omega2;
  model.centers = read_real_matrix(in);
  model.coupling = read_complex_matrix(in);
  model.branch = read_mlp(in);
  if (model.mode == OrthogonalityMode::Weak) {
    model.trunk = read_mlp(in);
  } else {
    model.trunk_basis.phi = read_complex_matrix(in);
    // The structural constraint must survive the round trip.
    const double residual = (model.coupling.adjoint() * model.trunk_basis.phi).norm();
    if (residual > 1e-10 * std::max(1.0, model.trunk_basis.phi.norm())) {
      throw ConfigError("load_model: stored trunk basis violates orthogonality");
    }
  }
  if (expect_sensor_hash != 0 && model.sensor_set_hash != expect_sensor_hash) {
    throw ConfigError("load_model: checkpoint was trained against a different sensor set");
  }
  if (expect_basis_hash != 0 && model.basis_hash != expect_basis_hash) {
    throw ConfigError("load_model: checkpoint was trained against a different basis");
  }
  return model;
}

void save_training_set(const std::filesystem::path& path, const TrainingSet& dataset) {
  std::ofstream out(path);
  if (!out) throw ConfigError("save_training_set: cannot open " + path.string());
  out << kDatasetMagic << '\n';
  out << dataset.seed << ' ' << dataset.sensor_set_hash << ' ' << dataset.basis_hash
      << '\n';
  out << dataset.descriptor << '\n';
  write_real_matrix(out, dataset.inputs);
  write_complex_matrix(out, dataset.targets);
  if (!out) throw ConfigError("save_training_set: write failed for " + path.string());
}

TrainingSet load_training_set(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("load_training_set: cannot open " + path.string());
  std::string magic;
  std::getline(in, magic);
  if (magic != kDatasetMagic) {
    throw ConfigError("load_training_set: unrecognized header in " + path.string());
  }
  TrainingSet dataset;
  in >> dataset.seed >> dataset.sensor_set_hash >> dataset.basis_hash;
  in.ignore();
  std::getline(in, dataset.descriptor);
  dataset.inputs = read_real_matrix(in);
  dataset.targets = read_complex_matrix(in);
  if (dataset.inputs.cols() != dataset.targets.cols()) {
    throw ConfigError("load_training_set: input/target pair count mismatch");
  }
  return dataset;
}

}  // namespace pbdw
