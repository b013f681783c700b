#pragma once

#include "pbdw/assimilation.hpp"
#include "pbdw/helmholtz.hpp"
#include "pbdw/nn.hpp"
#include "pbdw/reduced_basis.hpp"
#include "pbdw/sensors.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace pbdw {

/// Fixed trunk for the strong-orthogonality variant: column m holds the
/// representer-expansion coefficients of the m-th sensor direction after
/// projecting out everything the background span can observe, so any
/// combination Phi * b satisfies B^H (Phi b) = 0 structurally.
struct TrunkBasis {
  Matrix phi;  // M x M complex
};

/// Builds the trunk basis by orthogonalizing the sensor coordinate
/// directions against the background modes in the update-space metric.
/// Fails if a direction is annihilated (its field lies inside the span).
TrunkBasis build_trunk_basis(const SensorSet& set, const BackgroundBasis& basis);

enum class OrthogonalityMode { Weak, Strong };

struct LossRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double test_loss = 0.0;
  double orth_residual = 0.0;
};

struct OperatorModel {
  OrthogonalityMode mode = OrthogonalityMode::Strong;
  MlpParams branch;
  MlpParams trunk;        // weak mode
  TrunkBasis trunk_basis; // strong mode
  RealMatrix centers;     // 2 x M sensor centers (trunk inputs in weak mode)
  Matrix coupling;        // B bound at training time, for residual diagnostics
  std::uint64_t sensor_set_hash = 0;
  std::uint64_t basis_hash = 0;
  double omega1 = 1.0;
  double omega2 = 0.0;
  // Targets are normalized to unit magnitude for training; predictions are
  // scaled back by this factor.
  double target_scale = 1.0;
  std::vector<LossRecord> history;

  int sensor_count() const { return static_cast<int>(centers.cols()); }
};

/// Input functions sampled at the sensor centers paired with classical
/// assimilation update coefficients.
struct TrainingSet {
  RealMatrix inputs;  // M x K
  Matrix targets;     // M x K complex update coefficients
  std::string descriptor;
  std::uint64_t seed = 0;
  std::uint64_t sensor_set_hash = 0;
  std::uint64_t basis_hash = 0;

  int pair_count() const { return static_cast<int>(inputs.cols()); }
};

/// Randomized forcing family around the modeled source: amplitude, decay
/// rate and frequency multiplier of the bias term are drawn uniformly.
struct ForcingFamily {
  double amplitude_lo = 0.25;
  double amplitude_hi = 0.75;
  double decay_lo = 2.0;
  double decay_hi = 4.0;
  double frequency_lo = 4.0;
  double frequency_hi = 6.0;
};

TrainingSet generate_training_set(const Mesh& mesh, const HelmholtzConfig& truth_cfg,
                                  const ForcingFamily& family, const SensorSet& set,
                                  const BackgroundBasis& basis, int pair_count,
                                  std::uint64_t seed);

struct TrainOptions {
  int epochs = 5000;
  double learning_rate = 1e-3;
  double lr_decay = 0.999;  // per-epoch multiplier
  double test_fraction = 0.2;
  std::uint64_t seed = 0;
  int branch_hidden_layers = 10;
  int trunk_hidden_layers = 4;
  double omega1 = 1.0;
  double omega2 = 1.0;
};

OperatorModel train_weak(const TrainingSet& dataset, const SensorSet& set,
                         const BackgroundBasis& basis, const TrainOptions& options);

OperatorModel train_strong(const TrainingSet& dataset, const SensorSet& set,
                           const BackgroundBasis& basis, const TrainOptions& options);

/// Update coefficients for a new input function sampled at the model's
/// sensor centers. A forward pass and fixed linear maps only; no dense
/// solve happens on this path.
Vector predict_update(const OperatorModel& model, const RealVector& v_sampled);

/// Hybrid reconstruction: physics-solved background stage plus the
/// network-predicted update.
PbdwSolution hybrid_reconstruct(const OperatorModel& model, const SensorSet& set,
                                const BackgroundBasis& basis, const Measurement& measurement,
                                const RealVector& v_sampled, double xi);

// --- Loss evaluations (exposed for training and for gradient oracles) ----

struct WeakEvaluation {
  double loss = 0.0;
  double data_term = 0.0;
  double penalty_term = 0.0;
};

/// Weak-orthogonality loss: omega1 * mean squared data error plus
/// omega2 * mean squared background coupling of the prediction. Gradient
/// outputs are accumulated when non-null.
WeakEvaluation weak_loss(const MlpParams& branch, const MlpParams& trunk,
                         const RealMatrix& centers, const Matrix& coupling,
                         double omega1, double omega2, const RealMatrix& inputs,
                         const Matrix& targets, MlpGradients* branch_grads,
                         MlpGradients* trunk_grads);

/// Strong-mode loss: mean squared error of Phi * branch(v) against the
/// targets.
double strong_loss(const MlpParams& branch, const TrunkBasis& trunk_basis,
                   const RealMatrix& inputs, const Matrix& targets,
                   MlpGradients* branch_grads);

/// Orthogonality residual |B^H eta| / max(|eta|, tiny) averaged over the
/// columns of a prediction batch.
double mean_orthogonality_residual(const Matrix& coupling, const Matrix& predictions);

Matrix weak_predict(const MlpParams& branch, const MlpParams& trunk,
                    const RealMatrix& centers, const RealMatrix& inputs);
Matrix strong_predict(const MlpParams& branch, const TrunkBasis& trunk_basis,
                      const RealMatrix& inputs);

// --- Checkpointing ---------------------------------------------------------

void save_model(const std::filesystem::path& path, const OperatorModel& model);
OperatorModel load_model(const std::filesystem::path& path, std::uint64_t expect_sensor_hash,
                         std::uint64_t expect_basis_hash);

void save_training_set(const std::filesystem::path& path, const TrainingSet& dataset);
TrainingSet load_training_set(const std::filesystem::path& path);

}  // namespace pbdw
