#pragma once

#include "pbdw/rng.hpp"
#include "pbdw/types.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace pbdw {

/// Dense feedforward network: affine + tanh on hidden layers, affine output.
/// `widths` lists every layer size including input and output.
struct MlpParams {
  std::vector<int> widths;
  std::vector<RealMatrix> weights;  // weights[l]: widths[l+1] x widths[l]
  std::vector<RealVector> biases;
  std::uint64_t seed = 0;

  int input_dim() const { return widths.front(); }
  int output_dim() const { return widths.back(); }
  std::size_t layer_count() const { return weights.size(); }
  std::size_t parameter_count() const;

  void validate() const;
};

/// Glorot-uniform initialization, deterministic per seed.
MlpParams mlp_init(const std::vector<int>& widths, std::uint64_t seed);

/// Forward pass on a batch (one column per sample).
RealMatrix mlp_forward(const MlpParams& params, const RealMatrix& input);

/// Forward pass retaining per-layer activations for backpropagation.
struct MlpTape {
  std::vector<RealMatrix> activations;  // activations[0] = input, back() = output
};

RealMatrix mlp_forward(const MlpParams& params, const RealMatrix& input, MlpTape& tape);

/// Parameter-shaped gradient container.
struct MlpGradients {
  std::vector<RealMatrix> weights;
  std::vector<RealVector> biases;

  void scale(double s);
  void accumulate(const MlpGradients& other);
};

MlpGradients zero_gradients(const MlpParams& params);

/// Reverse-mode sweep: given dL/d(output batch), accumulates parameter
/// gradients and returns dL/d(input batch).
RealMatrix mlp_backward(const MlpParams& params, const MlpTape& tape,
                        const RealMatrix& output_gradient, MlpGradients& grads);

/// Loss defined on the network output batch: returns the value and fills
/// dL/d(output).
using OutputLoss = std::function<double(const RealMatrix& output, RealMatrix& gradient)>;

/// Gradient of loss(mlp(input)) with respect to all parameters.
std::pair<double, MlpGradients> mlp_gradient(const MlpParams& params,
                                             const RealMatrix& input,
                                             const OutputLoss& loss);

/// Adam state (first/second moments plus step counter).
struct AdamState {
  std::vector<RealMatrix> m_weights;
  std::vector<RealMatrix> v_weights;
  std::vector<RealVector> m_biases;
  std::vector<RealVector> v_biases;
  long step = 0;

  static AdamState init(const MlpParams& params);
};

struct AdamSettings {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

void adam_step(MlpParams& params, const MlpGradients& grads, AdamState& state,
               double learning_rate, const AdamSettings& settings = {});

/// Flatten/unflatten helpers used by checkpointing and finite-difference
/// oracles.
RealVector flatten_parameters(const MlpParams& params);
void unflatten_parameters(MlpParams& params, const RealVector& flat);
RealVector flatten_gradients(const MlpGradients& grads);

}  // namespace pbdw
