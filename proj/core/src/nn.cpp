#include "pbdw/nn.hpp"

#include <cmath>

namespace pbdw {

std::size_t MlpParams::parameter_count() const {
  std::size_t count = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    count += static_cast<std::size_t>(weights[l].size()) +
             static_cast<std::size_t>(biases[l].size());
  }
  return count;
}

void MlpParams::validate() const {
  if (widths.size() < 2) throw ConfigError("mlp: need at least input and output layers");
  if (weights.size() != widths.size() - 1 || biases.size() != weights.size()) {
    throw ConfigError("mlp: parameter/width bookkeeping mismatch");
  }
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (weights[l].rows() != widths[l + 1] || weights[l].cols() != widths[l] ||
        biases[l].size() != widths[l + 1]) {
      throw ConfigError("mlp: shape chain broken at layer " + std::to_string(l));
    }
    if (!weights[l].allFinite() || !biases[l].allFinite()) {
      throw NumericalError("mlp: non-finite parameters at layer " + std::to_string(l));
    }
  }
}

MlpParams mlp_init(const std::vector<int>& widths, std::uint64_t seed) {
  if (widths.size() < 2) throw ConfigError("mlp_init: need at least 2 layers");
  for (int w : widths) {
    if (w < 1) throw ConfigError("mlp_init: nonpositive layer width");
  }
  MlpParams params;
  params.widths = widths;
  params.seed = seed;
  Rng rng(seed);
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const int fan_in = widths[l];
    const int fan_out = widths[l + 1];
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    RealMatrix w(fan_out, fan_in);
    for (int i = 0; i < fan_out; ++i) {
      for (int j = 0; j < fan_in; ++j) {
        w(i, j) = rng.uniform(-limit, limit);
      }
    }
    params.weights.push_back(std::move(w));
    params.biases.push_back(RealVector::Zero(fan_out));
  }
  return params;
}

RealMatrix mlp_forward(const MlpParams& params, const RealMatrix& input) {
  MlpTape tape;
  return mlp_forward(params, input, tape);
}

RealMatrix mlp_forward(const MlpParams& params, const RealMatrix& input, MlpTape& tape) {
  if (input.rows() != params.input_dim()) {
    throw ConfigError("mlp_forward: input dimension " + std::to_string(input.rows()) +
                      " != expected " + std::to_string(params.input_dim()));
  }
  tape.activations.clear();
  tape.activations.reserve(params.layer_count() + 1);
  tape.activations.push_back(input);
  RealMatrix current = input;
  for (std::size_t l = 0; l < params.layer_count(); ++l) {
    current = (params.weights[l] * current).colwise() + params.biases[l];
    if (l + 1 < params.layer_count()) {
      current = current.array().tanh();
    }
    tape.activations.push_back(current);
  }
  return current;
}

void MlpGradients::scale(double s) {
  for (auto& w : weights) w *= s;
  for (auto& b : biases) b *= s;
}

void MlpGradients::accumulate(const MlpGradients& other) {
  for (std::size_t l = 0; l < weights.size(); ++l) {
    weights[l] += other.weights[l];
    biases[l] += other.biases[l];
  }
}

MlpGradients zero_gradients(const MlpParams& params) {
  MlpGradients g;
  for (std::size_t l = 0; l < params.layer_count(); ++l) {
    g.weights.push_back(RealMatrix::Zero(params.weights[l].rows(), params.weights[l].cols()));
    g.biases.push_back(RealVector::Zero(params.biases[l].size()));
  }
  return g;
}

RealMatrix mlp_backward(const MlpParams& params, const MlpTape& tape,
                        const RealMatrix& output_gradient, MlpGradients& grads) {
  if (tape.activations.size() != params.layer_count() + 1) {
    throw ConfigError("mlp_backward: tape does not match network depth");
  }
  RealMatrix delta = output_gradient;
  for (std::size_t l = params.layer_count(); l-- > 0;) {
    if (l + 1 < params.layer_count()) {
      // tanh'(x) = 1 - tanh(x)^2, and the tape stores tanh(x) itself.
      delta = delta.cwiseProduct(
          (1.0 - tape.activations[l + 1].array().square()).matrix());
    }
    grads.weights[l] += delta * tape.activations[l].transpose();
    grads.biases[l] += delta.rowwise().sum();
    if (l > 0) {
      delta = (params.weights[l].transpose() * delta).eval();
    } else {
      return params.weights[0].transpose() * delta;
    }
  }
  return RealMatrix();
}

std::pair<double, MlpGradients> mlp_gradient(const MlpParams& params,
                                             const RealMatrix& input,
                                             const OutputLoss& loss) {
  MlpTape tape;
  const RealMatrix output = mlp_forward(params, input, tape);
  RealMatrix output_gradient = RealMatrix::Zero(output.rows(), output.cols());
  const double value = loss(output, output_gradient);
  MlpGradients grads = zero_gradients(params);
  mlp_backward(params, tape, output_gradient, grads);
  return {value, std::move(grads)};
}

AdamState AdamState::init(const MlpParams& params) {
  AdamState s;
  for (std::size_t l = 0; l < params.layer_count(); ++l) {
    s.m_weights.push_back(RealMatrix::Zero(params.weights[l].rows(), params.weights[l].cols()));
    s.v_weights.push_back(RealMatrix::Zero(params.weights[l].rows(), params.weights[l].cols()));
    s.m_biases.push_back(RealVector::Zero(params.biases[l].size()));
    s.v_biases.push_back(RealVector::Zero(params.biases[l].size()));
  }
  return s;
}

void adam_step(MlpParams& params, const MlpGradients& grads, AdamState& state,
               double learning_rate, const AdamSettings& settings) {
  state.step += 1;
  const double correction1 = 1.0 - std::pow(settings.beta1, static_cast<double>(state.step));
  const double correction2 = 1.0 - std::pow(settings.beta2, static_cast<double>(state.step));
  for (std::size_t l = 0; l < params.layer_count(); ++l) {
    state.m_weights[l] = settings.beta1 * state.m_weights[l] + (1.0 - settings.beta1) * grads.weights[l];
    state.v_weights[l] = settings.beta2 * state.v_weights[l] +
                         (1.0 - settings.beta2) * grads.weights[l].cwiseProduct(grads.weights[l]);
    params.weights[l] -=
        learning_rate *
        (state.m_weights[l] / correction1)
            .cwiseQuotient(((state.v_weights[l] / correction2).cwiseSqrt().array() + settings.epsilon).matrix());
    state.m_biases[l] = settings.beta1 * state.m_biases[l] + (1.0 - settings.beta1) * grads.biases[l];
    state.v_biases[l] = settings.beta2 * state.v_biases[l] +
                        (1.0 - settings.beta2) * grads.biases[l].cwiseProduct(grads.biases[l]);
    params.biases[l] -=
        learning_rate *
        (state.m_biases[l] / correction1)
            .cwiseQuotient(((state.v_biases[l] / correction2).cwiseSqrt().array() + settings.epsilon).matrix());
  }
}

RealVector flatten_parameters(const MlpParams& params) {
  RealVector flat(static_cast<Eigen::Index>(params.parameter_count()));
  Eigen::Index at = 0;
  for (std::size_t l = 0; l < params.layer_count(); ++l) {
    const auto& w = params.weights[l];
    flat.segment(at, w.size()) = Eigen::Map<const RealVector>(w.data(), w.size());
    at += w.size();
    flat.segment(at, params.biases[l].size()) = params.biases[l];
    at += params.biases[l].size();
  }
  return flat;
}

void unflatten_parameters(MlpParams& params, const RealVector& flat) {
  if (flat.size() != static_cast<Eigen::Index>(params.parameter_count())) {
    throw ConfigError("unflatten_parameters: length mismatch");
  }
  Eigen::Index at = 0;
  for (std::size_t l = 0; l < params.layer_count(); ++l) {
    auto& w = params.weights[l];
    Eigen::Map<RealVector>(w.data(), w.size()) = flat.segment(at, w.size());
    at += w.size();
    params.biases[l] = flat.segment(at, params.biases[l].size());
    at += params.biases[l].size();
  }
}

RealVector flatten_gradients(const MlpGradients& grads) {
  Eigen::Index total = 0;
  for (std::size_t l = 0; l < grads.weights.size(); ++l) {
    total += grads.weights[l].size() + grads.biases[l].size();
  }
  RealVector flat(total);
  Eigen::Index at = 0;
  for (std::size_t l = 0; l < grads.weights.size(); ++l) {
    const auto& w = grads.weights[l];
    flat.segment(at, w.size()) = Eigen::Map<const RealVector>(w.data(), w.size());
    at += w.size();
    flat.segment(at, grads.biases[l].size()) = grads.biases[l];
    at += grads.biases[l].size();
  }
  return flat;
}

}  // namespace pbdw
