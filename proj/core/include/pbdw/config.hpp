#pragma once

#include "pbdw/helmholtz.hpp"
#include "pbdw/types.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace pbdw {

enum class XiMode { Zero, Fixed, Gcv };
enum class ModelMode { None, Weak, Strong };
enum class SensorStrategy { SGreedy, Random };

/// Experiment-level configuration. Parsed from a sectioned key=value file;
/// every field has a desk-scale default so an empty file is a valid config.
struct ExperimentConfig {
  // [mesh]
  int nx = 65;
  int ny = 65;

  // [parameter]
  double mu_min = 5.8;
  double mu_max = 6.2;
  int train_count = 51;
  double mu_eval = 6.0;
  double epsilon = 0.01;

  // [scenario]
  BoundaryCondition truth_bc = BoundaryCondition::DirichletPerfect;
  SourceBias truth_source = SourceBias::PerfectG;
  BoundaryCondition bk_bc = BoundaryCondition::NeumannBiased;
  SourceBias bk_source = SourceBias::BiasedZeroG;

  // [background]
  std::vector<int> n_list = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15};
  int n_eval = 2;

  // [sensors]
  std::vector<int> m_list = {50};
  bool m_rule_25n = false;  // M = 25 N overrides m_list
  SensorStrategy strategy = SensorStrategy::SGreedy;
  double width = 0.02;
  std::uint64_t sensor_seed = 1;

  // [noise]
  std::vector<double> delta_list = {0.0, 0.05, 0.1, 0.2, 0.3};
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};

  // [regularization]
  XiMode xi_mode = XiMode::Zero;
  double xi_fixed = 0.0;
  std::vector<double> gcv_grid;  // empty = default log grid

  // [model]
  ModelMode model_mode = ModelMode::Strong;
  int training_pairs = 0;  // 0 = mode default (50 strong / 501 weak)
  int epochs = 0;          // 0 = mode default (5000 strong / 20000 weak)
  double learning_rate = 1e-3;
  double lr_decay = 0.999;
  double omega1 = 1.0;
  double omega2 = 1.0;
  std::uint64_t model_seed = 7;
  std::uint64_t dataset_seed = 11;

  // [output]
  std::string output_dir = "out";
  int threads = 0;

  void validate() const;

  HelmholtzConfig truth_config() const;
  HelmholtzConfig bk_config() const;
  std::vector<double> training_grid() const;
  std::vector<double> effective_gcv_grid() const;
  int effective_pairs(ModelMode mode) const;
  int effective_epochs(ModelMode mode) const;
  int primary_sensor_count() const;  // largest M (or 25 * n_eval under the rule)

  /// Deterministic serialization of every field; its hash identifies the
  /// configuration in CSV provenance lines.
  std::string canonical_text() const;
  std::uint64_t hash() const;
};

ExperimentConfig parse_config_file(const std::filesystem::path& path);
ExperimentConfig parse_config_text(const std::string& text);

}  // namespace pbdw
