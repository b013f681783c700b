#pragma once

#include "pbdw/assimilation.hpp"
#include "pbdw/config.hpp"
#include "pbdw/operator_model.hpp"
#include "pbdw/placement.hpp"

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

namespace pbdw {

/// Everything the studies share, built deterministically from one config:
/// mesh, inner products, truth field, best-knowledge POD basis, and the
/// primary sensor set (bound coupling included).
struct Workspace {
  ExperimentConfig config;
  Mesh mesh;
  std::unique_ptr<InnerProduct> h1;
  std::unique_ptr<InnerProduct> l2;
  DiscreteField u_true;
  SnapshotSet snapshots;
  BackgroundBasis basis_full;   // max requested modes, bound to `sensors`
  SensorSet sensors;            // primary set of primary_sensor_count() sensors
  std::optional<PlacementState> placement;  // present for the greedy strategy
  std::vector<std::string> notes;

  BackgroundBasis basis_at(int n) const { return basis_prefix(basis_full, n); }
  RealVector truth_forcing_at_centers() const;
};

Workspace make_workspace(const ExperimentConfig& config);

/// Training-set generation plus the configured model variant; writes the
/// loss-curve CSV next to the checkpoint.
OperatorModel train_model(const Workspace& ws, ModelMode mode,
                          const std::filesystem::path& out_dir);

std::filesystem::path model_checkpoint_path(const std::filesystem::path& out_dir,
                                            ModelMode mode);

/// Loads the configured model for this workspace, failing with a config
/// error if the checkpoint is absent or was built against other artifacts.
OperatorModel load_workspace_model(const Workspace& ws, ModelMode mode,
                                   const std::filesystem::path& out_dir);

// --- Study drivers (section 5 reproductions) -------------------------------

/// Error metrics versus background dimension on the perfect model, plus
/// field dumps at the figure panels.
void run_mode_sweep(const Workspace& ws, const std::filesystem::path& out_dir);

/// Misspecified-model panels and classical-vs-hybrid error curves. Requires
/// a trained model checkpoint in `out_dir`.
void run_bias_study(const Workspace& ws, const std::filesystem::path& out_dir);

/// Relative error versus noise level for the four method variants.
void run_noise_sweep(const Workspace& ws, const std::filesystem::path& out_dir);

/// Greedy-versus-random sensor selection comparison and the beta trace.
void run_sensor_study(const Workspace& ws, const std::filesystem::path& out_dir);

/// Online operation-structure check: dense factorization sizes on the
/// classical and hybrid paths, plus informational wall-clock medians.
void run_cost_report(const Workspace& ws, const std::filesystem::path& out_dir);

struct CostReport {
  std::vector<int> classical_sizes;
  std::vector<int> hybrid_sizes;
  bool hybrid_avoids_full_system = false;
  double classical_median_us = 0.0;
  double hybrid_median_us = 0.0;
};

CostReport measure_cost(const Workspace& ws, const OperatorModel& model,
                        int repetitions);

}  // namespace pbdw
