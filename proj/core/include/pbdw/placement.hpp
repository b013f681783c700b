#pragma once

#include "pbdw/assimilation.hpp"
#include "pbdw/reduced_basis.hpp"
#include "pbdw/sensors.hpp"

#include <cstdint>
#include <vector>

namespace pbdw {

/// Trace of a greedy stability-maximization run. Sensor m was chosen with
/// background dimension step_n[m]; betas[m] is the inf-sup constant of the
/// updated spaces after placing it.
struct PlacementState {
  std::vector<Sensor> chosen;
  std::vector<double> betas;
  std::vector<int> step_n;
  std::vector<int> grid;  // candidate node indices

  // Accumulated spaces, reusable for any prefix length.
  std::vector<RealVector> functionals;
  std::vector<DiscreteField> representers;
  Matrix A;       // M_max x M_max
  Matrix B_full;  // M_max x N_max
  std::uint64_t mesh_id = 0;
  std::uint64_t inner_product_id = 0;

  SensorSet prefix_set(int m) const;
  Matrix prefix_coupling(int m, int n) const { return B_full.topLeftCorner(m, n); }
};

/// Mesh nodes at least one cell away from the boundary, in node order.
std::vector<int> default_candidate_grid(const Mesh& mesh);

/// Greedy placement maximizing the inf-sup constant: at each step locates
/// the point where the least-stable background mode is worst approximated
/// by the current update space and plants a Gaussian sensor there.
PlacementState sgreedy(const Mesh& mesh, const InnerProduct& ip,
                       const BackgroundBasis& basis, int m_max, double width,
                       const std::vector<int>& grid);

struct StrategyRow {
  int m = 0;
  std::string strategy;
  std::uint64_t seed = 0;
  double beta = 0.0;
  double rel_error = 0.0;
};

/// Side-by-side greedy-vs-random comparison on a fixed truth field:
/// per (M, strategy, seed) the inf-sup constant and the unregularized
/// reconstruction error from noise-free data.
std::vector<StrategyRow> compare_strategies(const Mesh& mesh, const InnerProduct& ip,
                                            const BackgroundBasis& basis,
                                            const DiscreteField& u_true,
                                            const InnerProduct& l2,
                                            const std::vector<int>& m_list,
                                            const std::vector<std::uint64_t>& seeds,
                                            double width);

}  // namespace pbdw
