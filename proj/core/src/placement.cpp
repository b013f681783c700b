#include "pbdw/placement.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>

namespace pbdw {

SensorSet PlacementState::prefix_set(int m) const {
  if (m < 1 || m > static_cast<int>(chosen.size())) {
    throw ConfigError("prefix_set: invalid prefix length " + std::to_string(m));
  }
  SensorSet set;
  set.sensors.assign(chosen.begin(), chosen.begin() + m);
  set.functionals.assign(functionals.begin(), functionals.begin() + m);
  set.representers.assign(representers.begin(), representers.begin() + m);
  set.A = A.topLeftCorner(m, m);
  set.mesh_id = mesh_id;
  set.inner_product_id = inner_product_id;
  return set;
}

std::vector<int> default_candidate_grid(const Mesh& mesh) {
  std::vector<int> grid;
  grid.reserve(static_cast<std::size_t>(mesh.nx - 2) * (mesh.ny - 2));
  for (int j = 1; j < mesh.ny - 1; ++j) {
    for (int i = 1; i < mesh.nx - 1; ++i) {
      grid.push_back(mesh.node_index(i, j));
    }
  }
  return grid;
}

PlacementState sgreedy(const Mesh& mesh, const InnerProduct& ip,
                       const BackgroundBasis& basis, int m_max, double width,
                       const std::vector<int>& grid) {
  if (m_max < 1) throw ConfigError("sgreedy: m_max must be >= 1");
  if (basis.size() < 1) throw ConfigError("sgreedy: empty background basis");
  if (grid.empty()) throw ConfigError("sgreedy: empty candidate grid");
  if (basis.mesh_id != mesh.id || ip.mesh_id() != mesh.id) {
    throw ConfigError("sgreedy: mesh mismatch");
  }

  const int n_max = basis.size();
  const int nodes = mesh.node_count();
  PlacementState state;
  state.grid = grid;
  state.mesh_id = mesh.id;
  state.inner_product_id = ip.id();
  state.A = Matrix::Zero(m_max, m_max);
  state.B_full = Matrix::Zero(m_max, n_max);

  std::vector<bool> taken(static_cast<std::size_t>(nodes), false);

  for (int step = 1; step <= m_max; ++step) {
    const int n = std::min(n_max, step);

    // Least-stable background mode against the current update space.
    Vector w_coeff;
    if (step == 1) {
      w_coeff = Vector::Zero(n);
      w_coeff[0] = Complex(1.0, 0.0);
    } else {
      const StabilityReport report =
          inf_sup(state.B_full.topLeftCorner(step - 1, n),
                  state.A.topLeftCorner(step - 1, step - 1));
      w_coeff = report.least_stable_mode;
    }
    Vector w = Vector::Zero(nodes);
    for (int j = 0; j < n; ++j) {
      w += w_coeff[j] * basis.modes[static_cast<std::size_t>(j)].values;
    }

    // Supremizer: projection of the least-stable mode onto the update space.
    Vector v_sup = Vector::Zero(nodes);
    if (step > 1) {
      const int m_prev = step - 1;
      const Vector d = state.B_full.topLeftCorner(m_prev, n) * w_coeff;
      Eigen::LLT<Matrix> llt(state.A.topLeftCorner(m_prev, m_prev));
      if (llt.info() != Eigen::Success) {
        throw NumericalError("sgreedy: update Gram lost positive definiteness at step " +
                             std::to_string(step));
      }
      const Vector c = llt.solve(d);
      for (int m = 0; m < m_prev; ++m) {
        v_sup += c[m] * state.representers[static_cast<std::size_t>(m)].values;
      }
    }

    // Least well-approximated candidate point; ties break toward the
    // lexicographically smallest coordinates so the result does not depend
    // on grid ordering.
    const Vector gap = w - v_sup;
    int best_node = -1;
    double best_value = -1.0;
    for (int node : grid) {
      if (taken[static_cast<std::size_t>(node)]) continue;
      const double value = std::abs(gap[node]);
      if (value > best_value) {
        best_value = value;
        best_node = node;
      } else if (value == best_value && best_node >= 0) {
        const auto& p = mesh.nodes[static_cast<std::size_t>(node)];
        const auto& q = mesh.nodes[static_cast<std::size_t>(best_node)];
        if (p[0] < q[0] || (p[0] == q[0] && p[1] < q[1])) best_node = node;
      }
    }
    if (best_node < 0) {
      throw NumericalError("sgreedy: candidate grid exhausted at step " +
                           std::to_string(step));
    }
    taken[static_cast<std::size_t>(best_node)] = true;

    const auto& p = mesh.nodes[static_cast<std::size_t>(best_node)];
    const Sensor sensor{p[0], p[1], width};
    RealVector f = assemble_functional(mesh, sensor);
    RealVector q = ip.solve(f);

    const int m_new = step - 1;  // zero-based row/column of the new sensor
    for (int m = 0; m < m_new; ++m) {
      const Complex value =
          state.functionals[static_cast<std::size_t>(m)].cast<Complex>().dot(
              q.cast<Complex>().eval());
      state.A(m, m_new) = value;
      state.A(m_new, m) = std::conj(value);
    }
    state.A(m_new, m_new) = f.dot(q);
    for (int j = 0; j < n_max; ++j) {
      state.B_full(m_new, j) =
          f.cast<Complex>().dot(basis.modes[static_cast<std::size_t>(j)].values);
    }
    state.chosen.push_back(sensor);
    state.functionals.push_back(std::move(f));
    state.representers.push_back(DiscreteField{q.cast<Complex>(), mesh.id});

    const StabilityReport post = inf_sup(state.B_full.topLeftCorner(step, n),
                                         state.A.topLeftCorner(step, step));
    state.step_n.push_back(n);
    state.betas.push_back(post.beta);
  }
  return state;
}

std::vector<StrategyRow> compare_strategies(const Mesh& mesh, const InnerProduct& ip,
                                            const BackgroundBasis& basis,
                                            const DiscreteField& u_true,
                                            const InnerProduct& l2,
                                            const std::vector<int>& m_list,
                                            const std::vector<std::uint64_t>& seeds,
                                            double width) {
  if (m_list.empty()) throw ConfigError("compare_strategies: empty sensor-count list");
  const int m_max = *std::max_element(m_list.begin(), m_list.end());
  const PlacementState greedy =
      sgreedy(mesh, ip, basis, m_max, width, default_candidate_grid(mesh));

  std::vector<StrategyRow> rows;
  for (int m : m_list) {
    {
      const SensorSet set = greedy.prefix_set(m);
      const BackgroundBasis bound = bind_sensors(basis, set);
      const Measurement meas = observe(set, u_true, 0.0, 0);
      const PbdwSolution sol = solve_pbdw(bound, set, meas, 0.0);
      const Metrics metrics = compute_metrics(sol, u_true, bound, ip, l2);
      rows.push_back(StrategyRow{m, "sgreedy", 0,
                                 inf_sup(bound.B, set.A).beta, metrics.rel_error});
    }
    for (std::uint64_t seed : seeds) {
      const SensorSet set =
          build_sensor_set(mesh, random_placement(m, width, -1.0, seed), ip);
      const BackgroundBasis bound = bind_sensors(basis, set);
      const Measurement meas = observe(set, u_true, 0.0, 0);
      const PbdwSolution sol = solve_pbdw(bound, set, meas, 0.0);
      const Metrics metrics = compute_metrics(sol, u_true, bound, ip, l2);
      rows.push_back(StrategyRow{m, "random", seed,
                                 inf_sup(bound.B, set.A).beta, metrics.rel_error});
    }
  }
  return rows;
}

}  // namespace pbdw
