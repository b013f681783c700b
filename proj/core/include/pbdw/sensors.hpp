#pragma once

#include "pbdw/inner_product.hpp"
#include "pbdw/mesh.hpp"
#include "pbdw/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace pbdw {

constexpr double kDefaultSensorWidth = 0.02;

/// Gaussian observation window: center in the domain, width = standard
/// deviation of the window.
struct Sensor {
  double x1 = 0.0;
  double x2 = 0.0;
  double width = kDefaultSensorWidth;

  void validate() const;
};

/// Nodal weight vector f with f_i = l(phi_i), so that l(v) = f . v exactly
/// for any P1 field v. Quadrature is a composite edge-midpoint rule on a
/// recursive subdivision of each element fine enough to resolve the window;
/// `extra_depth` refines further (used by convergence oracles).
RealVector assemble_functional(const Mesh& mesh, const Sensor& sensor,
                               int extra_depth = 0);

Complex apply_functional(const Mesh& mesh, const Sensor& sensor,
                         const DiscreteField& field);

/// Riesz representer of the sensor functional: solves G q = f.
DiscreteField riesz_representer(const Mesh& mesh, const Sensor& sensor,
                                const InnerProduct& ip);

/// Observation functionals, their representers, and the update-space Gram
/// matrix A with A(m, m') = l_m(q_m'). Immutable after construction.
struct SensorSet {
  std::vector<Sensor> sensors;
  std::vector<RealVector> functionals;
  std::vector<DiscreteField> representers;
  Matrix A;
  std::uint64_t inner_product_id = 0;
  std::uint64_t mesh_id = 0;
  std::vector<std::string> warnings;

  int size() const { return static_cast<int>(sensors.size()); }

  Complex apply(int m, const DiscreteField& field) const;
  std::uint64_t hash() const;
};

SensorSet build_sensor_set(const Mesh& mesh, const std::vector<Sensor>& sensors,
                           const InnerProduct& ip);

/// Restriction of a built set to a subset of its sensors (reuses the
/// representers and the Gram sub-block).
SensorSet sensor_subset(const SensorSet& set, const std::vector<int>& indices);

struct Measurement {
  Vector y;
  double noise_level = 0.0;
  std::uint64_t rng_seed = 0;
};

/// y_m = l_m(field), each entry scaled by (1 + delta * r_m) with r_m i.i.d.
/// standard normal when delta > 0.
Measurement observe(const SensorSet& set, const DiscreteField& field,
                    double noise_level, std::uint64_t seed);

/// Uniform rejection-sampled centers with a minimum pairwise distance.
/// `min_dist <= 0` selects the default 1/sqrt(3M).
std::vector<Sensor> random_placement(int count, double width, double min_dist,
                                     std::uint64_t seed);

}  // namespace pbdw
