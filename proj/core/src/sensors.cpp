#include "pbdw/sensors.hpp"

#include "pbdw/io.hpp"
#include "pbdw/rng.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <numbers>

namespace pbdw {

void Sensor::validate() const {
  if (x1 < 0.0 || x1 > 1.0 || x2 < 0.0 || x2 > 1.0) {
    throw ConfigError("Sensor: center (" + std::to_string(x1) + ", " +
                      std::to_string(x2) + ") outside [0,1]^2");
  }
  if (!(width > 0.0) || width > 0.25) {
    throw ConfigError("Sensor: width must lie in (0, 0.25], got " +
                      std::to_string(width));
  }
}

namespace {

struct QuadTriangle {
  // Cartesian corners plus their barycentric coordinates in the parent
  // element (barycentric coordinates are the P1 basis values).
  double x[3][2];
  double lambda[3][3];
  int depth;
};

}  // namespace

RealVector assemble_functional(const Mesh& mesh, const Sensor& sensor,
                               int extra_depth) {
  sensor.validate();
  RealVector f = RealVector::Zero(mesh.node_count());
  const double r = sensor.width;
  const double norm_factor = 1.0 / std::sqrt(2.0 * std::numbers::pi * r * r);
  const double inv_2r2 = 1.0 / (2.0 * r * r);
  const double cutoff = 8.0 * r;

  const double hx = 1.0 / (mesh.nx - 1);
  const double hy = 1.0 / (mesh.ny - 1);
  const double h_elem = std::hypot(hx, hy);
  // Subdivide until sub-edges are no longer than width/4.
  int depth = 0;
  while ((h_elem / (1 << depth)) > r / 4.0 && depth < 8) ++depth;
  depth = std::min(depth + extra_depth, 12);

  std::vector<QuadTriangle> stack;
  for (std::size_t el = 0; el < mesh.elements.size(); ++el) {
    const auto& e = mesh.elements[el];
    const auto& a = mesh.nodes[static_cast<std::size_t>(e[0])];
    const auto& b = mesh.nodes[static_cast<std::size_t>(e[1])];
    const auto& c = mesh.nodes[static_cast<std::size_t>(e[2])];
    const double cx = (a[0] + b[0] + c[0]) / 3.0;
    const double cy = (a[1] + b[1] + c[1]) / 3.0;
    const double reach = std::max({std::hypot(a[0] - cx, a[1] - cy),
                                   std::hypot(b[0] - cx, b[1] - cy),
                                   std::hypot(c[0] - cx, c[1] - cy)});
    if (std::hypot(sensor.x1 - cx, sensor.x2 - cy) - reach > cutoff) continue;

    stack.push_back(QuadTriangle{{{a[0], a[1]}, {b[0], b[1]}, {c[0], c[1]}},
                                 {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}},
                                 depth});
    while (!stack.empty()) {
      const QuadTriangle t = stack.back();
      stack.pop_back();
      if (t.depth > 0) {
        double mx[3][2], ml[3][3];
        for (int k = 0; k < 3; ++k) {
          const int k2 = (k + 1) % 3;
          for (int d = 0; d < 2; ++d) mx[k][d] = 0.5 * (t.x[k][d] + t.x[k2][d]);
          for (int d = 0; d < 3; ++d) ml[k][d] = 0.5 * (t.lambda[k][d] + t.lambda[k2][d]);
        }
        const int d = t.depth - 1;
        stack.push_back({{{t.x[0][0], t.x[0][1]}, {mx[0][0], mx[0][1]}, {mx[2][0], mx[2][1]}},
                         {{t.lambda[0][0], t.lambda[0][1], t.lambda[0][2]},
                          {ml[0][0], ml[0][1], ml[0][2]},
                          {ml[2][0], ml[2][1], ml[2][2]}},
                         d});
        stack.push_back({{{mx[0][0], mx[0][1]}, {t.x[1][0], t.x[1][1]}, {mx[1][0], mx[1][1]}},
                         {{ml[0][0], ml[0][1], ml[0][2]},
                          {t.lambda[1][0], t.lambda[1][1], t.lambda[1][2]},
                          {ml[1][0], ml[1][1], ml[1][2]}},
                         d});
        stack.push_back({{{mx[2][0], mx[2][1]}, {mx[1][0], mx[1][1]}, {t.x[2][0], t.x[2][1]}},
                         {{ml[2][0], ml[2][1], ml[2][2]},
                          {ml[1][0], ml[1][1], ml[1][2]},
                          {t.lambda[2][0], t.lambda[2][1], t.lambda[2][2]}},
                         d});
        stack.push_back({{{mx[0][0], mx[0][1]}, {mx[1][0], mx[1][1]}, {mx[2][0], mx[2][1]}},
                         {{ml[0][0], ml[0][1], ml[0][2]},
                          {ml[1][0], ml[1][1], ml[1][2]},
                          {ml[2][0], ml[2][1], ml[2][2]}},
                         d});
        continue;
      }
      const double area =
          0.5 * std::abs((t.x[1][0] - t.x[0][0]) * (t.x[2][1] - t.x[0][1]) -
                         (t.x[2][0] - t.x[0][0]) * (t.x[1][1] - t.x[0][1]));
      for (int k = 0; k < 3; ++k) {
        const int k2 = (k + 1) % 3;
        const double px = 0.5 * (t.x[k][0] + t.x[k2][0]);
        const double py = 0.5 * (t.x[k][1] + t.x[k2][1]);
        const double d2 = (px - sensor.x1) * (px - sensor.x1) +
                          (py - sensor.x2) * (py - sensor.x2);
        const double w = area / 3.0 * norm_factor * std::exp(-d2 * inv_2r2);
        for (int d = 0; d < 3; ++d) {
          f[e[d]] += w * 0.5 * (t.lambda[k][d] + t.lambda[k2][d]);
        }
      }
    }
  }
  return f;
}

Complex apply_functional(const Mesh& mesh, const Sensor& sensor,
                         const DiscreteField& field) {
  if (field.mesh_id != mesh.id) {
    throw ConfigError("apply_functional: field/mesh id mismatch");
  }
  const RealVector f = assemble_functional(mesh, sensor);
  return f.cast<Complex>().dot(field.values);
}

DiscreteField riesz_representer(const Mesh& mesh, const Sensor& sensor,
                                const InnerProduct& ip) {
  if (ip.mesh_id() != mesh.id) {
    throw ConfigError("riesz_representer: inner product built on another mesh");
  }
  const RealVector f = assemble_functional(mesh, sensor);
  const RealVector q = ip.solve(f);
  if (!q.allFinite()) {
    throw NumericalError("riesz_representer: Gram solve produced non-finite values");
  }
  return DiscreteField{q.cast<Complex>(), mesh.id};
}

Complex SensorSet::apply(int m, const DiscreteField& field) const {
  if (field.mesh_id != mesh_id) {
    throw ConfigError("SensorSet::apply: field/mesh id mismatch");
  }
  const RealVector& f = functionals[static_cast<std::size_t>(m)];
  return f.cast<Complex>().dot(field.values);
}

std::uint64_t SensorSet::hash() const {
  std::uint64_t h = hash_of_string("pbdw-sensor-set");
  h = hash_combine(h, mesh_id, inner_product_id);
  for (const auto& s : sensors) h = hash_combine(h, s.x1, s.x2, s.width);
  return h;
}

SensorSet build_sensor_set(const Mesh& mesh, const std::vector<Sensor>& sensors,
                           const InnerProduct& ip) {
  if (sensors.empty()) throw ConfigError("build_sensor_set: no sensors");
  if (ip.mesh_id() != mesh.id) {
    throw ConfigError("build_sensor_set: inner product built on another mesh");
  }
  SensorSet set;
  set.sensors = sensors;
  set.mesh_id = mesh.id;
  set.inner_product_id = ip.id();
  const int m = set.size();

  for (int i = 0; i < m; ++i) {
    for (int j = i + 1; j < m; ++j) {
      if (sensors[static_cast<std::size_t>(i)].x1 == sensors[static_cast<std::size_t>(j)].x1 &&
          sensors[static_cast<std::size_t>(i)].x2 == sensors[static_cast<std::size_t>(j)].x2 &&
          sensors[static_cast<std::size_t>(i)].width == sensors[static_cast<std::size_t>(j)].width) {
        set.warnings.push_back("duplicate sensors at index " + std::to_string(i) +
                               " and " + std::to_string(j));
      }
    }
  }

  set.functionals.reserve(static_cast<std::size_t>(m));
  set.representers.reserve(static_cast<std::size_t>(m));
  for (const auto& s : sensors) {
    RealVector f = assemble_functional(mesh, s);
    RealVector q = ip.solve(f);
    if (!q.allFinite()) {
      throw NumericalError("build_sensor_set: representer solve failed");
    }
    set.functionals.push_back(std::move(f));
    set.representers.push_back(DiscreteField{q.cast<Complex>(), mesh.id});
  }

  set.A.resize(m, m);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) {
      set.A(i, j) = set.functionals[static_cast<std::size_t>(i)]
                        .cast<Complex>()
                        .dot(set.representers[static_cast<std::size_t>(j)].values);
    }
  }

  Eigen::LLT<Matrix> llt(set.A);
  if (llt.info() != Eigen::Success) {
    std::string detail = set.warnings.empty() ? "" : " (" + set.warnings.front() + ")";
    throw NumericalError("build_sensor_set: A is not positive definite" + detail);
  }
  return set;
}

SensorSet sensor_subset(const SensorSet& set, const std::vector<int>& indices) {
  if (indices.empty()) throw ConfigError("sensor_subset: empty index list");
  SensorSet subset;
  subset.mesh_id = set.mesh_id;
  subset.inner_product_id = set.inner_product_id;
  subset.A.resize(static_cast<Eigen::Index>(indices.size()),
                  static_cast<Eigen::Index>(indices.size()));
  for (std::size_t a = 0; a < indices.size(); ++a) {
    const int i = indices[a];
    if (i < 0 || i >= set.size()) {
      throw ConfigError("sensor_subset: index " + std::to_string(i) + " out of range");
    }
    subset.sensors.push_back(set.sensors[static_cast<std::size_t>(i)]);
    subset.functionals.push_back(set.functionals[static_cast<std::size_t>(i)]);
    subset.representers.push_back(set.representers[static_cast<std::size_t>(i)]);
    for (std::size_t b = 0; b < indices.size(); ++b) {
      subset.A(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) =
          set.A(i, indices[b]);
    }
  }
  return subset;
}

Measurement observe(const SensorSet& set, const DiscreteField& field,
                    double noise_level, std::uint64_t seed) {
  if (noise_level < 0.0) throw ConfigError("observe: negative noise level");
  Measurement meas;
  meas.noise_level = noise_level;
  meas.rng_seed = seed;
  meas.y.resize(set.size());
  for (int m = 0; m < set.size(); ++m) {
    meas.y[m] = set.apply(m, field);
  }
  if (noise_level > 0.0) {
    Rng rng(seed);
    for (int m = 0; m < set.size(); ++m) {
      meas.y[m] *= (1.0 + noise_level * rng.normal());
    }
  }
  return meas;
}

std::vector<Sensor> random_placement(int count, double width, double min_dist,
                                     std::uint64_t seed) {
  if (count < 1) throw ConfigError("random_placement: count must be >= 1");
  if (min_dist <= 0.0) min_dist = 1.0 / std::sqrt(3.0 * count);
  Rng rng(seed);
  std::vector<Sensor> placed;
  placed.reserve(static_cast<std::size_t>(count));
  int attempts = 0;
  constexpr int kMaxAttempts = 100000;
  while (static_cast<int>(placed.size()) < count) {
    if (++attempts > kMaxAttempts) {
      throw NumericalError("random_placement: failed to place " + std::to_string(count) +
                           " sensors with min distance " + std::to_string(min_dist) +
                           " after " + std::to_string(kMaxAttempts) + " attempts");
    }
    const double x1 = rng.uniform();
    const double x2 = rng.uniform();
    bool ok = true;
    for (const auto& s : placed) {
      if (std::hypot(s.x1 - x1, s.x2 - x2) < min_dist) {
        ok = false;
        break;
      }
    }
    if (ok) placed.push_back(Sensor{x1, x2, width});
  }
  return placed;
}

}  // namespace pbdw
