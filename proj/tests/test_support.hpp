#pragma once

#include "pbdw/mesh.hpp"
#include "pbdw/rng.hpp"
#include "pbdw/types.hpp"

#include <algorithm>
#include <numeric>
#include <vector>

namespace pbdw::test {

inline DiscreteField random_field(const Mesh& mesh, Rng& rng, double scale = 1.0) {
  Vector v(mesh.node_count());
  for (int i = 0; i < mesh.node_count(); ++i) {
    v[i] = Complex(rng.normal(), rng.normal()) * scale;
  }
  return DiscreteField{std::move(v), mesh.id};
}

inline DiscreteField nodal_field(const Mesh& mesh,
                                 const std::function<Complex(double, double)>& f) {
  Vector v(mesh.node_count());
  for (int i = 0; i < mesh.node_count(); ++i) {
    const auto& p = mesh.nodes[static_cast<std::size_t>(i)];
    v[i] = f(p[0], p[1]);
  }
  return DiscreteField{std::move(v), mesh.id};
}

/// Spearman rank correlation (average ranks on ties).
inline double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  const std::size_t n = a.size();
  auto ranks = [n](const std::vector<double>& x) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&x](std::size_t i, std::size_t j) { return x[i] < x[j]; });
    std::vector<double> r(n);
    std::size_t i = 0;
    while (i < n) {
      std::size_t j = i;
      while (j + 1 < n && x[order[j + 1]] == x[order[i]]) ++j;
      const double rank = 0.5 * (i + j) + 1.0;
      for (std::size_t k = i; k <= j; ++k) r[order[k]] = rank;
      i = j + 1;
    }
    return r;
  };
  const auto ra = ranks(a);
  const auto rb = ranks(b);
  const double mean = (n + 1) / 2.0;
  double cov = 0.0, va = 0.0, vb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    cov += (ra[i] - mean) * (rb[i] - mean);
    va += (ra[i] - mean) * (ra[i] - mean);
    vb += (rb[i] - mean) * (rb[i] - mean);
  }
  if (va == 0.0 || vb == 0.0) return 0.0;
  return cov / std::sqrt(va * vb);
}

}  // namespace pbdw::test
