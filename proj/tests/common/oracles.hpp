#pragma once

// Independent oracles shared by the unit tests and the acceptance suite.

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "ipic/analysis.hpp"
#include "ipic/maxwell.hpp"
#include "ipic/moments.hpp"

namespace ipic::oracle {

inline SusceptibilityField random_chi(const GridGeometry& g, std::uint64_t seed) {
  Rng rng(seed);
  SusceptibilityField chi{NodeArray<Mat3>(g)};
  for_each_solver_node(g, [&](int i, int j, int k) {
    const Vec3 omega{rng.normal(), rng.normal(), rng.normal()};
    chi.chi(i, j, k) = rotation_tensor(omega, 0.5) * (2.0 * rng.uniform());
  });
  sync_ghosts(chi.chi);
  return chi;
}

inline FieldVector random_vector(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  FieldVector v(n);
  for (auto& x : v) x = rng.normal();
  return v;
}

// Independent dense assembly of (I + X) - s (L + G D X) on a periodic grid,
// with L the compact Laplacian, D the central divergence, G the central gradient.
inline Eigen::MatrixXd dense_operator(const GridGeometry& g, const SusceptibilityField& chi, double dt, double c) {
  const int nx = g.nodes[0] - 1, ny = g.nodes[1] - 1, nz = g.nodes[2] - 1;
  const int N = nx * ny * nz;
  auto id = [&](int i, int j, int k) {
    i = (i % nx + nx) % nx;
    j = (j % ny + ny) % ny;
    k = (k % nz + nz) % nz;
    return i + nx * (j + ny * k);
  };
  const double h[3] = {g.spacing(0), g.spacing(1), g.spacing(2)};
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(3 * N, 3 * N), X = Eigen::MatrixXd::Zero(3 * N, 3 * N);
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(N, 3 * N), G = Eigen::MatrixXd::Zero(3 * N, N);
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i) {
        const int n = id(i, j, k);
        const int p[3] = {i, j, k};
        for (int a = 0; a < 3; ++a) {
          int up[3] = {p[0], p[1], p[2]}, dn[3] = {p[0], p[1], p[2]};
          up[a] += 1;
          dn[a] -= 1;
          const int nu = id(up[0], up[1], up[2]), nd = id(dn[0], dn[1], dn[2]);
          for (int comp = 0; comp < 3; ++comp) {
            L(3 * n + comp, 3 * nu + comp) += 1.0 / (h[a] * h[a]);
            L(3 * n + comp, 3 * nd + comp) += 1.0 / (h[a] * h[a]);
            L(3 * n + comp, 3 * n + comp) -= 2.0 / (h[a] * h[a]);
          }
          D(n, 3 * nu + a) += 0.5 / h[a];
          D(n, 3 * nd + a) -= 0.5 / h[a];
          G(3 * n + a, nu) += 0.5 / h[a];
          G(3 * n + a, nd) -= 0.5 / h[a];
        }
        for (int r = 0; r < 3; ++r)
          for (int col = 0; col < 3; ++col) X(3 * n + r, 3 * n + col) = chi.chi(i, j, k)(r, col);
      }
  const double s = (c * dt) * (c * dt);
  return Eigen::MatrixXd::Identity(3 * N, 3 * N) + X - s * (L + G * D * X);
}

// Unpruned optimal partitioning with the same cost, penalty and minimum segment.
inline std::pair<std::vector<std::size_t>, double> dp_oracle(const std::vector<double>& x, double beta) {
  const std::size_t n = x.size();
  std::vector<double> F(n + 1, std::numeric_limits<double>::infinity());
  std::vector<std::size_t> last(n + 1, 0);
  F[0] = -beta;
  for (std::size_t t = 2; t <= n; ++t)
    for (std::size_t s = 0; s + 2 <= t; ++s) {
      if (!std::isfinite(F[s])) continue;
      const double v = F[s] + segment_cost(x, s, t) + beta;
      if (v < F[t]) {
        F[t] = v;
        last[t] = s;
      }
    }
  std::vector<std::size_t> idx;
  for (std::size_t t = n; t > 0; t = last[t])
    if (last[t] > 0) idx.insert(idx.begin(), last[t]);
  return {idx, F[n]};
}

}  // namespace ipic::oracle
