#pragma once

#include <array>
#include <cmath>
#include <stdexcept>

#include "ipic/grid.hpp"

namespace ipic {

class DomainError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// Trilinear (cloud-in-cell) weights to the 8 nodes enclosing a position.
struct InterpolationStencil {
  std::array<int, 3> base{};            // lower corner node
  std::array<double, 8> weights{};      // index bit 0: +x, bit 1: +y, bit 2: +z
  std::array<double, 3> fraction{};

  int node(int corner, int axis) const { return base[axis] + ((corner >> axis) & 1); }
};

/// Builds the stencil for a position. With allow_ghosts the position may lie up to
/// one cell outside the domain (ghost nodes then take part); otherwise it must lie
/// in [0, L] on every axis.
inline InterpolationStencil make_stencil(const GridGeometry& g, const Vec3& x, bool allow_ghosts) {
  InterpolationStencil s;
  for (int a = 0; a < 3; ++a) {
    const double h = g.spacing(a);
    const double slack = 1e-12 * g.length[a];
    const double lo = allow_ghosts ? -h : 0.0;
    const double hi = allow_ghosts ? g.length[a] + h : g.length[a];
    if (!(x[a] >= lo - slack && x[a] <= hi + slack)) throw DomainError("position outside the grid");
    const double t = x[a] / h;
    int i = int(std::floor(t));
    const int imin = allow_ghosts ? -1 : 0;
    const int imax = allow_ghosts ? g.nodes[a] - 1 : g.nodes[a] - 2;
    i = std::clamp(i, imin, imax);
    s.base[a] = i;
    s.fraction[a] = std::clamp(t - i, 0.0, 1.0);
  }
  for (int c = 0; c < 8; ++c) {
    double w = 1.0;
    for (int a = 0; a < 3; ++a) w *= ((c >> a) & 1) ? s.fraction[a] : 1.0 - s.fraction[a];
    s.weights[c] = w;
  }
  return s;
}

}  // namespace ipic
