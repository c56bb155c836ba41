#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <vector>

#include "ipic/config.hpp"
#include "ipic/vec3.hpp"

namespace ipic {

/// Uniform node-centred Cartesian mesh with one ghost layer per face.
///
/// Node i on an axis sits at i * spacing for i in [0, n-1]; the domain spans
/// n-1 cells. In Periodic mode node n-1 duplicates node 0, so the independent
/// ("solver") nodes are [0, n-2]. In OpenInflow mode every node is independent.
struct GridGeometry {
  std::array<int, 3> nodes{4, 4, 4};
  Vec3 length{1.0, 1.0, 1.0};
  BoundaryMode mode = BoundaryMode::Periodic;

  GridGeometry() = default;
  GridGeometry(std::array<int, 3> n, Vec3 l, BoundaryMode m) : nodes(n), length(l), mode(m) {}
  explicit GridGeometry(const SimConfig& cfg)
      : nodes(cfg.grid_dims), length(cfg.domain_lengths), mode(cfg.boundary_mode) {}

  double spacing(int a) const { return length[a] / (nodes[a] - 1); }
  Vec3 spacing() const { return {spacing(0), spacing(1), spacing(2)}; }
  int cells(int a) const { return nodes[a] - 1; }
  std::size_t cell_count() const { return std::size_t(cells(0)) * cells(1) * cells(2); }
  double cell_volume() const { return spacing(0) * spacing(1) * spacing(2); }

  int extent(int a) const { return nodes[a] + 2; }
  std::size_t storage_size() const { return std::size_t(extent(0)) * extent(1) * extent(2); }

  /// Storage offset of node (i, j, k); ghosts are at -1 and n.
  std::size_t index(int i, int j, int k) const {
    return std::size_t(i + 1) + std::size_t(extent(0)) * (std::size_t(j + 1) + std::size_t(extent(1)) * std::size_t(k + 1));
  }

  int solver_nodes(int a) const { return mode == BoundaryMode::Periodic ? nodes[a] - 1 : nodes[a]; }
  std::size_t solver_node_count() const {
    return std::size_t(solver_nodes(0)) * solver_nodes(1) * solver_nodes(2);
  }

  /// Control volume of a node: a full cell volume, halved per open boundary face.
  double node_volume(int i, int j, int k) const;

  Vec3 node_position(int i, int j, int k) const {
    return {i * spacing(0), j * spacing(1), k * spacing(2)};
  }

  bool operator==(const GridGeometry& o) const {
    return nodes == o.nodes && length == o.length && mode == o.mode;
  }
};

/// Node-based array (including ghosts) of any value type.
template <class T>
class NodeArray {
 public:
  NodeArray() = default;
  explicit NodeArray(const GridGeometry& g, T fill = T{}) : geo_(g), data_(g.storage_size(), fill) {}

  const GridGeometry& geometry() const { return geo_; }
  T& operator()(int i, int j, int k) { return data_[geo_.index(i, j, k)]; }
  const T& operator()(int i, int j, int k) const { return data_[geo_.index(i, j, k)]; }

  std::vector<T>& raw() { return data_; }
  const std::vector<T>& raw() const { return data_; }
  std::size_t size() const { return data_.size(); }

  void fill(const T& v) { std::fill(data_.begin(), data_.end(), v); }

  bool operator==(const NodeArray& o) const { return geo_ == o.geo_ && data_ == o.data_; }

 private:
  GridGeometry geo_;
  std::vector<T> data_;
};

using ScalarField = NodeArray<double>;
using VectorField = NodeArray<Vec3>;
using TensorField = NodeArray<Sym3>;

/// Electric and magnetic fields on nodes.
struct FieldGrid {
  GridGeometry geometry;
  VectorField E;
  VectorField B;

  FieldGrid() = default;
  explicit FieldGrid(const GridGeometry& g) : geometry(g), E(g), B(g) {}
  bool operator==(const FieldGrid&) const = default;
};

/// Invokes fn(i, j, k) over the independent nodes of the geometry, x fastest.
template <class Fn>
void for_each_solver_node(const GridGeometry& g, Fn&& fn) {
  for (int k = 0; k < g.solver_nodes(2); ++k)
    for (int j = 0; j < g.solver_nodes(1); ++j)
      for (int i = 0; i < g.solver_nodes(0); ++i) fn(i, j, k);
}

/// Fills the periodic duplicate nodes and ghost layers from the independent nodes.
template <class T>
void sync_periodic(NodeArray<T>& f) {
  const auto& g = f.geometry();
  const int ex = g.extent(0), ey = g.extent(1), ez = g.extent(2);
  // Axis-by-axis sweep over full extents of the other axes so edges and corners are filled.
  {
    const int n = g.nodes[0];
    for (int k = -1; k < ez - 1; ++k)
      for (int j = -1; j < ey - 1; ++j) {
        f(n - 1, j, k) = f(0, j, k);
        f(-1, j, k) = f(n - 2, j, k);
        f(n, j, k) = f(1, j, k);
      }
  }
  {
    const int n = g.nodes[1];
    for (int k = -1; k < ez - 1; ++k)
      for (int i = -1; i < ex - 1; ++i) {
        f(i, n - 1, k) = f(i, 0, k);
        f(i, -1, k) = f(i, n - 2, k);
        f(i, n, k) = f(i, 1, k);
      }
  }
  {
    const int n = g.nodes[2];
    for (int j = -1; j < ey - 1; ++j)
      for (int i = -1; i < ex - 1; ++i) {
        f(i, j, n - 1) = f(i, j, 0);
        f(i, j, -1) = f(i, j, n - 2);
        f(i, j, n) = f(i, j, 1);
      }
  }
}

/// Zero-normal-derivative ghosts: ghost(-1) = node(1), ghost(n) = node(n-2).
template <class T>
void sync_neumann(NodeArray<T>& f) {
  const auto& g = f.geometry();
  const int ex = g.extent(0), ey = g.extent(1), ez = g.extent(2);
  {
    const int n = g.nodes[0];
    for (int k = -1; k < ez - 1; ++k)
      for (int j = -1; j < ey - 1; ++j) {
        f(-1, j, k) = f(1, j, k);
        f(n, j, k) = f(n - 2, j, k);
      }
  }
  {
    const int n = g.nodes[1];
    for (int k = -1; k < ez - 1; ++k)
      for (int i = -1; i < ex - 1; ++i) {
        f(i, -1, k) = f(i, 1, k);
        f(i, n, k) = f(i, n - 2, k);
      }
  }
  {
    const int n = g.nodes[2];
    for (int j = -1; j < ey - 1; ++j)
      for (int i = -1; i < ex - 1; ++i) {
        f(i, j, -1) = f(i, j, 1);
        f(i, j, n) = f(i, j, n - 2);
      }
  }
}

/// Copies every ghost value from a reference array (fixed external values).
template <class T>
void sync_fixed(NodeArray<T>& f, const NodeArray<T>& reference) {
  const auto& g = f.geometry();
  for (int k = -1; k <= g.nodes[2]; ++k)
    for (int j = -1; j <= g.nodes[1]; ++j)
      for (int i = -1; i <= g.nodes[0]; ++i) {
        const bool ghost = i < 0 || j < 0 || k < 0 || i >= g.nodes[0] || j >= g.nodes[1] || k >= g.nodes[2];
        if (ghost) f(i, j, k) = reference(i, j, k);
      }
}

/// Ghost sync for E-like and source quantities: periodic wrap or zero-normal-derivative.
template <class T>
void sync_ghosts(NodeArray<T>& f) {
  if (f.geometry().mode == BoundaryMode::Periodic)
    sync_periodic(f);
  else
    sync_neumann(f);
}

/// Adds periodic duplicate-node contributions into node 0 and re-mirrors them.
template <class T>
void fold_periodic(NodeArray<T>& f) {
  const auto& g = f.geometry();
  for (int a = 0; a < 3; ++a) {
    const int n = g.nodes[a];
    for (int k = 0; k < g.nodes[2]; ++k)
      for (int j = 0; j < g.nodes[1]; ++j)
        for (int i = 0; i < g.nodes[0]; ++i) {
          const int idx[3] = {i, j, k};
          if (idx[a] != 0) continue;
          int dup[3] = {i, j, k};
          dup[a] = n - 1;
          f(i, j, k) += f(dup[0], dup[1], dup[2]);
        }
    for (int k = 0; k < g.nodes[2]; ++k)
      for (int j = 0; j < g.nodes[1]; ++j)
        for (int i = 0; i < g.nodes[0]; ++i) {
          const int idx[3] = {i, j, k};
          if (idx[a] != n - 1) continue;
          int src[3] = {i, j, k};
          src[a] = 0;
          f(i, j, k) = f(src[0], src[1], src[2]);
        }
  }
}

// Second-order central-difference operators evaluated at node (i, j, k).
// Ghost values must be valid.

inline double divergence_at(const VectorField& f, int i, int j, int k) {
  const auto& g = f.geometry();
  return (f(i + 1, j, k).x - f(i - 1, j, k).x) / (2.0 * g.spacing(0)) +
         (f(i, j + 1, k).y - f(i, j - 1, k).y) / (2.0 * g.spacing(1)) +
         (f(i, j, k + 1).z - f(i, j, k - 1).z) / (2.0 * g.spacing(2));
}

inline Vec3 gradient_at(const ScalarField& f, int i, int j, int k) {
  const auto& g = f.geometry();
  return {(f(i + 1, j, k) - f(i - 1, j, k)) / (2.0 * g.spacing(0)),
          (f(i, j + 1, k) - f(i, j - 1, k)) / (2.0 * g.spacing(1)),
          (f(i, j, k + 1) - f(i, j, k - 1)) / (2.0 * g.spacing(2))};
}

inline Vec3 curl_at(const VectorField& f, int i, int j, int k) {
  const auto& g = f.geometry();
  const double hx = 2.0 * g.spacing(0), hy = 2.0 * g.spacing(1), hz = 2.0 * g.spacing(2);
  const double dzy = (f(i, j + 1, k).z - f(i, j - 1, k).z) / hy;
  const double dyz = (f(i, j, k + 1).y - f(i, j, k - 1).y) / hz;
  const double dxz = (f(i, j, k + 1).x - f(i, j, k - 1).x) / hz;
  const double dzx = (f(i + 1, j, k).z - f(i - 1, j, k).z) / hx;
  const double dyx = (f(i + 1, j, k).y - f(i - 1, j, k).y) / hx;
  const double dxy = (f(i, j + 1, k).x - f(i, j - 1, k).x) / hy;
  return {dzy - dyz, dxz - dzx, dyx - dxy};
}

/// (div Pi)_r = sum_c d_c Pi_rc.
inline Vec3 tensor_divergence_at(const TensorField& f, int i, int j, int k) {
  const auto& g = f.geometry();
  const double hx = 2.0 * g.spacing(0), hy = 2.0 * g.spacing(1), hz = 2.0 * g.spacing(2);
  Vec3 out;
  for (int r = 0; r < 3; ++r) {
    out[r] = (f(i + 1, j, k)(r, 0) - f(i - 1, j, k)(r, 0)) / hx +
             (f(i, j + 1, k)(r, 1) - f(i, j - 1, k)(r, 1)) / hy +
             (f(i, j, k + 1)(r, 2) - f(i, j, k - 1)(r, 2)) / hz;
  }
  return out;
}

/// Compact 7-point Laplacian.
template <class T>
T laplacian_at(const NodeArray<T>& f, int i, int j, int k) {
  const auto& g = f.geometry();
  const double ix2 = 1.0 / (g.spacing(0) * g.spacing(0));
  const double iy2 = 1.0 / (g.spacing(1) * g.spacing(1));
  const double iz2 = 1.0 / (g.spacing(2) * g.spacing(2));
  const T c = f(i, j, k);
  return (f(i + 1, j, k) + f(i - 1, j, k) - c * 2.0) * ix2 + (f(i, j + 1, k) + f(i, j - 1, k) - c * 2.0) * iy2 +
         (f(i, j, k + 1) + f(i, j, k - 1) - c * 2.0) * iz2;
}

}  // namespace ipic
