#pragma once

/** @file mesh.hpp
    @brief Structured P1 triangulation of the unit square with alternating diagonals.

    Nodes are numbered row-major (y outer, x inner): node (i, j) at (i*h, j*h) has
    index j*(n_cells+1) + i. Cell (i, j) is split along the lower-left/upper-right
    diagonal when i+j is even and along the other diagonal when i+j is odd.
*/

#include "helmdd/common.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <ostream>
#include <vector>

namespace helmdd {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

struct TriMesh {
  int n_cells = 0;
  double h = 0.0;
  std::vector<Point> nodes;
  /// Node-index triples, counter-clockwise.
  std::vector<std::array<int, 3>> triangles;
  std::vector<bool> boundary_mask;

  int num_nodes() const { return static_cast<int>(nodes.size()); }
  int num_triangles() const { return static_cast<int>(triangles.size()); }
  int node_index(int i, int j) const { return j * (n_cells + 1) + i; }

  /// Grid cell (i, j) containing triangle t; two triangles per cell, stored consecutively.
  std::array<int, 2> cell_of(int t) const {
    const int c = t / 2;
    return {c % n_cells, c / n_cells};
  }

  Point centroid(int t) const {
    const auto& tri = triangles[static_cast<std::size_t>(t)];
    Point c;
    for (int v : tri) {
      c.x += nodes[static_cast<std::size_t>(v)].x;
      c.y += nodes[static_cast<std::size_t>(v)].y;
    }
    c.x /= 3.0;
    c.y /= 3.0;
    return c;
  }

  double signed_area(int t) const {
    const auto& tri = triangles[static_cast<std::size_t>(t)];
    const Point& a = nodes[static_cast<std::size_t>(tri[0])];
    const Point& b = nodes[static_cast<std::size_t>(tri[1])];
    const Point& c = nodes[static_cast<std::size_t>(tri[2])];
    return 0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y));
  }
};

inline TriMesh build_unit_square_mesh(int n_cells) {
  if (n_cells < 2) throw InvalidArgument("build_unit_square_mesh: n_cells must be >= 2");
  TriMesh m;
  m.n_cells = n_cells;
  m.h = 1.0 / n_cells;
  const int np = n_cells + 1;
  m.nodes.reserve(static_cast<std::size_t>(np) * np);
  m.boundary_mask.reserve(static_cast<std::size_t>(np) * np);
  for (int j = 0; j < np; ++j) {
    for (int i = 0; i < np; ++i) {
      // i/n rather than i*h keeps x = 1 exact on the right edge.
      m.nodes.push_back({static_cast<double>(i) / n_cells, static_cast<double>(j) / n_cells});
      m.boundary_mask.push_back(i == 0 || j == 0 || i == n_cells || j == n_cells);
    }
  }
  m.triangles.reserve(2 * static_cast<std::size_t>(n_cells) * n_cells);
  for (int j = 0; j < n_cells; ++j) {
    for (int i = 0; i < n_cells; ++i) {
      const int ll = m.node_index(i, j);
      const int lr = m.node_index(i + 1, j);
      const int ul = m.node_index(i, j + 1);
      const int ur = m.node_index(i + 1, j + 1);
      if ((i + j) % 2 == 0) {
        m.triangles.push_back({ll, lr, ur});
        m.triangles.push_back({ll, ur, ul});
      } else {
        m.triangles.push_back({ll, lr, ul});
        m.triangles.push_back({lr, ur, ul});
      }
    }
  }
  return m;
}

/// Smallest n_cells with k / n_cells <= kh_target.
inline int mesh_for_wavenumber(double k, double kh_target) {
  if (!(k > 0.0)) throw InvalidArgument("mesh_for_wavenumber: k must be positive");
  if (!(kh_target > 0.0 && kh_target <= 1.0))
    throw InvalidArgument("mesh_for_wavenumber: kh_target must lie in (0, 1]");
  // Guard against k/kh landing a hair above an integer, e.g. 20/0.1.
  const double ratio = k / kh_target;
  int n = static_cast<int>(std::ceil(ratio - 1e-9 * ratio));
  while (k / n > kh_target) ++n;
  return std::max(n, 2);
}

/// Debug dump: "n_cells h", node lines "x y boundary_flag", triangle lines "i j k".
inline void write_mesh(std::ostream& os, const TriMesh& m) {
  const auto old = os.precision(17);
  os << m.n_cells << ' ' << m.h << '\n';
  for (std::size_t v = 0; v < m.nodes.size(); ++v)
    os << m.nodes[v].x << ' ' << m.nodes[v].y << ' ' << (m.boundary_mask[v] ? 1 : 0) << '\n';
  for (const auto& t : m.triangles) os << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
  os.precision(old);
}

}  // namespace helmdd
