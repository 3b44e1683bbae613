#pragma once

/** @file assembly.hpp
    @brief P1 assembly of stiffness, mass, Helmholtz and k-weighted matrices and load vectors.

    Dirichlet nodes are eliminated: all global matrices live on interior dofs, numbered
    in the same row-major order as the mesh nodes they come from.
*/

#include "helmdd/common.hpp"
#include "helmdd/mesh.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <memory>
#include <numbers>
#include <ostream>
#include <span>
#include <vector>

namespace helmdd {

struct CoefficientField {
  enum class Kind { homogeneous, layered };
  Kind kind = Kind::homogeneous;
  double a_max = 1.0;

  static CoefficientField homogeneous() { return {}; }
  static CoefficientField layered(double a_max) {
    if (!(a_max >= 1.0)) throw InvalidArgument("layered coefficient requires a_max >= 1");
    return {Kind::layered, a_max};
  }

  /// a(x, y): a_max on the five bands y in [0.2m, 0.2m + 0.1), 1 elsewhere.
  double operator()(const Point& p) const {
    if (kind == Kind::homogeneous) return 1.0;
    const int band = static_cast<int>(std::floor(p.y * 10.0));
    return (band % 2 == 0 && band >= 0 && band < 10) ? a_max : 1.0;
  }
};

/// Interior dof numbering: node_to_dof is -1 on boundary nodes.
struct DofMap {
  std::vector<int> node_to_dof;
  std::vector<int> dof_to_node;
  int size() const { return static_cast<int>(dof_to_node.size()); }
};

inline DofMap interior_dof_map(const TriMesh& mesh) {
  DofMap map;
  map.node_to_dof.assign(mesh.nodes.size(), -1);
  for (int v = 0; v < mesh.num_nodes(); ++v) {
    if (!mesh.boundary_mask[static_cast<std::size_t>(v)]) {
      map.node_to_dof[static_cast<std::size_t>(v)] = map.size();
      map.dof_to_node.push_back(v);
    }
  }
  return map;
}

/// Every node is a dof; used for pre-elimination checks.
inline DofMap full_dof_map(const TriMesh& mesh) {
  DofMap map;
  map.node_to_dof.resize(mesh.nodes.size());
  map.dof_to_node.resize(mesh.nodes.size());
  for (int v = 0; v < mesh.num_nodes(); ++v) {
    map.node_to_dof[static_cast<std::size_t>(v)] = v;
    map.dof_to_node[static_cast<std::size_t>(v)] = v;
  }
  return map;
}

using ElementMatrix = std::array<std::array<double, 3>, 3>;

/// Exact P1 stiffness of triangle t with unit coefficient.
inline ElementMatrix element_stiffness(const TriMesh& mesh, int t) {
  const auto& tri = mesh.triangles[static_cast<std::size_t>(t)];
  std::array<Point, 3> p;
  for (int a = 0; a < 3; ++a) p[static_cast<std::size_t>(a)] = mesh.nodes[static_cast<std::size_t>(tri[static_cast<std::size_t>(a)])];
  const double area = mesh.signed_area(t);
  // grad(phi_a) = (y_b - y_c, x_c - x_b) / (2 area) with (a, b, c) cyclic
  std::array<std::array<double, 2>, 3> g;
  for (int a = 0; a < 3; ++a) {
    const Point& pb = p[static_cast<std::size_t>((a + 1) % 3)];
    const Point& pc = p[static_cast<std::size_t>((a + 2) % 3)];
    g[static_cast<std::size_t>(a)] = {(pb.y - pc.y) / (2.0 * area), (pc.x - pb.x) / (2.0 * area)};
  }
  ElementMatrix k{};
  for (std::size_t a = 0; a < 3; ++a)
    for (std::size_t b = 0; b < 3; ++b) k[a][b] = area * (g[a][0] * g[b][0] + g[a][1] * g[b][1]);
  return k;
}

/// Consistent P1 mass: (area / 12) [[2,1,1],[1,2,1],[1,1,2]].
inline ElementMatrix element_mass(const TriMesh& mesh, int t) {
  const double area = mesh.signed_area(t);
  ElementMatrix m{};
  for (std::size_t a = 0; a < 3; ++a)
    for (std::size_t b = 0; b < 3; ++b) m[a][b] = area / 12.0 * (a == b ? 2.0 : 1.0);
  return m;
}

/// Piecewise-constant coefficient sampled at element centroids.
inline std::vector<double> element_coefficients(const TriMesh& mesh, const CoefficientField& coeff) {
  std::vector<double> a(mesh.triangles.size());
  for (int t = 0; t < mesh.num_triangles(); ++t) a[static_cast<std::size_t>(t)] = coeff(mesh.centroid(t));
  return a;
}

/// Sum alpha * a_T * K_T + beta * M_T over `elements`, mapping nodes through `node_to_row`
/// (entries < 0 are dropped). Triplets are merged in element order.
inline SparseMatrix assemble_p1(const TriMesh& mesh, std::span<const int> node_to_row, int n_rows,
                                std::span<const int> elements, std::span<const double> elem_coeff,
                                double stiffness_weight, double mass_weight) {
  std::vector<Triplet> trips;
  trips.reserve(elements.size() * 9);
  for (int t : elements) {
    const auto& tri = mesh.triangles[static_cast<std::size_t>(t)];
    const ElementMatrix ke = element_stiffness(mesh, t);
    const ElementMatrix me = element_mass(mesh, t);
    const double a = elem_coeff.empty() ? 1.0 : elem_coeff[static_cast<std::size_t>(t)];
    for (std::size_t p = 0; p < 3; ++p) {
      const int r = node_to_row[static_cast<std::size_t>(tri[p])];
      if (r < 0) continue;
      for (std::size_t q = 0; q < 3; ++q) {
        const int c = node_to_row[static_cast<std::size_t>(tri[q])];
        if (c < 0) continue;
        trips.emplace_back(r, c, stiffness_weight * a * ke[p][q] + mass_weight * me[p][q]);
      }
    }
  }
  SparseMatrix out(n_rows, n_rows);
  out.setFromTriplets(trips.begin(), trips.end());
  out.makeCompressed();
  return out;
}

inline std::vector<int> all_elements(const TriMesh& mesh) {
  std::vector<int> e(mesh.triangles.size());
  for (int t = 0; t < mesh.num_triangles(); ++t) e[static_cast<std::size_t>(t)] = t;
  return e;
}

inline SparseMatrix assemble_stiffness(const TriMesh& mesh, const CoefficientField& coeff,
                                       const DofMap& dofs) {
  const auto elems = all_elements(mesh);
  const auto a = element_coefficients(mesh, coeff);
  return assemble_p1(mesh, dofs.node_to_dof, dofs.size(), elems, a, 1.0, 0.0);
}

inline SparseMatrix assemble_stiffness(const TriMesh& mesh, const CoefficientField& coeff) {
  return assemble_stiffness(mesh, coeff, interior_dof_map(mesh));
}

inline SparseMatrix assemble_mass(const TriMesh& mesh, const DofMap& dofs) {
  const auto elems = all_elements(mesh);
  return assemble_p1(mesh, dofs.node_to_dof, dofs.size(), elems, {}, 0.0, 1.0);
}

inline SparseMatrix assemble_mass(const TriMesh& mesh) { return assemble_mass(mesh, interior_dof_map(mesh)); }

/// Assembled Helmholtz system on interior dofs.
struct FeSystem {
  double k = 0.0;
  SparseMatrix A;   ///< stiffness
  SparseMatrix S;   ///< consistent mass
  SparseMatrix B;   ///< A - k^2 S
  SparseMatrix Dk;  ///< A + k^2 S
  Vector rhs;
  DofMap dofs;
  std::vector<double> elem_coeff;  ///< a(centroid_T) per element
  std::shared_ptr<const TriMesh> mesh;

  int size() const { return dofs.size(); }
};

inline FeSystem assemble_system(const TriMesh& mesh, const CoefficientField& coeff, double k) {
  if (!(k >= 0.0)) throw InvalidArgument("assemble_system: k must be non-negative");
  FeSystem sys;
  sys.k = k;
  sys.mesh = std::make_shared<const TriMesh>(mesh);
  sys.dofs = interior_dof_map(mesh);
  sys.elem_coeff = element_coefficients(mesh, coeff);
  const auto elems = all_elements(mesh);
  sys.A = assemble_p1(mesh, sys.dofs.node_to_dof, sys.dofs.size(), elems, sys.elem_coeff, 1.0, 0.0);
  sys.S = assemble_p1(mesh, sys.dofs.node_to_dof, sys.dofs.size(), elems, {}, 0.0, 1.0);
  const double k2 = k * k;
  sys.B = sys.A - k2 * sys.S;
  sys.Dk = sys.A + k2 * sys.S;
  sys.B.makeCompressed();
  sys.Dk.makeCompressed();
  sys.rhs = Vector::Zero(sys.dofs.size());
  return sys;
}

/// Load vector (f, phi_i) with the 3-point degree-2 rule at barycentric (2/3, 1/6, 1/6).
inline Vector assemble_load(const TriMesh& mesh, const DofMap& dofs,
                            const std::function<double(double, double)>& f) {
  static constexpr std::array<std::array<double, 3>, 3> bary = {{
      {2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0},
      {1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0},
      {1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0},
  }};
  Vector rhs = Vector::Zero(dofs.size());
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangles[static_cast<std::size_t>(t)];
    const double w = mesh.signed_area(t) / 3.0;
    for (const auto& l : bary) {
      double x = 0.0, y = 0.0;
      for (std::size_t a = 0; a < 3; ++a) {
        x += l[a] * mesh.nodes[static_cast<std::size_t>(tri[a])].x;
        y += l[a] * mesh.nodes[static_cast<std::size_t>(tri[a])].y;
      }
      const double fq = w * f(x, y);
      for (std::size_t a = 0; a < 3; ++a) {
        const int d = dofs.node_to_dof[static_cast<std::size_t>(tri[a])];
        if (d >= 0) rhs[d] += fq * l[a];
      }
    }
  }
  return rhs;
}

/// f = 1e4 exp(-1e3 ((x - 1/2)^2 + (y - 1/2)^2))
inline double gaussian_point_source(double x, double y) {
  const double dx = x - 0.5, dy = y - 0.5;
  return 1e4 * std::exp(-1e3 * (dx * dx + dy * dy));
}

inline Vector assemble_gaussian_source(const TriMesh& mesh, const DofMap& dofs) {
  return assemble_load(mesh, dofs, gaussian_point_source);
}

inline Vector assemble_gaussian_source(const TriMesh& mesh) {
  return assemble_gaussian_source(mesh, interior_dof_map(mesh));
}

/// ((m^2 + n^2) pi^2 - k^2): forcing amplitude for u = sin(m pi x) sin(n pi y) with a = 1.
inline double manufactured_coefficient(double k, int m, int n) {
  constexpr double pi = std::numbers::pi;
  return (static_cast<double>(m * m + n * n)) * pi * pi - k * k;
}

inline double manufactured_solution(double x, double y, int m, int n) {
  constexpr double pi = std::numbers::pi;
  return std::sin(m * pi * x) * std::sin(n * pi * y);
}

inline Vector manufactured_rhs(const TriMesh& mesh, double k, int m, int n) {
  if (m < 1 || n < 1) throw InvalidArgument("manufactured_rhs: m, n must be >= 1");
  const double c = manufactured_coefficient(k, m, n);
  if (std::abs(c) <= 1e-8)
    throw ResonanceError("manufactured_rhs: k^2 coincides with the eigenvalue (m^2+n^2) pi^2");
  return assemble_load(mesh, interior_dof_map(mesh),
                       [=](double x, double y) { return c * manufactured_solution(x, y, m, n); });
}

/// Nodal interpolant of g on interior dofs.
inline Vector interpolate(const TriMesh& mesh, const DofMap& dofs,
                          const std::function<double(double, double)>& g) {
  Vector v(dofs.size());
  for (int d = 0; d < dofs.size(); ++d) {
    const Point& p = mesh.nodes[static_cast<std::size_t>(dofs.dof_to_node[static_cast<std::size_t>(d)])];
    v[d] = g(p.x, p.y);
  }
  return v;
}

/// Coordinate dump, one "row col value" per stored entry (0-based, 17 significant digits).
template <class Mat>
void write_coordinate(std::ostream& os, const Mat& m) {
  const auto old = os.precision(17);
  const SparseMatrix rm = m;
  for (Index r = 0; r < rm.outerSize(); ++r)
    for (SparseMatrix::InnerIterator it(rm, r); it; ++it) os << it.row() << ' ' << it.col() << ' ' << it.value() << '\n';
  os.precision(old);
}

}  // namespace helmdd
