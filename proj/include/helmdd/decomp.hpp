#pragma once

/** @file decomp.hpp
    @brief Uniform box partition of the unit square, overlap extension and partition of unity.

    For an overlapping subdomain Omega_i (a union of mesh elements):
      - overl_dofs[i]  = dofs whose basis support meets Omega_i      (local space V~_i)
      - inner_dofs[i]  = dofs whose basis support lies in closure(Omega_i) (V_i, zero on the
                         subdomain boundary)
    The partition-of-unity operator Xi_i scales inner dofs by 1/mu_j and drops the rest.
*/

#include "helmdd/assembly.hpp"
#include "helmdd/common.hpp"
#include "helmdd/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <vector>

namespace helmdd {

struct Partition {
  int px = 1;
  int py = 1;
  std::vector<int> node_owner;
  /// Owner of each element, by the strip containing its centroid.
  std::vector<int> elem_owner;
  int num_subdomains() const { return px * py; }
};

/// Node (x, y) goes to strip (floor(x px), floor(y py)), clamped; nodes on an internal
/// partition line belong to the higher-index strip. Subdomain id = sy * px + sx.
inline Partition partition_uniform(const TriMesh& mesh, int px, int py) {
  if (px < 1 || py < 1) throw InvalidArgument("partition_uniform: px, py must be >= 1");
  if (px > mesh.n_cells || py > mesh.n_cells)
    throw InvalidArgument("partition_uniform: more strips than grid cells (empty subdomains)");
  const int n = mesh.n_cells;
  Partition p;
  p.px = px;
  p.py = py;
  p.node_owner.resize(mesh.nodes.size());
  for (int j = 0; j <= n; ++j) {
    for (int i = 0; i <= n; ++i) {
      const int sx = std::min(i * px / n, px - 1);
      const int sy = std::min(j * py / n, py - 1);
      p.node_owner[static_cast<std::size_t>(mesh.node_index(i, j))] = sy * px + sx;
    }
  }
  p.elem_owner.resize(mesh.triangles.size());
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto [ci, cj] = mesh.cell_of(t);
    const int sx = std::min((2 * ci + 1) * px / (2 * n), px - 1);
    const int sy = std::min((2 * cj + 1) * py / (2 * n), py - 1);
    p.elem_owner[static_cast<std::size_t>(t)] = sy * px + sx;
  }
  return p;
}

/// Square decomposition with N = p^2 subdomains.
inline Partition partition_square(const TriMesh& mesh, int N) {
  const int p = static_cast<int>(std::lround(std::sqrt(static_cast<double>(N))));
  if (p < 1 || p * p != N) throw InvalidArgument("number of subdomains must be a perfect square");
  return partition_uniform(mesh, p, p);
}

struct DecompLayout {
  int N = 0;
  int overlap_layers = 0;
  Partition partition;
  std::vector<std::vector<int>> elements;  ///< sorted element ids of Omega_i
  std::vector<IndexSet> overl_dofs;
  std::vector<IndexSet> inner_dofs;
  std::vector<std::vector<int>> inner_in_overl;  ///< position of each inner dof inside overl_dofs[i]
  std::vector<int> mu;                           ///< multiplicity per global dof
  std::vector<Vector> pou;                       ///< weights over overl_dofs[i]
  int Lambda = 0;
  std::vector<double> Hi;  ///< bounding-box diagonal of Omega_i
  std::vector<double> box_width;
  std::vector<double> box_height;
  double H = 0.0;

  int size() const { return N; }
  double mean_local_size() const {
    double s = 0.0;
    for (const auto& o : overl_dofs) s += static_cast<double>(o.size());
    return N > 0 ? s / N : 0.0;
  }
};

namespace detail {

struct NodeElementAdjacency {
  std::vector<int> offsets;
  std::vector<int> elements;
};

inline NodeElementAdjacency node_element_adjacency(const TriMesh& mesh) {
  NodeElementAdjacency adj;
  adj.offsets.assign(mesh.nodes.size() + 1, 0);
  for (const auto& tri : mesh.triangles)
    for (int v : tri) ++adj.offsets[static_cast<std::size_t>(v) + 1];
  for (std::size_t v = 0; v < mesh.nodes.size(); ++v) adj.offsets[v + 1] += adj.offsets[v];
  adj.elements.resize(static_cast<std::size_t>(adj.offsets.back()));
  std::vector<int> fill(adj.offsets.begin(), adj.offsets.end() - 1);
  for (int t = 0; t < mesh.num_triangles(); ++t)
    for (int v : mesh.triangles[static_cast<std::size_t>(t)]) adj.elements[static_cast<std::size_t>(fill[static_cast<std::size_t>(v)]++)] = t;
  return adj;
}

}  // namespace detail

/// Grow each non-overlapping subdomain by `layers` rounds of "all elements in the support
/// of a basis function touching the current region", then derive dof sets and weights.
/// The growth uses every mesh vertex (boundary ones included) so that corner elements are
/// handled like interior ones.
inline DecompLayout add_overlap(const TriMesh& mesh, const DofMap& dofs, const Partition& part, int layers) {
  if (layers < 1) throw InvalidArgument("add_overlap: at least one overlap layer is required");
  const int N = part.num_subdomains();
  const auto adj = detail::node_element_adjacency(mesh);
  const std::size_t n_tri = mesh.triangles.size();

  DecompLayout L;
  L.N = N;
  L.overlap_layers = layers;
  L.partition = part;
  L.elements.resize(static_cast<std::size_t>(N));
  L.overl_dofs.resize(static_cast<std::size_t>(N));
  L.inner_dofs.resize(static_cast<std::size_t>(N));
  L.inner_in_overl.resize(static_cast<std::size_t>(N));
  L.pou.resize(static_cast<std::size_t>(N));
  L.Hi.resize(static_cast<std::size_t>(N));
  L.box_width.resize(static_cast<std::size_t>(N));
  L.box_height.resize(static_cast<std::size_t>(N));
  L.mu.assign(static_cast<std::size_t>(dofs.size()), 0);

  std::vector<char> in_elem(n_tri, 0);
  std::vector<char> in_node(mesh.nodes.size(), 0);
  std::vector<int> elem_count(n_tri, 0);
  std::vector<std::vector<int>> owned(static_cast<std::size_t>(N));
  for (std::size_t t = 0; t < n_tri; ++t) owned[static_cast<std::size_t>(part.elem_owner[t])].push_back(static_cast<int>(t));

  for (int i = 0; i < N; ++i) {
    std::vector<int> elems = std::move(owned[static_cast<std::size_t>(i)]);
    for (int t : elems) in_elem[static_cast<std::size_t>(t)] = 1;

    for (int layer = 0; layer < layers; ++layer) {
      std::vector<int> touched;
      for (int t : elems)
        for (int v : mesh.triangles[static_cast<std::size_t>(t)])
          if (!in_node[static_cast<std::size_t>(v)]) {
            in_node[static_cast<std::size_t>(v)] = 1;
            touched.push_back(v);
          }
      for (int v : touched) {
        in_node[static_cast<std::size_t>(v)] = 0;
        for (int a = adj.offsets[static_cast<std::size_t>(v)]; a < adj.offsets[static_cast<std::size_t>(v) + 1]; ++a) {
          const int t = adj.elements[static_cast<std::size_t>(a)];
          if (!in_elem[static_cast<std::size_t>(t)]) {
            in_elem[static_cast<std::size_t>(t)] = 1;
            elems.push_back(t);
          }
        }
      }
    }
    std::sort(elems.begin(), elems.end());

    // Vertices of Omega_i, bounding box.
    std::vector<int> verts;
    for (int t : elems)
      for (int v : mesh.triangles[static_cast<std::size_t>(t)])
        if (!in_node[static_cast<std::size_t>(v)]) {
          in_node[static_cast<std::size_t>(v)] = 1;
          verts.push_back(v);
        }
    std::sort(verts.begin(), verts.end());
    double xmin = 1.0, xmax = 0.0, ymin = 1.0, ymax = 0.0;
    IndexSet& overl = L.overl_dofs[static_cast<std::size_t>(i)];
    IndexSet& inner = L.inner_dofs[static_cast<std::size_t>(i)];
    for (int v : verts) {
      const Point& p = mesh.nodes[static_cast<std::size_t>(v)];
      xmin = std::min(xmin, p.x);
      xmax = std::max(xmax, p.x);
      ymin = std::min(ymin, p.y);
      ymax = std::max(ymax, p.y);
      const int d = dofs.node_to_dof[static_cast<std::size_t>(v)];
      if (d < 0) continue;
      overl.push_back(d);
      bool all_inside = true;
      for (int a = adj.offsets[static_cast<std::size_t>(v)]; a < adj.offsets[static_cast<std::size_t>(v) + 1]; ++a)
        all_inside = all_inside && in_elem[static_cast<std::size_t>(adj.elements[static_cast<std::size_t>(a)])];
      if (all_inside) {
        L.inner_in_overl[static_cast<std::size_t>(i)].push_back(static_cast<int>(overl.size()) - 1);
        inner.push_back(d);
      }
    }
    // Dof numbering follows node numbering, so both lists are already sorted.
    for (int v : verts) in_node[static_cast<std::size_t>(v)] = 0;
    for (int t : elems) {
      in_elem[static_cast<std::size_t>(t)] = 0;
      ++elem_count[static_cast<std::size_t>(t)];
    }
    for (int d : inner) ++L.mu[static_cast<std::size_t>(d)];

    const double w = xmax - xmin, h = ymax - ymin;
    L.box_width[static_cast<std::size_t>(i)] = w;
    L.box_height[static_cast<std::size_t>(i)] = h;
    L.Hi[static_cast<std::size_t>(i)] = std::sqrt(w * w + h * h);
    L.elements[static_cast<std::size_t>(i)] = std::move(elems);
  }

  for (std::size_t d = 0; d < L.mu.size(); ++d)
    if (L.mu[d] < 1) throw NumericalError("add_overlap: a dof is not covered by any subdomain interior");

  for (int i = 0; i < N; ++i) {
    const auto& overl = L.overl_dofs[static_cast<std::size_t>(i)];
    Vector w = Vector::Zero(static_cast<Index>(overl.size()));
    for (int pos : L.inner_in_overl[static_cast<std::size_t>(i)])
      w[pos] = 1.0 / L.mu[static_cast<std::size_t>(overl[static_cast<std::size_t>(pos)])];
    L.pou[static_cast<std::size_t>(i)] = std::move(w);
  }
  L.Lambda = *std::max_element(elem_count.begin(), elem_count.end());
  L.H = *std::max_element(L.Hi.begin(), L.Hi.end());
  return L;
}

inline DecompLayout add_overlap(const TriMesh& mesh, const Partition& part, int layers) {
  return add_overlap(mesh, interior_dof_map(mesh), part, layers);
}

/// E_i: local vector on V_i (inner_dofs[i]) -> global vector.
inline Vector extend_by_zero(const DecompLayout& L, int i, const Vector& local, int n_global) {
  const auto& idx = L.inner_dofs.at(static_cast<std::size_t>(i));
  if (local.size() != static_cast<Index>(idx.size()))
    throw std::out_of_range("extend_by_zero: local vector does not match V_i");
  Vector out = Vector::Zero(n_global);
  scatter_add(out, idx, local);
  return out;
}

/// R_i = E_i^T: global vector -> values on V_i.
inline Vector restrict_inner(const DecompLayout& L, int i, const Vector& global) {
  return gather(global, L.inner_dofs.at(static_cast<std::size_t>(i)));
}

/// v|Omega_i as a vector on V~_i.
inline Vector restrict_overl(const DecompLayout& L, int i, const Vector& global) {
  return gather(global, L.overl_dofs.at(static_cast<std::size_t>(i)));
}

/// Xi_i: local vector on V~_i -> local vector on V_i.
inline Vector apply_pou(const DecompLayout& L, int i, const Vector& local_overl) {
  const auto& pos = L.inner_in_overl.at(static_cast<std::size_t>(i));
  const Vector& w = L.pou[static_cast<std::size_t>(i)];
  Vector out(static_cast<Index>(pos.size()));
  for (std::size_t a = 0; a < pos.size(); ++a) out[static_cast<Index>(a)] = w[pos[a]] * local_overl[pos[a]];
  return out;
}

/// Layout summary CSV: "i,n_loc,n_inner,H_i,H_i_in_wavelengths".
inline void write_layout_csv(std::ostream& os, const DecompLayout& L, double k) {
  const double wavelength = 2.0 * std::numbers::pi / k;
  os << "i,n_loc,n_inner,H_i,H_i_in_wavelengths\n";
  for (int i = 0; i < L.N; ++i) {
    const auto s = static_cast<std::size_t>(i);
    os << i << ',' << L.overl_dofs[s].size() << ',' << L.inner_dofs[s].size() << ',' << L.Hi[s] << ','
       << L.Hi[s] / wavelength << '\n';
  }
}

}  // namespace helmdd
