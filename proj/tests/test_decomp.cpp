#include "helmdd/decomp.hpp"

#include <gtest/gtest.h>

#include <random>
#include <set>
#include <sstream>

using namespace helmdd;

namespace {

Vector random_vector(std::mt19937_64& rng, Index n) {
  std::normal_distribution<double> nd;
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = nd(rng);
  return v;
}

DecompLayout layout(int n_cells, int N, int layers = 1) {
  const TriMesh m = build_unit_square_mesh(n_cells);
  return add_overlap(m, partition_square(m, N), layers);
}

}  // namespace

TEST(Partition, SingleDomain) {
  const TriMesh m = build_unit_square_mesh(5);
  const Partition p = partition_uniform(m, 1, 1);
  for (int o : p.node_owner) EXPECT_EQ(o, 0);
  for (int o : p.elem_owner) EXPECT_EQ(o, 0);
}

TEST(Partition, TwoByTwoOnFourCells) {
  const TriMesh m = build_unit_square_mesh(4);
  const Partition p = partition_uniform(m, 2, 2);
  // x = 0.5 and y = 0.5 belong to the higher strip.
  for (int j = 0; j <= 4; ++j)
    for (int i = 0; i <= 4; ++i) {
      const int expect = (j >= 2 ? 2 : 0) + (i >= 2 ? 1 : 0);
      EXPECT_EQ(p.node_owner[static_cast<std::size_t>(m.node_index(i, j))], expect) << i << "," << j;
    }
  std::vector<int> cells(4, 0);
  for (int o : p.elem_owner) ++cells[static_cast<std::size_t>(o)];
  for (int c : cells) EXPECT_EQ(c, 8);  // 2x2 cells, two triangles each
}

TEST(Partition, Errors) {
  const TriMesh m = build_unit_square_mesh(4);
  EXPECT_THROW(partition_uniform(m, 5, 1), InvalidArgument);
  EXPECT_THROW(partition_uniform(m, 0, 1), InvalidArgument);
  EXPECT_THROW(partition_square(m, 8), InvalidArgument);
}

TEST(Partition, SixtyFourOnPaperMesh) {
  const TriMesh m = build_unit_square_mesh(200);
  const Partition p = partition_square(m, 64);
  EXPECT_EQ(p.num_subdomains(), 64);
  std::set<int> owners(p.elem_owner.begin(), p.elem_owner.end());
  EXPECT_EQ(owners.size(), 64u);
}

TEST(Overlap, SingleDomainIsTrivial) {
  const DecompLayout L = layout(6, 1);
  ASSERT_EQ(L.N, 1);
  EXPECT_EQ(L.overl_dofs[0].size(), 25u);
  EXPECT_EQ(L.inner_dofs[0], L.overl_dofs[0]);
  EXPECT_EQ(L.Lambda, 1);
  for (int mu : L.mu) EXPECT_EQ(mu, 1);
  for (Index a = 0; a < L.pou[0].size(); ++a) EXPECT_EQ(L.pou[0][a], 1.0);
}

TEST(Overlap, MultiplicityOnCentralLines) {
  const TriMesh m = build_unit_square_mesh(8);
  const DofMap d = interior_dof_map(m);
  const DecompLayout L = add_overlap(m, d, partition_square(m, 4), 1);
  for (int j = 1; j < 8; ++j)
    for (int i = 1; i < 8; ++i) {
      const int mu = L.mu[static_cast<std::size_t>(d.node_to_dof[static_cast<std::size_t>(m.node_index(i, j))])];
      const int expect = (i == 4 && j == 4) ? 4 : (i == 4 || j == 4) ? 2 : 1;
      EXPECT_EQ(mu, expect) << i << "," << j;
    }
  EXPECT_EQ(L.Lambda, 4);
}

TEST(Overlap, Invariants) {
  for (int N : {4, 9, 16}) {
    const DecompLayout L = layout(24, N);
    const int n = static_cast<int>(L.mu.size());
    Vector sum = Vector::Zero(n);
    std::vector<int> covered(static_cast<std::size_t>(n), 0);
    for (int i = 0; i < N; ++i) {
      const auto& in = L.inner_dofs[static_cast<std::size_t>(i)];
      const auto& ov = L.overl_dofs[static_cast<std::size_t>(i)];
      EXPECT_TRUE(std::includes(ov.begin(), ov.end(), in.begin(), in.end()));
      EXPECT_TRUE(std::is_sorted(ov.begin(), ov.end()));
      for (int dof : in) covered[static_cast<std::size_t>(dof)] = 1;
      const Vector& w = L.pou[static_cast<std::size_t>(i)];
      for (std::size_t a = 0; a < ov.size(); ++a) {
        sum[ov[a]] += w[static_cast<Index>(a)];
        EXPECT_GE(w[static_cast<Index>(a)], 0.0);
        EXPECT_LE(w[static_cast<Index>(a)], 1.0);
      }
      for (int pos : L.inner_in_overl[static_cast<std::size_t>(i)]) EXPECT_GT(w[pos], 0.0);
    }
    for (int c : covered) EXPECT_EQ(c, 1);
    for (int j = 0; j < n; ++j) EXPECT_NEAR(sum[j], 1.0, 1e-15);
    EXPECT_GE(L.Lambda, 1);
    EXPECT_LE(L.Lambda, 4);
  }
}

TEST(Overlap, DiameterShrinksWithN) {
  const double h4 = layout(40, 4).H, h16 = layout(40, 16).H, h64 = layout(40, 64).H;
  EXPECT_LT(h64, h16);
  EXPECT_LT(h16, h4);
}

TEST(Overlap, MoreLayersGrowSubdomains) {
  const DecompLayout a = layout(24, 9, 1), b = layout(24, 9, 2);
  EXPECT_GT(b.mean_local_size(), a.mean_local_size());
  EXPECT_THROW(layout(24, 9, 0), InvalidArgument);
}

TEST(Operators, ExtendRestrictAdjoint) {
  const DecompLayout L = layout(12, 4);
  const int n = static_cast<int>(L.mu.size());
  std::mt19937_64 rng(1);
  for (int i = 0; i < 4; ++i) {
    const Index ni = static_cast<Index>(L.inner_dofs[static_cast<std::size_t>(i)].size());
    const Vector v = random_vector(rng, ni), w = random_vector(rng, n);
    const Vector Ev = extend_by_zero(L, i, v, n);
    EXPECT_NEAR(Ev.dot(w), v.dot(restrict_inner(L, i, w)), 1e-12);
    EXPECT_EQ((restrict_inner(L, i, Ev) - v).norm(), 0.0);
    EXPECT_EQ(extend_by_zero(L, i, Vector::Zero(ni), n).norm(), 0.0);
  }
  EXPECT_THROW(extend_by_zero(L, 0, Vector::Zero(1), n), std::out_of_range);
}

TEST(Operators, PartitionOfUnityReconstruction) {
  const DecompLayout L = layout(15, 9);
  const int n = static_cast<int>(L.mu.size());
  std::mt19937_64 rng(2);
  const Vector v = random_vector(rng, n);
  Vector sum = Vector::Zero(n);
  for (int i = 0; i < 9; ++i) sum += extend_by_zero(L, i, apply_pou(L, i, restrict_overl(L, i, v)), n);
  EXPECT_LE((sum - v).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Operators, PouKernelIsTheRing) {
  const DecompLayout L = layout(12, 4);
  for (int i = 0; i < 4; ++i) {
    const auto& ov = L.overl_dofs[static_cast<std::size_t>(i)];
    Vector ring = Vector::Ones(static_cast<Index>(ov.size()));
    for (int pos : L.inner_in_overl[static_cast<std::size_t>(i)]) ring[pos] = 0.0;
    EXPECT_GT(ring.sum(), 0.0);
    EXPECT_EQ(apply_pou(L, i, ring).norm(), 0.0);
  }
}

TEST(Operators, PouIsIdentityForOneDomain) {
  const DecompLayout L = layout(7, 1);
  std::mt19937_64 rng(9);
  const Vector v = random_vector(rng, static_cast<Index>(L.mu.size()));
  EXPECT_EQ((apply_pou(L, 0, v) - v).norm(), 0.0);
}

TEST(Overlap, StabilityRelations) {
  const TriMesh m = build_unit_square_mesh(20);
  const FeSystem sys = assemble_system(m, CoefficientField::layered(5.0), 6.0);
  const DecompLayout L = add_overlap(m, sys.dofs, partition_square(m, 9), 1);
  std::mt19937_64 rng(4);
  const int n = sys.size();
  for (int s = 0; s < 100; ++s) {
    Vector sum = Vector::Zero(n);
    double parts = 0.0;
    for (int i = 0; i < L.N; ++i) {
      const auto& idx = L.inner_dofs[static_cast<std::size_t>(i)];
      const Vector q = random_vector(rng, static_cast<Index>(idx.size()));
      scatter_add(sum, idx, q);
      parts += q.dot(principal_submatrix(sys.Dk, idx) * q);
    }
    EXPECT_LE(sum.dot(sys.Dk * sum), L.Lambda * parts * (1.0 + 1e-12));
  }
}

TEST(Layout, CsvSummary) {
  const DecompLayout L = layout(10, 4);
  std::ostringstream os;
  write_layout_csv(os, L, 10.0);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "i,n_loc,n_inner,H_i,H_i_in_wavelengths");
  int rows = 0;
  while (std::getline(is, line)) ++rows;
  EXPECT_EQ(rows, 4);
}
