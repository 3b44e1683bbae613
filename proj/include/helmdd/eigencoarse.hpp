#pragma once

/** @file eigencoarse.hpp
    @brief Local GenEO-type eigenproblems and the spectral coarse space built from them.

    Three pencils on the overlapping local space V~_i, all with Neumann-style local
    matrices (only elements of Omega_i contribute) and D_i = diag(partition of unity):

      Delta   A_i p             = lambda D_i A_i D_i p
      DeltaK  A_i p             = lambda D_i (A_i + k^2 S_i) D_i p
      Hk      (A_i - k^2 S_i) p = lambda D_i (A_i + k^2 S_i) D_i p

    Eigenvectors are normalised so that p^T Rhs p = 1, i.e. Xi_i p has unit norm in the
    variant's right-hand-side inner product.
*/

#include "helmdd/assembly.hpp"
#include "helmdd/common.hpp"
#include "helmdd/decomp.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace helmdd {

enum class GeneoVariant { Delta, DeltaK, Hk };

inline std::string_view to_string(GeneoVariant v) {
  switch (v) {
    case GeneoVariant::Delta: return "delta";
    case GeneoVariant::DeltaK: return "delta_k";
    case GeneoVariant::Hk: return "hk";
  }
  return "?";
}

/// Neumann-style local matrices of subdomain i on overl_dofs[i].
struct LocalMatrices {
  SparseMatrix A;  ///< a_{Omega_i}
  SparseMatrix S;  ///< (.,.)_{L2(Omega_i)}
};

inline LocalMatrices local_neumann_matrices(const FeSystem& sys, const DecompLayout& L, int i) {
  const TriMesh& mesh = *sys.mesh;
  const auto& overl = L.overl_dofs[static_cast<std::size_t>(i)];
  std::vector<int> node_to_row(mesh.nodes.size(), -1);
  for (std::size_t a = 0; a < overl.size(); ++a)
    node_to_row[static_cast<std::size_t>(sys.dofs.dof_to_node[static_cast<std::size_t>(overl[a])])] = static_cast<int>(a);
  const auto& elems = L.elements[static_cast<std::size_t>(i)];
  const int n = static_cast<int>(overl.size());
  return {assemble_p1(mesh, node_to_row, n, elems, sys.elem_coeff, 1.0, 0.0),
          assemble_p1(mesh, node_to_row, n, elems, {}, 0.0, 1.0)};
}

struct LocalPencil {
  GeneoVariant variant = GeneoVariant::DeltaK;
  int subdomain = 0;
  double k = 0.0;
  SparseMatrix Lhs;
  SparseMatrix Rhs;
  LocalMatrices local;
  Vector weights;  ///< pou over overl_dofs[i]

  int size() const { return static_cast<int>(Lhs.rows()); }
};

inline LocalPencil build_local_pencil(const FeSystem& sys, const DecompLayout& L, int i, GeneoVariant variant) {
  if (i < 0 || i >= L.N) throw InvalidArgument("build_local_pencil: subdomain index out of range");
  LocalPencil p;
  p.variant = variant;
  p.subdomain = i;
  p.k = sys.k;
  p.local = local_neumann_matrices(sys, L, i);
  p.weights = L.pou[static_cast<std::size_t>(i)];
  const double k2 = sys.k * sys.k;
  const SparseMatrix Mk = p.local.A + k2 * p.local.S;
  p.Lhs = variant == GeneoVariant::Hk ? SparseMatrix(p.local.A - k2 * p.local.S) : p.local.A;
  const SparseMatrix& M = variant == GeneoVariant::Delta ? p.local.A : Mk;
  p.Rhs = p.weights.asDiagonal() * M * p.weights.asDiagonal();
  p.Lhs.makeCompressed();
  p.Rhs.makeCompressed();
  return p;
}

struct EigenOptions {
  enum class Method { automatic, dense, lanczos };
  Method method = Method::automatic;
  int dense_cutoff = 600;   ///< automatic: dense at or below this local size
  int block = 8;
  double residual_tol = 1e-9;
  int max_modes = -1;       ///< per-subdomain cap on kept modes, -1 = none
  std::uint64_t seed = 20240601;
};

/// Finite eigenpairs of a local pencil, ascending. `values` holds at least the kept
/// eigenvalues and, when one exists, the first unused one.
struct LocalEigen {
  std::vector<double> values;
  DenseMatrix vectors;  ///< kept eigenvectors (columns), Rhs-orthonormal
  int kept = 0;
  double first_unused = std::numeric_limits<double>::infinity();
  bool dense = false;
};

namespace detail {

constexpr double kDropTol = 1e-10;

inline LocalEigen select_modes(std::vector<double> vals, const DenseMatrix& vecs, double tau, int max_modes) {
  LocalEigen out;
  int kept = 0;
  while (kept < static_cast<int>(vals.size()) && vals[static_cast<std::size_t>(kept)] <= tau) ++kept;
  if (max_modes >= 0) kept = std::min(kept, max_modes);
  out.kept = kept;
  if (kept < static_cast<int>(vals.size())) out.first_unused = vals[static_cast<std::size_t>(kept)];
  out.vectors = vecs.leftCols(kept);
  out.values = std::move(vals);
  return out;
}

// PSD/PSD pencil: Lhs x = nu (Lhs + Rhs) x via Cholesky congruence, lambda = nu / (1 - nu).
inline LocalEigen dense_psd(const LocalPencil& p, double tau, int max_modes) {
  const DenseMatrix Lhs = DenseMatrix(p.Lhs);
  const DenseMatrix M = Lhs + DenseMatrix(p.Rhs);
  Eigen::LLT<DenseMatrix> llt(M);
  if (llt.info() != Eigen::Success)
    throw NumericalBreakdown("Lhs + Rhs is not positive definite", p.subdomain);
  const auto Lf = llt.matrixL();
  DenseMatrix C = Lf.solve(Lhs);
  C = Lf.solve(C.transpose()).transpose();
  C = 0.5 * (C + C.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<DenseMatrix> es(C);
  if (es.info() != Eigen::Success) throw NumericalBreakdown("dense eigensolver failed", p.subdomain);
  std::vector<double> vals;
  std::vector<Index> cols;
  for (Index j = 0; j < C.rows(); ++j) {
    const double nu = es.eigenvalues()[j];
    if (nu > 1.0 - kDropTol) break;
    vals.push_back(std::max(nu, 0.0) / (1.0 - nu));
    cols.push_back(j);
  }
  DenseMatrix X(C.rows(), static_cast<Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c) {
    const double nu = es.eigenvalues()[cols[c]];
    X.col(static_cast<Index>(c)) = llt.matrixU().solve(es.eigenvectors().col(cols[c])) / std::sqrt(1.0 - nu);
  }
  return select_modes(std::move(vals), X, tau, max_modes);
}

// Indefinite Lhs: split V~_i into range and kernel of Rhs and solve on the Schur complement
// of Lhs with respect to the kernel block. Simply dropping the kernel directions would
// ignore their coupling to the retained ones.
inline LocalEigen dense_indefinite(const LocalPencil& p, double tau, int max_modes) {
  const DenseMatrix Lhs = DenseMatrix(p.Lhs);
  const DenseMatrix Rhs = DenseMatrix(p.Rhs);
  Eigen::SelfAdjointEigenSolver<DenseMatrix> rs(Rhs);
  if (rs.info() != Eigen::Success) throw NumericalBreakdown("eigendecomposition of Rhs failed", p.subdomain);
  const double scale = std::max(rs.eigenvalues().cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
  std::vector<Index> keep, drop;
  for (Index j = 0; j < Rhs.rows(); ++j) (rs.eigenvalues()[j] > kDropTol * scale ? keep : drop).push_back(j);
  const Index r = static_cast<Index>(keep.size());
  DenseMatrix Qr(Rhs.rows(), r), Qk(Rhs.rows(), static_cast<Index>(drop.size()));
  Vector wr(r);
  for (Index a = 0; a < r; ++a) {
    Qr.col(a) = rs.eigenvectors().col(keep[static_cast<std::size_t>(a)]);
    wr[a] = 1.0 / std::sqrt(rs.eigenvalues()[keep[static_cast<std::size_t>(a)]]);
  }
  for (Index a = 0; a < Qk.cols(); ++a) Qk.col(a) = rs.eigenvectors().col(drop[static_cast<std::size_t>(a)]);

  DenseMatrix Srr = Qr.transpose() * Lhs * Qr;
  DenseMatrix lift;  // kernel component = -Lkk^{-1} Lkr y
  if (Qk.cols() > 0) {
    const DenseMatrix Lkk = Qk.transpose() * Lhs * Qk;
    const DenseMatrix Lkr = Qk.transpose() * Lhs * Qr;
    Eigen::FullPivLU<DenseMatrix> lu(Lkk);
    if (!lu.isInvertible()) throw NumericalBreakdown("kernel block of Lhs is singular", p.subdomain);
    lift = -lu.solve(Lkr);
    Srr += Lkr.transpose() * lift;
  }
  DenseMatrix C = wr.asDiagonal() * Srr * wr.asDiagonal();
  C = 0.5 * (C + C.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<DenseMatrix> es(C);
  if (es.info() != Eigen::Success) throw NumericalBreakdown("dense eigensolver failed", p.subdomain);
  const DenseMatrix Y = wr.asDiagonal() * es.eigenvectors();
  DenseMatrix X = Qr * Y;
  if (Qk.cols() > 0) X += Qk * (lift * Y);
  std::vector<double> vals(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
  return select_modes(std::move(vals), X, tau, max_modes);
}

// Shift-invert block Lanczos on Rhs x = theta (Lhs + sigma Rhs) x with full
// reorthogonalisation; theta = 1 / (lambda + sigma), so the wanted small lambda are the
// dominant theta. The kernel of Rhs is purged by applying the operator to the start block.
// With `give_up` set, returns nullopt once the basis passes a third of the local size:
// the threshold then reaches deep into the spectrum and the dense route is cheaper.
inline std::optional<LocalEigen> lanczos(const LocalPencil& p, double tau, const EigenOptions& opt,
                                         bool give_up = false) {
  const Index n = p.size();
  double sigma = 1.0;
  SparseColMatrix M;
  Eigen::SimplicialLLT<SparseColMatrix> llt;
  for (int attempt = 0;; ++attempt) {
    M = SparseColMatrix(p.Lhs + sigma * p.Rhs);
    llt.compute(M);
    if (llt.info() == Eigen::Success) break;
    if (p.variant != GeneoVariant::Hk || attempt > 40)
      throw NumericalBreakdown("shifted local pencil is not positive definite", p.subdomain);
    sigma *= 2.0;
  }
  const SparseColMatrix R(p.Rhs);
  auto op = [&](const DenseMatrix& X) -> DenseMatrix { return llt.solve(DenseMatrix(R * X)); };

  std::mt19937_64 rng(opt.seed + 7919u * static_cast<std::uint64_t>(p.subdomain));
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  const Index b = std::max<Index>(1, std::min<Index>(opt.block, n));
  auto random_block = [&]() {
    DenseMatrix X(n, b);
    for (Index c = 0; c < b; ++c)
      for (Index r = 0; r < n; ++r) X(r, c) = unif(rng);
    return op(X);
  };

  DenseMatrix Q(n, 0), MQ(n, 0), RQ(n, 0), G(0, 0);
  Index m = 0;
  auto reserve = [&](Index cols) {
    if (cols <= Q.cols()) return;
    const Index c = std::min(n, std::max(cols, 2 * Q.cols()));
    Q.conservativeResize(n, c);
    MQ.conservativeResize(n, c);
    RQ.conservativeResize(n, c);
  };

  const double theta_tau = std::isinf(tau) ? 0.0 : 1.0 / (tau + sigma);
  DenseMatrix X = random_block();
  int restarts = 0;
  Eigen::SelfAdjointEigenSolver<DenseMatrix> es;
  Index wanted = 0;
  bool done = false;

  while (!done) {
    const Index m_old = m;
    reserve(m + X.cols());
    for (Index c = 0; c < X.cols(); ++c) {
      Vector x = X.col(c);
      const double nrm0 = std::sqrt(std::max(0.0, x.dot(M * x)));
      if (!(nrm0 > 0.0)) continue;
      for (int pass = 0; pass < 2; ++pass)
        if (m > 0) x -= Q.leftCols(m) * (MQ.leftCols(m).transpose() * x);
      Vector Mx = M * x;
      const double nrm = std::sqrt(std::max(0.0, x.dot(Mx)));
      if (nrm <= 1e-8 * nrm0 || m >= n) continue;
      Q.col(m) = x / nrm;
      MQ.col(m) = Mx / nrm;
      RQ.col(m) = R * Q.col(m);
      ++m;
    }
    if (m == m_old) {
      if (m >= n || ++restarts > 5) break;  // invariant subspace: what we have is exact
      X = random_block();
      continue;
    }
    // Grow the projected matrix G = Q^T R Q by the new block.
    G.conservativeResize(m, m);
    const DenseMatrix cross = Q.leftCols(m).transpose() * RQ.middleCols(m_old, m - m_old);
    G.block(0, m_old, m, m - m_old) = cross;
    G.block(m_old, 0, m - m_old, m) = cross.transpose();
    es.compute(G);
    if (es.info() != Eigen::Success) throw NumericalBreakdown("projected eigensolver failed", p.subdomain);

    // Ritz values come out ascending in theta; walk from the top.
    Index count = 0;
    for (Index j = m - 1; j >= 0 && es.eigenvalues()[j] >= theta_tau * (1.0 - 1e-12); --j) ++count;
    if (opt.max_modes >= 0) count = std::min<Index>(count, opt.max_modes);
    wanted = std::min<Index>(count + 1, m);
    if (m == n) break;
    if (give_up && 3 * m > n) return std::nullopt;
    if (m >= wanted + b) {
      done = true;
      for (Index j = m - 1; j >= m - wanted; --j) {
        const Vector y = es.eigenvectors().col(j);
        const double th = es.eigenvalues()[j];
        const Vector ry = RQ.leftCols(m) * y;
        const Vector my = MQ.leftCols(m) * y;
        const double res = (ry - th * my).norm() / (ry.norm() + std::abs(th) * my.norm());
        if (!(res <= opt.residual_tol)) {
          done = false;
          break;
        }
      }
    }
    if (!done) X = op(Q.middleCols(m_old, m - m_old));
  }

  es.compute(G.topLeftCorner(m, m));
  std::vector<double> vals;
  DenseMatrix V(n, 0);
  std::vector<Index> order;
  for (Index j = m - 1; j >= 0; --j) {
    const double th = es.eigenvalues()[j];
    if (!(th > kDropTol * std::max(1.0, es.eigenvalues()[m - 1]))) break;
    order.push_back(j);
    vals.push_back(1.0 / th - sigma);
  }
  // Vectors only for the prefix that can be kept.
  std::size_t need = 0;
  while (need < vals.size() && vals[need] <= tau) ++need;
  if (opt.max_modes >= 0) need = std::min<std::size_t>(need, static_cast<std::size_t>(opt.max_modes));
  V.resize(n, static_cast<Index>(need));
  for (std::size_t c = 0; c < need; ++c) {
    const Index j = order[c];
    V.col(static_cast<Index>(c)) = Q.leftCols(m) * es.eigenvectors().col(j) / std::sqrt(es.eigenvalues()[j]);
  }
  // Only the leading Ritz values are accurate; keep the ones checked above.
  const std::size_t reliable = std::min<std::size_t>(vals.size(), static_cast<std::size_t>(std::max<Index>(wanted, static_cast<Index>(need) + 1)));
  if (m < n) vals.resize(reliable);
  return select_modes(std::move(vals), V, tau, opt.max_modes);
}

}  // namespace detail

/// Finite eigenpairs with lambda <= tau kept (tau may be +infinity).
inline LocalEigen solve_local_eigenproblem(const LocalPencil& p, double tau, const EigenOptions& opt = {}) {
  if (std::isnan(tau)) throw InvalidArgument("solve_local_eigenproblem: tau is NaN");
  bool dense = opt.method == EigenOptions::Method::dense ||
               (opt.method == EigenOptions::Method::automatic && (p.size() <= opt.dense_cutoff || std::isinf(tau)));
  if (p.size() == 0) return {};
  LocalEigen out;
  if (dense) {
    out = p.variant == GeneoVariant::Hk ? detail::dense_indefinite(p, tau, opt.max_modes)
                                        : detail::dense_psd(p, tau, opt.max_modes);
  } else if (auto l = detail::lanczos(p, tau, opt, opt.method == EigenOptions::Method::automatic)) {
    out = std::move(*l);
  } else {
    dense = true;
    out = p.variant == GeneoVariant::Hk ? detail::dense_indefinite(p, tau, opt.max_modes)
                                        : detail::dense_psd(p, tau, opt.max_modes);
  }
  out.dense = dense;
  return out;
}

struct CoarseSpace {
  GeneoVariant variant = GeneoVariant::DeltaK;
  double tau = 0.0;
  std::vector<LocalEigen> local;
  std::vector<int> col_offset;  ///< first column of subdomain i in Z
  SparseColMatrix Z;
  DenseMatrix B0;
  Eigen::PartialPivLU<DenseMatrix> lu;
  double tau_eff = std::numeric_limits<double>::infinity();
  double rcond = 1.0;

  int CS() const { return static_cast<int>(Z.cols()); }
  double CS_loc() const { return local.empty() ? 0.0 : static_cast<double>(CS()) / static_cast<double>(local.size()); }
  int kept(int i) const { return local[static_cast<std::size_t>(i)].kept; }
  bool empty() const { return Z.cols() == 0; }

  Vector solve(const Vector& r0) const { return lu.solve(r0); }
};

/// Theta = 1 / tau_eff; nullopt when every finite mode was kept everywhere.
inline std::optional<double> theta_of(const CoarseSpace& cs) {
  if (std::isinf(cs.tau_eff)) return std::nullopt;
  return 1.0 / cs.tau_eff;
}

/// Assemble Z from already computed local eigenpairs and factorise B0 = Z^T B Z.
inline CoarseSpace assemble_coarse_space(const FeSystem& sys, const DecompLayout& L, GeneoVariant variant,
                                         double tau, std::vector<LocalEigen> local) {
  CoarseSpace cs;
  cs.variant = variant;
  cs.tau = tau;
  cs.local = std::move(local);
  cs.col_offset.assign(static_cast<std::size_t>(L.N) + 1, 0);
  std::vector<Triplet> trips;
  int col = 0;
  for (int i = 0; i < L.N; ++i) {
    const auto& le = cs.local[static_cast<std::size_t>(i)];
    const auto& overl = L.overl_dofs[static_cast<std::size_t>(i)];
    const Vector& w = L.pou[static_cast<std::size_t>(i)];
    cs.col_offset[static_cast<std::size_t>(i)] = col;
    cs.tau_eff = std::min(cs.tau_eff, le.first_unused);
    for (int l = 0; l < le.kept; ++l, ++col) {
      for (std::size_t a = 0; a < overl.size(); ++a) {
        const double v = w[static_cast<Index>(a)] * le.vectors(static_cast<Index>(a), l);
        if (v != 0.0) trips.emplace_back(overl[a], col, v);
      }
    }
  }
  cs.col_offset[static_cast<std::size_t>(L.N)] = col;
  cs.Z.resize(sys.size(), col);
  cs.Z.setFromTriplets(trips.begin(), trips.end());
  cs.Z.makeCompressed();
  if (col > 0) {
    const SparseColMatrix BZ = SparseColMatrix(sys.B) * cs.Z;
    cs.B0 = DenseMatrix(SparseColMatrix(cs.Z.transpose()) * BZ);
    cs.lu.compute(cs.B0);
    cs.rcond = cs.lu.rcond();
    if (!(cs.rcond > 1e-14))
      throw CoarseSingular("coarse operator B0 is singular to working precision (k=" + std::to_string(sys.k) +
                           ", CS=" + std::to_string(col) + ")");
  }
  return cs;
}

inline CoarseSpace build_coarse_space(const FeSystem& sys, const DecompLayout& L, GeneoVariant variant, double tau,
                                      const EigenOptions& opt = {}) {
  std::vector<LocalEigen> local(static_cast<std::size_t>(L.N));
  for (int i = 0; i < L.N; ++i)
    local[static_cast<std::size_t>(i)] = solve_local_eigenproblem(build_local_pencil(sys, L, i, variant), tau, opt);
  return assemble_coarse_space(sys, L, variant, tau, std::move(local));
}

/// "i,variant,m_i,lambda_1,...,lambda_{m_i+1}" per subdomain.
inline void write_eigen_csv(std::ostream& os, const CoarseSpace& cs) {
  const auto old = os.precision(17);
  os << "i,variant,m_i,lambdas\n";
  for (std::size_t i = 0; i < cs.local.size(); ++i) {
    const auto& le = cs.local[i];
    os << i << ',' << to_string(cs.variant) << ',' << le.kept;
    const std::size_t shown = std::min(le.values.size(), static_cast<std::size_t>(le.kept) + 1);
    for (std::size_t l = 0; l < shown; ++l) os << ',' << le.values[l];
    os << '\n';
  }
  os.precision(old);
}

}  // namespace helmdd
