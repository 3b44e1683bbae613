#pragma once

/** @file theory.hpp
    @brief k-explicit convergence constants, field-of-values measurements and a numerical
    ledger of the lemma-level inequalities behind the two-level convergence theorem.

    All norms are the discrete k-weighted H1 norm ||u||^2 = u^T Dk u unless stated
    otherwise; local norms on Omega_i use the Neumann-style local matrices.
*/

#include "helmdd/assembly.hpp"
#include "helmdd/common.hpp"
#include "helmdd/decomp.hpp"
#include "helmdd/eigencoarse.hpp"
#include "helmdd/krylov.hpp"
#include "helmdd/schwarz.hpp"

#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

namespace helmdd {

struct TheoryConstants {
  double C_stab = 0.0;
  int Lambda = 1;
  double Theta = 0.0;
  double H = 0.0;
  double k = 0.0;

  double C_sd = 0.0;  ///< 2 + 3 Lambda^2 Theta
  double s = 0.0;
  double t = 0.0;
  double c1 = 0.0;
  double c2 = 0.0;
  double tau_required = 0.0;  ///< 16 Lambda^2 (1 + C_stab)^2 k^2

  bool s_lt_1 = false;
  bool t_lt_1 = false;
  bool ti_condition = false;    ///< sqrt(2) k Lambda Theta^{1/2} (1 + C_stab) < 1
  bool t0_condition = false;    ///< 2 k Lambda Theta^{1/2} (1 + C_stab) <= 1/2
  bool tau_condition = false;   ///< 1/Theta >= tau_required

  bool all_conditions() const { return s_lt_1 && t_lt_1 && ti_condition && t0_condition && tau_condition; }
  /// Proof form of the GMRES rate, 1 - c1^2 / c2 (meaningful when c1 > 0).
  double rate_proof() const { return 1.0 - c1 * c1 / c2; }
  /// Rate as printed in the theorem statement, 1 - c1^2 / c2^2.
  double rate_stated() const { return 1.0 - c1 * c1 / (c2 * c2); }
};

inline TheoryConstants theory_constants(double C_stab, int Lambda, double Theta, double H, double k) {
  if (!(C_stab >= 0.0) || Lambda < 1 || !(Theta >= 0.0) || !(H > 0.0) || !(k >= 0.0))
    throw InvalidArgument("theory_constants: inputs must be non-negative (Lambda >= 1, H > 0)");
  TheoryConstants c;
  c.C_stab = C_stab;
  c.Lambda = Lambda;
  c.Theta = Theta;
  c.H = H;
  c.k = k;
  const double L = Lambda;
  const double sq = std::sqrt(Theta);
  c.C_sd = 2.0 + 3.0 * L * L * Theta;
  c.s = 8.0 * L * c.C_sd * (1.0 + C_stab) * k * sq;
  c.t = 6.0 * std::numbers::sqrt2 * L * c.C_sd * H * k;
  c.c1 = (1.0 - std::max(c.s, c.t)) / c.C_sd;
  c.c2 = 18.0 + 8.0 * L * L;
  c.tau_required = 16.0 * L * L * (1.0 + C_stab) * (1.0 + C_stab) * k * k;
  c.s_lt_1 = c.s < 1.0;
  c.t_lt_1 = c.t < 1.0;
  const double q = k * L * sq * (1.0 + C_stab);
  c.ti_condition = std::numbers::sqrt2 * q < 1.0;
  c.t0_condition = 2.0 * q <= 0.5;
  c.tau_condition = Theta == 0.0 || 1.0 / Theta >= c.tau_required;
  return c;
}

struct CStabEstimate {
  double value = 0.0;
  double min_singular = std::numeric_limits<double>::quiet_NaN();  ///< of B in the Dk geometry
  bool resonance = false;
  bool dense = false;
};

/// Discrete stability constant at resolution h: the norm of f -> u = B^{-1} f from L2 into
/// the k-weighted H1 norm, i.e. the largest sigma with Dk x = sigma^2 B S^{-1} B x.
inline CStabEstimate estimate_cstab(const FeSystem& sys, int dense_cap = 1500) {
  const int n = sys.size();
  CStabEstimate est;
  if (n <= dense_cap) {
    est.dense = true;
    const DenseMatrix Dk(sys.Dk), S(sys.S), B(sys.B);
    Eigen::LLT<DenseMatrix> ld(Dk), ls(S);
    Eigen::FullPivLU<DenseMatrix> lb(B);
    // Dk^{-1/2}-normalised B: singular values give the distance to resonance.
    DenseMatrix Bn = ld.matrixL().solve(B);
    Bn = ld.matrixL().solve(Bn.transpose()).transpose();
    Eigen::SelfAdjointEigenSolver<DenseMatrix> eb(0.5 * (Bn + Bn.transpose()), Eigen::EigenvaluesOnly);
    est.min_singular = eb.eigenvalues().cwiseAbs().minCoeff();
    if (!lb.isInvertible() || est.min_singular == 0.0) {
      est.value = std::numeric_limits<double>::infinity();
      est.resonance = true;
      return est;
    }
    const DenseMatrix LS = ls.matrixL();
    const DenseMatrix C = DenseMatrix(ld.matrixL().transpose()) * lb.solve(LS);
    Eigen::BDCSVD<DenseMatrix> svd(C);
    est.value = svd.singularValues()[0];
  } else {
    Eigen::SparseLU<SparseColMatrix> lb;
    const SparseColMatrix B(sys.B);
    lb.analyzePattern(B);
    lb.factorize(B);
    if (lb.info() != Eigen::Success) {
      est.value = std::numeric_limits<double>::infinity();
      est.resonance = true;
      return est;
    }
    // Power iteration on K = B^{-1} Dk B^{-1} S, self-adjoint in the S inner product.
    std::mt19937_64 rng(12345);
    std::normal_distribution<double> nd;
    Vector g(n);
    for (int a = 0; a < n; ++a) g[a] = nd(rng);
    double sigma2 = 0.0;
    for (int it = 0; it < 500; ++it) {
      const Vector Sg = sys.S * g;
      g /= std::sqrt(g.dot(Sg));
      const Vector Kg = lb.solve(Vector(sys.Dk * lb.solve(Vector(sys.S * g))));
      const double next = Kg.dot(sys.S * g);
      g = Kg;
      if (std::abs(next - sigma2) <= 1e-10 * next) {
        sigma2 = next;
        break;
      }
      sigma2 = next;
    }
    est.value = std::sqrt(sigma2);
  }
  est.resonance = !(est.value < 1e6);
  return est;
}

struct FovBounds {
  double delta = 0.0;  ///< min_u <M^{-1}B u, u>_Dk / ||u||^2_Dk
  double beta = 0.0;   ///< ||M^{-1}B||_Dk
};

/// Dense field-of-values lower bound and operator norm of `op` in the Dk geometry.
inline FovBounds fov_bounds(const LinearOperator& op, const FeSystem& sys, int dense_cap = 4000) {
  const int n = sys.size();
  if (n > dense_cap)
    throw TooLarge("fov_bounds: " + std::to_string(n) + " dofs exceeds the dense cap of " + std::to_string(dense_cap));
  const DenseMatrix P = assemble_dense(op, n);
  Eigen::LLT<DenseMatrix> ld{DenseMatrix(sys.Dk)};
  if (ld.info() != Eigen::Success) throw WeightNotSpd("fov_bounds: Dk is not positive definite");
  // C = L^T P L^{-T} is P seen in Dk-orthonormal coordinates.
  DenseMatrix C = DenseMatrix(ld.matrixU()) * P;
  C = ld.matrixU().transpose().solve(C.transpose()).transpose();
  FovBounds fb;
  Eigen::SelfAdjointEigenSolver<DenseMatrix> es(0.5 * (C + C.transpose()), Eigen::EigenvaluesOnly);
  fb.delta = es.eigenvalues()[0];
  Eigen::BDCSVD<DenseMatrix> svd(C);
  fb.beta = svd.singularValues()[0];
  return fb;
}

inline FovBounds fov_bounds(const SchwarzPrec& prec, const FeSystem& sys, int dense_cap = 4000) {
  return fov_bounds(preconditioned_operator(prec, sys), sys, dense_cap);
}

/// Worst ratio over m of ||r_m||^2 / (rate^m ||r_0||^2 + slack). Negative rates are clamped to 0.
inline double contraction_ratio(const std::vector<double>& history, double rate, double slack = 1e-9) {
  double worst = 0.0;
  const double r0 = history.empty() ? 1.0 : history.front();
  for (std::size_t m = 0; m < history.size(); ++m) {
    const double bound = std::pow(std::max(rate, 0.0), static_cast<double>(m)) * r0 * r0 + slack;
    worst = std::max(worst, history[m] * history[m] / bound);
  }
  return worst;
}

inline double elman_rate(const FovBounds& fb) { return 1.0 - fb.delta * fb.delta / (fb.beta * fb.beta); }

/// T u = sum_i E_i T_i u + T_0 u assembled from the Galerkin conditions
///   b_{Omega_i}(T_i u, v) = b(u, E_i v)  (v in V_i),   b(T_0 u, v_0) = b(u, v_0)  (v_0 in V_0)
/// with element-level local forms and dense solves, independently of SchwarzPrec.
class GalerkinT {
public:
  GalerkinT(const FeSystem& sys, const DecompLayout& L, const CoarseSpace* coarse) : sys_(&sys), L_(&L) {
    for (int i = 0; i < L.N; ++i) {
      const auto loc = local_neumann_matrices(sys, L, i);
      const double k2 = sys.k * sys.k;
      const DenseMatrix b_loc = DenseMatrix(loc.A) - k2 * DenseMatrix(loc.S);
      const auto& pos = L.inner_in_overl[static_cast<std::size_t>(i)];
      DenseMatrix Bi(static_cast<Index>(pos.size()), static_cast<Index>(pos.size()));
      for (std::size_t a = 0; a < pos.size(); ++a)
        for (std::size_t b = 0; b < pos.size(); ++b) Bi(static_cast<Index>(a), static_cast<Index>(b)) = b_loc(pos[a], pos[b]);
      lus_.emplace_back(Bi);
    }
    if (coarse && !coarse->empty()) {
      Z_ = DenseMatrix(coarse->Z);
      const DenseMatrix BZ = DenseMatrix(sys.B) * Z_;
      coarse_lu_.emplace(Z_.transpose() * BZ);
    }
  }

  Vector Ti(int i, const Vector& u) const {
    const Vector Bu = sys_->B * u;
    return lus_[static_cast<std::size_t>(i)].solve(restrict_inner(*L_, i, Bu));
  }

  Vector T0(const Vector& u) const {
    if (!coarse_lu_) return Vector::Zero(u.size());
    return Z_ * coarse_lu_->solve(Z_.transpose() * (sys_->B * u));
  }

  Vector operator()(const Vector& u) const {
    Vector out = Vector::Zero(u.size());
    for (int i = 0; i < L_->N; ++i) scatter_add(out, L_->inner_dofs[static_cast<std::size_t>(i)], Ti(i, u));
    return out + T0(u);
  }

private:
  const FeSystem* sys_;
  const DecompLayout* L_;
  std::vector<Eigen::PartialPivLU<DenseMatrix>> lus_;
  DenseMatrix Z_;
  std::optional<Eigen::PartialPivLU<DenseMatrix>> coarse_lu_;
};

struct LedgerRow {
  std::string check;
  int samples = 0;
  double worst_ratio = 0.0;
  double threshold = 1.0;
  bool applicable = true;
  std::string note;

  bool pass() const { return !applicable || worst_ratio <= threshold; }
};

using Ledger = std::vector<LedgerRow>;

inline void write_ledger_csv(std::ostream& os, const Ledger& ledger) {
  const auto old = os.precision(17);
  os << "check_name,samples,worst_ratio,threshold,pass\n";
  for (const auto& r : ledger) {
    os << r.check << ',' << r.samples << ',';
    if (r.applicable)
      os << r.worst_ratio;
    else
      os << "skipped";
    os << ',' << r.threshold << ',' << (r.pass() ? "true" : "false") << '\n';
  }
  os.precision(old);
}

struct LemmaOptions {
  int samples = 50;
  std::uint64_t seed = 42;
  double slack = 1e-9;            ///< relative slack on inequalities
  double identity_tol = 1e-10;    ///< tolerance on algebraic identities
  std::optional<double> C_stab;   ///< enables the T_0 stability row
};

namespace detail {

inline Vector random_vector(std::mt19937_64& rng, Index n) {
  std::normal_distribution<double> nd;
  Vector v(n);
  for (Index a = 0; a < n; ++a) v[a] = nd(rng);
  return v;
}

inline double qform(const SparseMatrix& M, const Vector& v) { return v.dot(M * v); }

/// lhs / rhs, with lhs treated as zero when it is at round-off level of `scale`.
inline double safe_ratio(double lhs, double rhs, double scale) {
  if (std::abs(lhs) <= 1e-13 * std::abs(scale)) return 0.0;
  if (rhs <= 0.0) return std::numeric_limits<double>::infinity();
  return lhs / rhs;
}

struct Tracker {
  LedgerRow row;
  Tracker(std::string name, double threshold) {
    row.check = std::move(name);
    row.threshold = threshold;
  }
  void add(double r) {
    ++row.samples;
    if (std::isnan(r)) r = std::numeric_limits<double>::infinity();
    row.worst_ratio = std::max(row.worst_ratio, r);
  }
};

}  // namespace detail

/// Lemma ledger for a DeltaK coarse space. Inequalities are reported as lhs / rhs against
/// 1 + slack; identities as a relative residual against identity_tol.
inline Ledger verify_lemmas(const FeSystem& sys, const DecompLayout& L, const CoarseSpace& coarse,
                            const LemmaOptions& opt = {}) {
  using detail::qform;
  using detail::safe_ratio;
  const double ineq = 1.0 + opt.slack;
  const int n = sys.size();
  const int N = L.N;
  const double k2 = sys.k * sys.k;
  const double Lam = L.Lambda;
  const double Theta = theta_of(coarse).value_or(0.0);
  const double C_sd = 2.0 + 3.0 * Lam * Lam * Theta;
  std::mt19937_64 rng(opt.seed);
  Ledger ledger;

  std::vector<LocalMatrices> loc(static_cast<std::size_t>(N));
  std::vector<SparseMatrix> Dk_loc(static_cast<std::size_t>(N)), Dk_in(static_cast<std::size_t>(N));
  for (int i = 0; i < N; ++i) {
    loc[static_cast<std::size_t>(i)] = local_neumann_matrices(sys, L, i);
    Dk_loc[static_cast<std::size_t>(i)] = loc[static_cast<std::size_t>(i)].A + k2 * loc[static_cast<std::size_t>(i)].S;
    Dk_in[static_cast<std::size_t>(i)] = principal_submatrix(sys.Dk, L.inner_dofs[static_cast<std::size_t>(i)]);
  }

  // Pi_i v = sum_l p_l (p_l^T Rhs v), the Rhs-orthogonal projector onto the kept modes.
  auto project = [&](int i, const Vector& v) -> Vector {
    const auto& le = coarse.local[static_cast<std::size_t>(i)];
    if (le.kept == 0) return Vector::Zero(v.size());
    const Vector& d = L.pou[static_cast<std::size_t>(i)];
    const Vector Rv = d.asDiagonal() * (Dk_loc[static_cast<std::size_t>(i)] * (d.asDiagonal() * v));
    return le.vectors * (le.vectors.transpose() * Rv);
  };
  auto xi = [&](int i, const Vector& v) { return Vector(L.pou[static_cast<std::size_t>(i)].asDiagonal() * v); };

  {  // Xi-orthonormality of the kept modes
    detail::Tracker tr("xi_orthonormality", opt.identity_tol);
    for (int i = 0; i < N; ++i) {
      const auto& le = coarse.local[static_cast<std::size_t>(i)];
      if (le.kept == 0) continue;
      const Vector& d = L.pou[static_cast<std::size_t>(i)];
      const DenseMatrix XV = d.asDiagonal() * le.vectors;
      const DenseMatrix G = XV.transpose() * (Dk_loc[static_cast<std::size_t>(i)] * XV);
      tr.add((G - DenseMatrix::Identity(G.rows(), G.cols())).cwiseAbs().maxCoeff());
    }
    ledger.push_back(tr.row);
  }

  {  // stability of the local projection
    detail::Tracker stab("local_projection_stability", ineq), tail("local_projection_tail", ineq);
    for (int i = 0; i < N; ++i) {
      const auto& le = coarse.local[static_cast<std::size_t>(i)];
      const auto& A = loc[static_cast<std::size_t>(i)].A;
      const auto& D = Dk_loc[static_cast<std::size_t>(i)];
      for (int sidx = 0; sidx < opt.samples; ++sidx) {
        const Vector v = detail::random_vector(rng, A.rows());
        const Vector w = v - project(i, v);
        const double vn = qform(D, v), wa = qform(A, w);
        stab.add(safe_ratio(wa, vn, vn));
        const Vector xw = xi(i, w);
        const double lhs = qform(D, xw);
        const double rhs = std::isinf(le.first_unused) ? 0.0 : wa / le.first_unused;
        tail.add(safe_ratio(lhs, rhs, vn));
      }
    }
    ledger.push_back(stab.row);
    ledger.push_back(tail.row);
  }

  // z_0 and z_i of the stable decomposition.
  auto decompose = [&](const Vector& v, Vector& z0, std::vector<Vector>& zi) {
    z0 = Vector::Zero(n);
    zi.assign(static_cast<std::size_t>(N), Vector());
    for (int i = 0; i < N; ++i) {
      const Vector vi = restrict_overl(L, i, v);
      const Vector pv = project(i, vi);
      const Vector xpv = xi(i, pv);
      const Vector w = vi - pv;
      const auto& ov = L.overl_dofs[static_cast<std::size_t>(i)];
      for (std::size_t a = 0; a < ov.size(); ++a) z0[ov[a]] += xpv[static_cast<Index>(a)];
      zi[static_cast<std::size_t>(i)] = apply_pou(L, i, w);
    }
  };

  {  // global approximation and the stable splitting
    detail::Tracker approx("global_approximation", ineq), recon("stable_decomposition_identity", opt.identity_tol),
        sd("stable_decomposition_bound", ineq);
    for (int sidx = 0; sidx < opt.samples; ++sidx) {
      const Vector v = detail::random_vector(rng, n);
      const double vn = qform(sys.Dk, v);
      Vector z0;
      std::vector<Vector> zi;
      decompose(v, z0, zi);
      approx.add(safe_ratio(qform(sys.Dk, v - z0), Lam * Lam * Theta * vn, vn));
      Vector sum = z0;
      double energy = qform(sys.Dk, z0);
      for (int i = 0; i < N; ++i) {
        scatter_add(sum, L.inner_dofs[static_cast<std::size_t>(i)], zi[static_cast<std::size_t>(i)]);
        energy += qform(Dk_in[static_cast<std::size_t>(i)], zi[static_cast<std::size_t>(i)]);
      }
      recon.add(std::sqrt(qform(sys.Dk, v - sum) / vn));
      sd.add(energy / (C_sd * vn));
    }
    ledger.push_back(approx.row);
    ledger.push_back(recon.row);
    ledger.push_back(sd.row);
  }

  // Projectors: P_i u solves Dk_ii P_i u = R_i Dk u; P_0 is the Dk-orthogonal projection on span Z.
  std::vector<Eigen::SimplicialLLT<SparseColMatrix>> dk_in_llt(static_cast<std::size_t>(N));
  for (int i = 0; i < N; ++i) dk_in_llt[static_cast<std::size_t>(i)].compute(SparseColMatrix(Dk_in[static_cast<std::size_t>(i)]));
  std::optional<Eigen::LLT<DenseMatrix>> g0;
  DenseMatrix Zd;
  if (!coarse.empty()) {
    Zd = DenseMatrix(coarse.Z);
    g0.emplace(Zd.transpose() * (sys.Dk * Zd));
  }
  auto P0 = [&](const Vector& u) -> Vector {
    if (!g0) return Vector::Zero(n);
    return Zd * g0->solve(Zd.transpose() * (sys.Dk * u));
  };

  {  // additive projection: energy identity and its bounds
    detail::Tracker ident("energy_identity", opt.identity_tol), lower("projection_lower_bound", ineq),
        upper("projection_local_sum", ineq);
    for (int sidx = 0; sidx < opt.samples; ++sidx) {
      const Vector u = detail::random_vector(rng, n);
      const Vector Dku = sys.Dk * u;
      const Vector p0 = P0(u);
      Vector Pu = p0;
      double parts = qform(sys.Dk, p0);
      for (int i = 0; i < N; ++i) {
        const Vector pi = dk_in_llt[static_cast<std::size_t>(i)].solve(restrict_inner(L, i, Dku));
        scatter_add(Pu, L.inner_dofs[static_cast<std::size_t>(i)], pi);
        parts += qform(Dk_in[static_cast<std::size_t>(i)], pi);
      }
      const double Puu = u.dot(sys.Dk * Pu);
      const double un = u.dot(Dku);
      ident.add(std::abs(Puu - parts) / std::abs(Puu));
      lower.add(un / (C_sd * Puu));
      upper.add(parts / ((Lam + 1.0) * un));
    }
    ledger.push_back(ident.row);
    ledger.push_back(lower.row);
    ledger.push_back(upper.row);
  }

  {  // overlap stability relations
    detail::Tracker ext("overlap_stability_extension", ineq), res("overlap_stability_restriction", ineq);
    for (int sidx = 0; sidx < opt.samples; ++sidx) {
      Vector sum = Vector::Zero(n);
      double parts = 0.0;
      for (int i = 0; i < N; ++i) {
        const Vector q = detail::random_vector(rng, static_cast<Index>(L.inner_dofs[static_cast<std::size_t>(i)].size()));
        scatter_add(sum, L.inner_dofs[static_cast<std::size_t>(i)], q);
        parts += qform(Dk_in[static_cast<std::size_t>(i)], q);
      }
      ext.add(qform(sys.Dk, sum) / (Lam * parts));
      const Vector v = detail::random_vector(rng, n);
      double loc_sum = 0.0;
      for (int i = 0; i < N; ++i) loc_sum += qform(Dk_loc[static_cast<std::size_t>(i)], restrict_overl(L, i, v));
      res.add(loc_sum / (Lam * qform(sys.Dk, v)));
    }
    ledger.push_back(ext.row);
    ledger.push_back(res.row);
  }

  {  // Friedrichs inequalities
    detail::Tracker sub("friedrichs_subdomain", ineq), dom("friedrichs_domain", ineq);
    for (int i = 0; i < N; ++i) {
      const auto& idx = L.inner_dofs[static_cast<std::size_t>(i)];
      const SparseMatrix Ai = principal_submatrix(sys.A, idx), Si = principal_submatrix(sys.S, idx);
      const double side = std::min(L.box_width[static_cast<std::size_t>(i)], L.box_height[static_cast<std::size_t>(i)]);
      for (int sidx = 0; sidx < opt.samples; ++sidx) {
        const Vector u = detail::random_vector(rng, static_cast<Index>(idx.size()));
        sub.add(qform(Si, u) / (0.5 * side * side * qform(Ai, u)));
      }
    }
    for (int sidx = 0; sidx < opt.samples; ++sidx) {
      const Vector u = detail::random_vector(rng, n);
      dom.add(qform(sys.S, u) / qform(sys.A, u));
    }
    ledger.push_back(sub.row);
    dom.row.note = "checked as u^T A u >= u^T S u; the unit square has diameter sqrt(2) > 1";
    ledger.push_back(dom.row);
  }

  {  // boundedness of b
    detail::Tracker bd("boundedness_b", ineq);
    for (int sidx = 0; sidx < 2 * opt.samples; ++sidx) {
      const Vector u = detail::random_vector(rng, n), v = detail::random_vector(rng, n);
      bd.add(std::abs(u.dot(sys.B * v)) / std::sqrt(qform(sys.Dk, u) * qform(sys.Dk, v)));
    }
    ledger.push_back(bd.row);
  }

  const SchwarzPrec prec = factorize(sys, L, coarse.empty() ? nullptr : &coarse);
  const GalerkinT T(sys, L, coarse.empty() ? nullptr : &coarse);
  {  // M^{-1} B equals the Galerkin operator T
    detail::Tracker id("galerkin_identity", opt.identity_tol);
    for (int sidx = 0; sidx < 20; ++sidx) {
      const Vector u = detail::random_vector(rng, n), v = detail::random_vector(rng, n);
      const Vector Mu = prec.apply(sys.B * u);
      const Vector Tu = T(u);
      const double lhs = v.dot(sys.Dk * Mu), rhs = v.dot(sys.Dk * Tu);
      id.add(std::abs(lhs - rhs) / std::sqrt(qform(sys.Dk, Mu) * qform(sys.Dk, v)));
    }
    ledger.push_back(id.row);
  }

  {  // T_i stability, H k <= 1/sqrt(2)
    detail::Tracker ti("Ti_stability", ineq);
    if (L.H * sys.k <= 1.0 / std::numbers::sqrt2) {
      for (int sidx = 0; sidx < opt.samples; ++sidx) {
        const Vector u = detail::random_vector(rng, n);
        for (int i = 0; i < N; ++i) {
          const Vector t = T.Ti(i, u);
          ti.add(std::sqrt(qform(Dk_in[static_cast<std::size_t>(i)], t) /
                           (4.0 * qform(Dk_loc[static_cast<std::size_t>(i)], restrict_overl(L, i, u)))));
        }
      }
    } else {
      ti.row.applicable = false;
      ti.row.note = "H k > 1/sqrt(2)";
    }
    ledger.push_back(ti.row);
  }

  {  // T_0 stability, 2 k Lambda Theta^{1/2} (1 + C_stab) <= 1/2
    detail::Tracker t0("T0_stability", ineq);
    const bool cond = opt.C_stab && 2.0 * sys.k * Lam * std::sqrt(Theta) * (1.0 + *opt.C_stab) <= 0.5;
    if (cond && !coarse.empty()) {
      for (int sidx = 0; sidx < opt.samples; ++sidx) {
        const Vector u = detail::random_vector(rng, n);
        t0.add(std::sqrt(qform(sys.Dk, Vector(T.T0(u) - u)) / (4.0 * qform(sys.Dk, u))));
      }
    } else {
      t0.row.applicable = false;
      t0.row.note = opt.C_stab ? "coarse condition not met" : "C_stab not supplied";
    }
    ledger.push_back(t0.row);
  }
  return ledger;
}

struct TheoryReport {
  TheoryConstants constants;
  double Theta_tau = 0.0;  ///< 1 / tau from the requested threshold
  double Theta_eff = 0.0;  ///< 1 / min first-unused eigenvalue
  CStabEstimate cstab;
  std::optional<FovBounds> fov;
  std::string fov_note;
  std::optional<KrylovReport> krylov;

  /// Worst ratio of the GMRES history against the proof rate (1 - c1^2/c2)^m.
  double proof_bound_ratio() const {
    return krylov ? contraction_ratio(krylov->residual_history, constants.rate_proof()) : 0.0;
  }
  double elman_bound_ratio() const {
    return (krylov && fov && fov->delta > 0.0) ? contraction_ratio(krylov->residual_history, elman_rate(*fov)) : 0.0;
  }
};

inline const char* kTheorySchema = "helmdd-theory-v1";

inline void write_theory_header(std::ostream& os) {
  os << "# schema=" << kTheorySchema << "; C_stab is the discrete constant at resolution h\n";
  os << "k,N,Lambda,H,tau,Theta_tau,Theta_eff,C_stab,resonance,s,t,c1,c2,cond_s,cond_t,cond_Ti,cond_T0,cond_tau,"
        "delta,beta,iterations,proof_bound_ratio,elman_bound_ratio\n";
}

inline void write_theory_row(std::ostream& os, const TheoryReport& r, int N, double tau) {
  const auto old = os.precision(12);
  const auto& c = r.constants;
  auto b = [](bool x) { return x ? "true" : "false"; };
  os << c.k << ',' << N << ',' << c.Lambda << ',' << c.H << ',' << tau << ',' << r.Theta_tau << ',' << r.Theta_eff
     << ',' << r.cstab.value << ',' << b(r.cstab.resonance) << ',' << c.s << ',' << c.t << ',' << c.c1 << ',' << c.c2
     << ',' << b(c.s_lt_1) << ',' << b(c.t_lt_1) << ',' << b(c.ti_condition) << ',' << b(c.t0_condition) << ','
     << b(c.tau_condition) << ',';
  if (r.fov)
    os << r.fov->delta << ',' << r.fov->beta;
  else
    os << ',';
  os << ',' << (r.krylov ? std::to_string(r.krylov->iterations) : std::string()) << ',' << r.proof_bound_ratio() << ','
     << r.elman_bound_ratio() << '\n';
  os.precision(old);
}

}  // namespace helmdd
