#pragma once

/** @file krylov.hpp
    @brief Full GMRES in a weighted inner product <x, y>_W = y^T W x.
*/

#include "helmdd/common.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

namespace helmdd {

/// sqrt(x^T W x); throws WeightNotSpd when the quadratic form is clearly negative.
inline double wnorm(const SparseMatrix& W, const Vector& x) {
  const double q = x.dot(W * x);
  if (q < 0.0) {
    const double scale = x.squaredNorm() * std::max(1.0, W.coeffs().cwiseAbs().maxCoeff());
    if (q < -1e-12 * scale) throw WeightNotSpd("weight matrix is not positive definite");
    return 0.0;
  }
  return std::sqrt(q);
}

struct KrylovOptions {
  double tol = 1e-6;
  int maxit = 200;
  /// Optional replacement for the stopping quantity: called with the current iterate,
  /// returns a relative residual to compare with tol. Used for the Euclidean
  /// unpreconditioned criterion.
  std::function<double(const Vector&)> stop_residual;
};

struct KrylovReport {
  int iterations = 0;
  bool converged = false;
  std::vector<double> residual_history;  ///< relative W-norm residuals, [0] = 1
  Vector solution;
  double explicit_relres = 0.0;  ///< ||rhs - op x||_W / ||rhs||_W recomputed at exit
  double orthogonality_loss = 0.0;  ///< max |V^T W V - I|
  int reorthogonalizations = 0;
  double seconds = 0.0;

  double final_relres() const { return residual_history.empty() ? 0.0 : residual_history.back(); }
};

/// Residual history as "iter,relres".
inline void write_history_csv(std::ostream& os, const KrylovReport& rep) {
  const auto old = os.precision(17);
  os << "iter,relres\n";
  for (std::size_t m = 0; m < rep.residual_history.size(); ++m) os << m << ',' << rep.residual_history[m] << '\n';
  os.precision(old);
}

/// GMRES, zero initial guess, no restart, modified Gram-Schmidt in the W inner product with
/// a second pass when the new vector loses more than a factor 1/sqrt(2) of its norm.
template <class Op>
KrylovReport gmres_weighted(const Op& op, const Vector& rhs, const SparseMatrix& W, const KrylovOptions& opt = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  if (opt.maxit < 1) throw InvalidArgument("gmres_weighted: maxit must be >= 1");
  if (!(opt.tol > 0.0)) throw InvalidArgument("gmres_weighted: tol must be positive");
  const Index n = rhs.size();
  KrylovReport rep;
  rep.solution = Vector::Zero(n);
  const double beta = wnorm(W, rhs);
  if (beta == 0.0) {
    rep.converged = true;
    rep.residual_history = {0.0};
    return rep;
  }
  rep.residual_history.push_back(1.0);

  const int cap = static_cast<int>(std::min<Index>(opt.maxit, n));
  DenseMatrix V(n, cap + 1), WV(n, cap + 1);
  DenseMatrix H = DenseMatrix::Zero(cap + 1, cap);
  Vector cs = Vector::Zero(cap), sn = Vector::Zero(cap), g = Vector::Zero(cap + 1);
  V.col(0) = rhs / beta;
  WV.col(0) = W * V.col(0);
  g[0] = beta;

  auto solution_of = [&](int m) -> Vector {
    const Vector y = H.topLeftCorner(m, m).triangularView<Eigen::Upper>().solve(g.head(m));
    return V.leftCols(m) * y;
  };

  int m = 0;
  bool stop = false;
  while (!stop && m < cap) {
    Vector w = op(V.col(m));
    const double nrm0 = wnorm(W, w);
    for (int i = 0; i <= m; ++i) {
      const double h = w.dot(WV.col(i));
      H(i, m) = h;
      w -= h * V.col(i);
    }
    Vector Ww = W * w;
    double nrm = std::sqrt(std::max(0.0, w.dot(Ww)));
    if (nrm < nrm0 / std::sqrt(2.0)) {
      ++rep.reorthogonalizations;
      for (int i = 0; i <= m; ++i) {
        const double h = w.dot(WV.col(i));
        H(i, m) += h;
        w -= h * V.col(i);
      }
      Ww = W * w;
      nrm = std::sqrt(std::max(0.0, w.dot(Ww)));
    }
    H(m + 1, m) = nrm;
    const bool breakdown = nrm <= 1e-14 * std::max(nrm0, 1e-300);

    for (int i = 0; i < m; ++i) {
      const double a = H(i, m), b = H(i + 1, m);
      H(i, m) = cs[i] * a + sn[i] * b;
      H(i + 1, m) = -sn[i] * a + cs[i] * b;
    }
    const double a = H(m, m), b = H(m + 1, m);
    const double r = std::hypot(a, b);
    cs[m] = r == 0.0 ? 1.0 : a / r;
    sn[m] = r == 0.0 ? 0.0 : b / r;
    H(m, m) = r;
    H(m + 1, m) = 0.0;
    g[m + 1] = -sn[m] * g[m];
    g[m] = cs[m] * g[m];
    ++m;

    double rel = std::abs(g[m]) / beta;
    rep.residual_history.push_back(rel);
    if (opt.stop_residual) rel = opt.stop_residual(solution_of(m));
    if (breakdown) {
      if (r == 0.0 || std::abs(g[m]) / beta > std::max(opt.tol, 1e-10))
        throw KrylovBreakdown("GMRES breakdown with nonzero residual", m);
      stop = true;
    }
    if (rel <= opt.tol) stop = true;
    if (!stop && m < cap) {
      V.col(m) = w / nrm;
      WV.col(m) = Ww / nrm;
    }
  }

  rep.iterations = m;
  rep.solution = solution_of(m);
  const double last = opt.stop_residual ? opt.stop_residual(rep.solution) : rep.residual_history.back();
  rep.converged = last <= opt.tol && m <= opt.maxit;
  rep.explicit_relres = wnorm(W, rhs - op(rep.solution)) / beta;
  const Index cols = m;
  const DenseMatrix G = V.leftCols(cols).transpose() * WV.leftCols(cols);
  rep.orthogonality_loss = (G - DenseMatrix::Identity(cols, cols)).cwiseAbs().maxCoeff();
  rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

}  // namespace helmdd
