#pragma once

/** @file schwarz.hpp
    @brief One- and two-level additive Schwarz preconditioners for the Helmholtz matrix B.

      M^{-1} = sum_i E_i B_i^{-1} R_i  (+ Z B0^{-1} Z^T for two levels)

    with B_i = R_i B E_i the Dirichlet principal submatrix of B on V_i.
*/

#include "helmdd/assembly.hpp"
#include "helmdd/common.hpp"
#include "helmdd/decomp.hpp"
#include "helmdd/eigencoarse.hpp"

#include <Eigen/SparseLU>

#include <atomic>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace helmdd {

using LinearOperator = std::function<Vector(const Vector&)>;

class SchwarzPrec {
public:
  enum class Level { one, two };

  Level level() const { return coarse_ ? Level::two : Level::one; }
  const DecompLayout& layout() const { return *layout_; }
  const CoarseSpace* coarse() const { return coarse_.get(); }
  int size() const { return n_; }

  long local_solves() const { return local_solves_.load(); }
  long coarse_solves() const { return coarse_solves_.load(); }

  /// Local Dirichlet solve B_i^{-1} r_i on V_i.
  Vector local_solve(int i, const Vector& r_local) const {
    ++local_solves_;
    return lus_[static_cast<std::size_t>(i)]->solve(r_local);
  }

  Vector apply(const Vector& r) const {
    if (r.size() != n_) throw InvalidArgument("SchwarzPrec::apply: size mismatch");
    Vector out = Vector::Zero(n_);
    for (int i = 0; i < layout_->N; ++i) {
      const auto& idx = layout_->inner_dofs[static_cast<std::size_t>(i)];
      scatter_add(out, idx, local_solve(i, gather(r, idx)));
    }
    if (coarse_ && !coarse_->empty()) {
      ++coarse_solves_;
      const Vector r0 = coarse_->Z.transpose() * r;
      out += coarse_->Z * coarse_->solve(r0);
    }
    return out;
  }

  Vector operator()(const Vector& r) const { return apply(r); }

private:
  friend SchwarzPrec factorize(const FeSystem&, std::shared_ptr<const DecompLayout>,
                               std::shared_ptr<const CoarseSpace>);

  int n_ = 0;
  std::shared_ptr<const DecompLayout> layout_;
  std::shared_ptr<const CoarseSpace> coarse_;
  std::vector<std::shared_ptr<Eigen::SparseLU<SparseColMatrix>>> lus_;
  mutable std::atomic<long> local_solves_{0};
  mutable std::atomic<long> coarse_solves_{0};

public:
  SchwarzPrec() = default;
  SchwarzPrec(const SchwarzPrec& o)
      : n_(o.n_), layout_(o.layout_), coarse_(o.coarse_), lus_(o.lus_),
        local_solves_(o.local_solves_.load()), coarse_solves_(o.coarse_solves_.load()) {}
  SchwarzPrec& operator=(const SchwarzPrec& o) {
    n_ = o.n_;
    layout_ = o.layout_;
    coarse_ = o.coarse_;
    lus_ = o.lus_;
    local_solves_ = o.local_solves_.load();
    coarse_solves_ = o.coarse_solves_.load();
    return *this;
  }
};

/// Factorise every B_i; `coarse` null gives the one-level method.
inline SchwarzPrec factorize(const FeSystem& sys, std::shared_ptr<const DecompLayout> layout,
                             std::shared_ptr<const CoarseSpace> coarse = nullptr) {
  if (!layout) throw InvalidArgument("factorize: layout is required");
  SchwarzPrec p;
  p.n_ = sys.size();
  p.layout_ = std::move(layout);
  p.coarse_ = std::move(coarse);
  const auto& L = *p.layout_;
  p.lus_.resize(static_cast<std::size_t>(L.N));
  for (int i = 0; i < L.N; ++i) {
    const auto& idx = L.inner_dofs[static_cast<std::size_t>(i)];
    const double hk = L.Hi[static_cast<std::size_t>(i)] * sys.k;
    auto lu = std::make_shared<Eigen::SparseLU<SparseColMatrix>>();
    SparseColMatrix Bi(principal_submatrix(sys.B, idx));
    lu->analyzePattern(Bi);
    lu->factorize(Bi);
    if (lu->info() != Eigen::Success)
      throw LocalSingular("local matrix B_" + std::to_string(i) + " is singular (H_i k = " + std::to_string(hk) + ")",
                          i, hk);
    p.lus_[static_cast<std::size_t>(i)] = std::move(lu);
  }
  return p;
}

inline SchwarzPrec factorize(const FeSystem& sys, const DecompLayout& layout, const CoarseSpace* coarse = nullptr) {
  return factorize(sys, std::make_shared<const DecompLayout>(layout),
                   coarse ? std::make_shared<const CoarseSpace>(*coarse) : nullptr);
}

/// x -> M^{-1}(B x)
inline LinearOperator preconditioned_operator(const SchwarzPrec& prec, const FeSystem& sys) {
  return [&prec, &sys](const Vector& x) -> Vector { return prec.apply(sys.B * x); };
}

/// Dense matrix of a linear operator by probing unit vectors; test and diagnostics use only.
inline DenseMatrix assemble_dense(const LinearOperator& op, int n) {
  DenseMatrix out(n, n);
  Vector e = Vector::Zero(n);
  for (int j = 0; j < n; ++j) {
    e[j] = 1.0;
    out.col(j) = op(e);
    e[j] = 0.0;
  }
  return out;
}

}  // namespace helmdd
