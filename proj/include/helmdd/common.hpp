#pragma once

// Shared vocabulary types and the error hierarchy used across helmdd.

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace helmdd {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using DenseMatrix = Eigen::MatrixXd;

/// Row-compressed sparse matrix with sorted, duplicate-free column indices.
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor, int>;
/// Column-compressed storage, used for coarse bases and direct factorizations.
using SparseColMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;
using Triplet = Eigen::Triplet<double, int>;

/// Sorted list of global (interior) dof indices.
using IndexSet = std::vector<int>;

// Error categories. The CLI maps InvalidArgument to exit code 2 and
// NumericalError (and subclasses) to exit code 3.

class InvalidArgument : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

class NumericalError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Factorization failure of a deflated local eigenpencil.
class NumericalBreakdown : public NumericalError {
public:
  NumericalBreakdown(const std::string& what, int subdomain)
      : NumericalError(what), subdomain_(subdomain) {}
  int subdomain() const noexcept { return subdomain_; }

private:
  int subdomain_;
};

/// Local Dirichlet matrix B_i could not be factorized.
class LocalSingular : public NumericalError {
public:
  LocalSingular(const std::string& what, int subdomain, double hk)
      : NumericalError(what), subdomain_(subdomain), hk_(hk) {}
  int subdomain() const noexcept { return subdomain_; }
  /// H_i * k of the offending subdomain.
  double hk() const noexcept { return hk_; }

private:
  int subdomain_;
  double hk_;
};

class CoarseSingular : public NumericalError {
public:
  using NumericalError::NumericalError;
};

/// Forcing or solve degenerated at a resonant wavenumber.
class ResonanceError : public NumericalError {
public:
  using NumericalError::NumericalError;
};

class WeightNotSpd : public NumericalError {
public:
  using NumericalError::NumericalError;
};

/// Arnoldi breakdown with a nonzero residual.
class KrylovBreakdown : public NumericalError {
public:
  KrylovBreakdown(const std::string& what, int iteration)
      : NumericalError(what), iteration_(iteration) {}
  int iteration() const noexcept { return iteration_; }

private:
  int iteration_;
};

/// Dense diagnostics requested on an instance above the dense cap.
class TooLarge : public InvalidArgument {
public:
  using InvalidArgument::InvalidArgument;
};

/// Gather v[idx[0]], v[idx[1]], ...
inline Vector gather(const Vector& v, std::span<const int> idx) {
  Vector out(static_cast<Index>(idx.size()));
  for (std::size_t a = 0; a < idx.size(); ++a) out[static_cast<Index>(a)] = v[idx[a]];
  return out;
}

/// out[idx[a]] += local[a]
inline void scatter_add(Vector& out, std::span<const int> idx, const Vector& local) {
  for (std::size_t a = 0; a < idx.size(); ++a) out[idx[a]] += local[static_cast<Index>(a)];
}

/// Principal submatrix M(idx, idx) of a sparse matrix; idx must be sorted.
inline SparseMatrix principal_submatrix(const SparseMatrix& m, std::span<const int> idx) {
  std::vector<int> local(static_cast<std::size_t>(m.rows()), -1);
  for (std::size_t a = 0; a < idx.size(); ++a) local[static_cast<std::size_t>(idx[a])] = static_cast<int>(a);
  std::vector<Triplet> trips;
  for (std::size_t a = 0; a < idx.size(); ++a) {
    for (SparseMatrix::InnerIterator it(m, idx[a]); it; ++it) {
      const int b = local[static_cast<std::size_t>(it.col())];
      if (b >= 0) trips.emplace_back(static_cast<int>(a), b, it.value());
    }
  }
  SparseMatrix out(static_cast<Index>(idx.size()), static_cast<Index>(idx.size()));
  out.setFromTriplets(trips.begin(), trips.end());
  out.makeCompressed();
  return out;
}

}  // namespace helmdd
