#pragma once

/** @file bench.hpp
    @brief Experiment driver: one run = mesh -> assembly -> decomposition -> coarse space ->
    Schwarz preconditioner -> weighted GMRES, plus grids of runs and the CSV tables.
*/

#include "helmdd/assembly.hpp"
#include "helmdd/common.hpp"
#include "helmdd/decomp.hpp"
#include "helmdd/eigencoarse.hpp"
#include "helmdd/krylov.hpp"
#include "helmdd/mesh.hpp"
#include "helmdd/schwarz.hpp"
#include "helmdd/theory.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <numbers>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

namespace helmdd {

enum class Method { one_level, delta, delta_k, hk };

inline std::string_view to_string(Method m) {
  switch (m) {
    case Method::one_level: return "one_level";
    case Method::delta: return "delta";
    case Method::delta_k: return "delta_k";
    case Method::hk: return "hk";
  }
  return "?";
}

inline Method parse_method(std::string_view s) {
  if (s == "one_level" || s == "one") return Method::one_level;
  if (s == "delta") return Method::delta;
  if (s == "delta_k" || s == "deltak") return Method::delta_k;
  if (s == "hk") return Method::hk;
  throw InvalidArgument("unknown method '" + std::string(s) + "' (one_level, delta, delta_k, hk)");
}

inline GeneoVariant variant_of(Method m) {
  switch (m) {
    case Method::delta: return GeneoVariant::Delta;
    case Method::hk: return GeneoVariant::Hk;
    default: return GeneoVariant::DeltaK;
  }
}

struct RunConfig {
  double k = 20.0;
  double kh_target = 0.1;
  int n_cells = 0;  ///< 0: derive from k and kh_target
  int N = 16;
  int overlap_layers = 1;
  CoefficientField medium = CoefficientField::homogeneous();
  Method method = Method::delta_k;
  double tau = 0.5;
  double tol = 1e-6;
  int maxit = 200;
  std::uint64_t seed = 1;
  int max_modes = -1;
  bool euclidean_residual = false;
  bool allow_large = false;
  double memory_cap_gb = 8.0;

  int resolved_n_cells() const { return n_cells > 0 ? n_cells : mesh_for_wavenumber(k, kh_target); }
};

/// Rough peak memory of one run in bytes: matrices, local factorizations, dense
/// eigen-work and the GMRES basis.
inline double estimate_memory_bytes(const RunConfig& c) {
  const double n_cells = c.resolved_n_cells();
  const double n = (n_cells - 1) * (n_cells - 1);
  const double side = n_cells / std::sqrt(static_cast<double>(c.N)) + 2.0 * c.overlap_layers + 1.0;
  const double n_loc = side * side;
  const double sparse = 4.0 * 7.0 * n * 12.0;
  const double factors = 40.0 * n_loc * std::log2(std::max(2.0, n_loc)) * 12.0 * c.N / 4.0;
  const double krylov = 2.0 * (c.maxit + 1) * n * 8.0;
  const double eig = c.method == Method::one_level ? 0.0 : 3.0 * n_loc * 600.0 * 8.0;
  return sparse + factors + krylov + eig;
}

inline void validate(const RunConfig& c) {
  if (!(c.k > 0.0)) throw InvalidArgument("k must be positive");
  if (!(c.kh_target > 0.0 && c.kh_target <= 1.0)) throw InvalidArgument("kh_target must lie in (0, 1]");
  if (c.N < 1) throw InvalidArgument("N must be positive");
  const int p = static_cast<int>(std::lround(std::sqrt(static_cast<double>(c.N))));
  if (p * p != c.N) throw InvalidArgument("N must be a perfect square");
  if (c.overlap_layers < 1) throw InvalidArgument("overlap_layers must be >= 1");
  if (c.method != Method::one_level && !(c.tau > 0.0)) throw InvalidArgument("tau must be positive");
  if (!(c.tol > 0.0)) throw InvalidArgument("tol must be positive");
  if (c.maxit < 1) throw InvalidArgument("maxit must be positive");
  if (c.n_cells != 0 && c.n_cells < 2) throw InvalidArgument("n_cells must be >= 2");
  if (p > c.resolved_n_cells()) throw InvalidArgument("more subdomains per side than grid cells");
  if (c.medium.kind == CoefficientField::Kind::layered && !(c.medium.a_max >= 1.0))
    throw InvalidArgument("a_max must be >= 1");
  const double bytes = estimate_memory_bytes(c);
  if (!c.allow_large && (bytes > c.memory_cap_gb * 1e9 || c.resolved_n_cells() >= 1000))
    throw InvalidArgument("estimated memory " + std::to_string(bytes / 1e9) +
                          " GB exceeds the cap; pass --allow-large to run anyway");
}

struct RunRecord {
  RunConfig config;
  int n = 0;           ///< number of interior dofs
  int n_cells = 0;
  double L = 0.0;      ///< domain diameter in wavelengths
  double H_waves = 0.0;
  double n_loc = 0.0;
  int iterations = 0;
  bool converged = false;
  int CS = 0;
  double CS_loc = 0.0;
  double relres_final = 0.0;
  double tau_eff = 0.0;
  double setup_seconds = 0.0;
  double solve_seconds = 0.0;
  std::vector<std::string> warnings;
  std::string error;   ///< non-empty when the run failed inside a grid
  KrylovReport krylov;
};

inline double wavelengths(double length, double k) { return length / (2.0 * std::numbers::pi / k); }

/// Everything a run builds, kept for diagnostics.
struct Instance {
  std::shared_ptr<const TriMesh> mesh;
  FeSystem sys;
  std::shared_ptr<const DecompLayout> layout;
  std::shared_ptr<const CoarseSpace> coarse;
};

inline Instance build_instance(const RunConfig& c) {
  Instance in;
  const int n_cells = c.resolved_n_cells();
  auto mesh = std::make_shared<const TriMesh>(build_unit_square_mesh(n_cells));
  in.mesh = mesh;
  in.sys = assemble_system(*mesh, c.medium, c.k);
  in.sys.rhs = assemble_gaussian_source(*mesh, in.sys.dofs);
  in.layout = std::make_shared<const DecompLayout>(
      add_overlap(*mesh, in.sys.dofs, partition_square(*mesh, c.N), c.overlap_layers));
  if (c.method != Method::one_level) {
    EigenOptions eo;
    eo.max_modes = c.max_modes;
    eo.seed = c.seed;
    in.coarse = std::make_shared<const CoarseSpace>(build_coarse_space(in.sys, *in.layout, variant_of(c.method), c.tau, eo));
  }
  return in;
}

inline KrylovReport solve_instance(const Instance& in, const SchwarzPrec& prec, const RunConfig& c) {
  KrylovOptions ko;
  ko.tol = c.tol;
  ko.maxit = c.maxit;
  const FeSystem& sys = in.sys;
  if (c.euclidean_residual) {
    const double f = sys.rhs.norm();
    ko.stop_residual = [&sys, f](const Vector& x) { return (sys.rhs - sys.B * x).norm() / f; };
  }
  return gmres_weighted(preconditioned_operator(prec, sys), prec.apply(sys.rhs), sys.Dk, ko);
}

inline RunRecord run_single(const RunConfig& c) {
  validate(c);
  RunRecord rec;
  rec.config = c;
  const auto t0 = std::chrono::steady_clock::now();
  const Instance in = build_instance(c);
  const SchwarzPrec prec = factorize(in.sys, in.layout, in.coarse);
  const auto t1 = std::chrono::steady_clock::now();
  rec.krylov = solve_instance(in, prec, c);
  const auto t2 = std::chrono::steady_clock::now();

  rec.n_cells = in.mesh->n_cells;
  if (c.medium.kind == CoefficientField::Kind::layered && rec.n_cells % 10 != 0)
    rec.warnings.push_back("n_cells is not a multiple of 10: layer interfaces cut through elements");
  rec.n = in.sys.size();
  rec.L = wavelengths(std::numbers::sqrt2, c.k);
  rec.H_waves = wavelengths(in.layout->H, c.k);
  rec.n_loc = in.layout->mean_local_size();
  rec.iterations = rec.krylov.iterations;
  rec.converged = rec.krylov.converged;
  rec.relres_final = rec.krylov.final_relres();
  if (in.coarse) {
    rec.CS = in.coarse->CS();
    rec.CS_loc = in.coarse->CS_loc();
    rec.tau_eff = in.coarse->tau_eff;
  }
  rec.setup_seconds = std::chrono::duration<double>(t1 - t0).count();
  rec.solve_seconds = std::chrono::duration<double>(t2 - t1).count();
  return rec;
}

inline constexpr std::string_view kRunSchema = "helmdd-runs-v1";

inline void write_run_header(std::ostream& os) {
  os << "# schema=" << kRunSchema
     << "; L and H_waves use the bounding-box diagonal over 2 pi / k; hk keeps every lambda <= tau, negatives included\n";
  os << "k,N,method,tau,n,L,H_waves,n_loc,iterations,converged,CS,CS_loc,relres_final\n";
}

inline void write_run_row(std::ostream& os, const RunRecord& r) {
  const auto old = os.precision(10);
  os << r.config.k << ',' << r.config.N << ',' << to_string(r.config.method) << ',';
  if (r.config.method != Method::one_level) os << r.config.tau;
  os << ',' << r.n << ',' << r.L << ',' << r.H_waves << ',' << r.n_loc << ',';
  if (!r.error.empty())
    os << "error";
  else if (!r.converged && r.iterations >= r.config.maxit)
    os << "limit";
  else
    os << r.iterations;
  os << ',' << (r.converged ? "true" : "false") << ',' << r.CS << ',' << r.CS_loc << ',' << r.relres_final << '\n';
  os.precision(old);
}

struct GridSpec {
  std::vector<double> ks;
  std::vector<int> Ns;
  std::vector<double> taus;
  std::vector<Method> methods;
  std::vector<CoefficientField> media;
  RunConfig base;
};

inline std::vector<RunConfig> expand_grid(const GridSpec& g) {
  if (g.ks.empty() || g.Ns.empty() || g.methods.empty()) throw InvalidArgument("grid: k, N and method lists must be non-empty");
  const std::vector<double> taus = g.taus.empty() ? std::vector<double>{g.base.tau} : g.taus;
  const std::vector<CoefficientField> media = g.media.empty() ? std::vector<CoefficientField>{g.base.medium} : g.media;
  std::vector<RunConfig> out;
  for (const auto& med : media)
    for (double k : g.ks)
      for (int N : g.Ns)
        for (Method m : g.methods) {
          const std::vector<double> tl = m == Method::one_level ? std::vector<double>{taus.front()} : taus;
          for (double tau : tl) {
            RunConfig c = g.base;
            c.k = k;
            c.N = N;
            c.method = m;
            c.tau = tau;
            c.medium = med;
            out.push_back(c);
          }
        }
  return out;
}

/// Runs a grid; a failure in one run (including an invalid combination) is recorded in its
/// row and does not stop the others.
inline std::vector<RunRecord> run_grid(const GridSpec& g) {
  const auto configs = expand_grid(g);
  std::vector<RunRecord> out;
  out.reserve(configs.size());
  for (const auto& c : configs) {
    try {
      out.push_back(run_single(c));
    } catch (const std::exception& e) {
      RunRecord r;
      r.config = c;
      r.error = e.what();
      out.push_back(std::move(r));
    }
  }
  return out;
}

/// Plot-ready companion tables keyed by (k, N) or (k, tau).
inline void write_plot_tables(const std::vector<RunRecord>& rows, std::ostream& it_vs_cs, std::ostream& it_vs_tau,
                              std::ostream& it_vs_hwaves, std::ostream& cs_vs_hwaves) {
  it_vs_cs << "k,N,method,tau,CS,iterations\n";
  it_vs_tau << "k,N,method,tau,iterations\n";
  it_vs_hwaves << "k,tau,method,N,H_waves,iterations\n";
  cs_vs_hwaves << "k,tau,method,N,H_waves,CS,CS_loc\n";
  for (auto* os : {&it_vs_cs, &it_vs_tau, &it_vs_hwaves, &cs_vs_hwaves}) os->precision(10);
  for (const auto& r : rows) {
    if (!r.error.empty()) continue;
    const auto m = to_string(r.config.method);
    it_vs_cs << r.config.k << ',' << r.config.N << ',' << m << ',' << r.config.tau << ',' << r.CS << ',' << r.iterations << '\n';
    it_vs_tau << r.config.k << ',' << r.config.N << ',' << m << ',' << r.config.tau << ',' << r.iterations << '\n';
    it_vs_hwaves << r.config.k << ',' << r.config.tau << ',' << m << ',' << r.config.N << ',' << r.H_waves << ','
                 << r.iterations << '\n';
    cs_vs_hwaves << r.config.k << ',' << r.config.tau << ',' << m << ',' << r.config.N << ',' << r.H_waves << ','
                 << r.CS << ',' << r.CS_loc << '\n';
  }
}

struct DiagnoseResult {
  TheoryReport report;
  Ledger ledger;
};

/// Theory report for one instance: constants from the measured Lambda, Theta_eff, H and
/// C_stab, dense FoV bounds when the instance is small enough, and the lemma ledger when
/// the coarse space is of DeltaK type.
inline DiagnoseResult diagnose(const RunConfig& c, int samples = 50) {
  validate(c);
  DiagnoseResult out;
  const Instance in = build_instance(c);
  const SchwarzPrec prec = factorize(in.sys, in.layout, in.coarse);
  TheoryReport& rep = out.report;
  rep.cstab = estimate_cstab(in.sys);
  rep.Theta_tau = c.method == Method::one_level || std::isinf(c.tau) ? 0.0 : 1.0 / c.tau;
  rep.Theta_eff = in.coarse ? theta_of(*in.coarse).value_or(0.0) : 0.0;
  // One-level has no coarse space, which the constants cannot express; report with Theta_tau.
  rep.constants = theory_constants(std::isfinite(rep.cstab.value) ? rep.cstab.value : 1e300, in.layout->Lambda,
                                   in.coarse ? rep.Theta_eff : rep.Theta_tau, in.layout->H, c.k);
  try {
    rep.fov = fov_bounds(prec, in.sys);
  } catch (const TooLarge& e) {
    rep.fov_note = e.what();
  }
  rep.krylov = solve_instance(in, prec, c);
  if (in.coarse && in.coarse->variant == GeneoVariant::DeltaK) {
    LemmaOptions lo;
    lo.samples = samples;
    lo.seed = c.seed;
    if (std::isfinite(rep.cstab.value)) lo.C_stab = rep.cstab.value;
    out.ledger = verify_lemmas(in.sys, *in.layout, *in.coarse, lo);
  }
  return out;
}

}  // namespace helmdd
