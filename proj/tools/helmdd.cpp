// helmdd command-line driver: single runs, experiment grids, theory diagnostics and dumps.
//
// Exit codes: 0 success, 2 configuration error, 3 numerical failure.

#include "helmdd/bench.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace {

using namespace helmdd;

struct CliConfig {
  RunConfig run;
  std::string medium = "homogeneous";
  double a_max = 10.0;
  std::string method = "delta_k";
  std::string tau = "0.5";
  std::string output;
};

double parse_tau(const std::string& s) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw InvalidArgument("");
    return v;
  } catch (const std::exception&) {
    throw InvalidArgument("cannot parse tau '" + s + "'");
  }
}

CoefficientField parse_medium(const std::string& name, double a_max) {
  if (name == "homogeneous") return CoefficientField::homogeneous();
  if (name == "layered") return CoefficientField::layered(a_max);
  throw InvalidArgument("unknown medium '" + name + "' (homogeneous, layered)");
}

void add_run_options(CLI::App& app, CliConfig& c, bool with_method = true) {
  app.add_option("--k", c.run.k, "Wavenumber");
  app.add_option("--kh", c.run.kh_target, "Target k*h (resolution rule)");
  app.add_option("--n-cells", c.run.n_cells, "Grid cells per side (overrides --kh)");
  app.add_option("--N", c.run.N, "Number of subdomains (perfect square)");
  app.add_option("--overlap", c.run.overlap_layers, "Overlap layers");
  app.add_option("--medium", c.medium, "homogeneous | layered");
  app.add_option("--a-max", c.a_max, "Layer contrast for the layered medium");
  if (with_method) {
    app.add_option("--method", c.method, "one_level | delta | delta_k | hk");
    app.add_option("--tau", c.tau, "Spectral threshold (inf keeps every finite mode)");
  }
  app.add_option("--tol", c.run.tol, "GMRES relative tolerance");
  app.add_option("--maxit", c.run.maxit, "GMRES iteration limit");
  app.add_option("--seed", c.run.seed, "Random seed");
  app.add_option("--max-modes", c.run.max_modes, "Per-subdomain cap on kept modes (-1: none)");
  app.add_flag("--euclidean-residual", c.run.euclidean_residual,
               "Stop on the Euclidean unpreconditioned residual instead of the Dk-norm one");
  app.add_flag("--allow-large", c.run.allow_large, "Allow runs above the memory cap");
  app.add_option("--memory-cap-gb", c.run.memory_cap_gb, "Estimated memory cap in GB");
  app.add_option("-o,--output", c.output, "Output file (default stdout)");
}

RunConfig finalize(CliConfig& c, bool with_method = true) {
  c.run.medium = parse_medium(c.medium, c.a_max);
  if (with_method) {
    c.run.method = parse_method(c.method);
    c.run.tau = parse_tau(c.tau);
  }
  return c.run;
}

template <class F>
void with_output(const std::string& path, F&& f) {
  if (path.empty() || path == "-") {
    f(std::cout);
    return;
  }
  std::ofstream os(path);
  if (!os) throw InvalidArgument("cannot open output file '" + path + "'");
  f(os);
}

template <class T>
std::vector<T> split_list(const std::string& s, T (*conv)(const std::string&)) {
  std::vector<T> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(conv(item));
  return out;
}

double to_double(const std::string& s) { return parse_tau(s); }
int to_int(const std::string& s) {
  try {
    return std::stoi(s);
  } catch (const std::exception&) {
    throw InvalidArgument("cannot parse integer '" + s + "'");
  }
}
Method to_method(const std::string& s) { return parse_method(s); }

void print_warnings(const RunRecord& r) {
  for (const auto& w : r.warnings) std::cerr << "warning: " << w << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-level Schwarz preconditioners with spectral coarse spaces for Helmholtz"};
  app.set_config("--config", "", "INI file with key = value lines; flags override it");
  app.require_subcommand(1);

  CliConfig run_cfg;
  auto* run = app.add_subcommand("run", "Run one configuration and print one CSV row");
  add_run_options(*run, run_cfg);
  std::string history_path;
  run->add_option("--history", history_path, "Write the residual history (iter,relres)");

  CliConfig grid_cfg;
  auto* grid = app.add_subcommand("grid", "Run the cartesian product of parameter lists");
  add_run_options(*grid, grid_cfg, false);
  std::string ks = "20", Ns = "16", taus = "0.5", methods = "delta_k", media = "homogeneous", plot_dir;
  grid->add_option("--ks", ks, "Comma-separated wavenumbers");
  grid->add_option("--Ns", Ns, "Comma-separated subdomain counts");
  grid->add_option("--taus", taus, "Comma-separated thresholds");
  grid->add_option("--methods", methods, "Comma-separated methods");
  grid->add_option("--media", media, "Comma-separated media (homogeneous, layered)");
  grid->add_option("--plot-dir", plot_dir, "Directory for the plot-data tables");

  CliConfig diag_cfg;
  auto* diag = app.add_subcommand("diagnose", "Theory constants, FoV bounds and the lemma ledger for one instance");
  add_run_options(*diag, diag_cfg);
  std::string ledger_path;
  int samples = 50;
  diag->add_option("--ledger", ledger_path, "Lemma ledger CSV (default: <output>.ledger.csv or stdout)");
  diag->add_option("--samples", samples, "Random samples per check");

  int mesh_cells = 4;
  std::string mesh_out;
  auto* dump_mesh = app.add_subcommand("dump-mesh", "Write the structured mesh");
  dump_mesh->add_option("--n-cells", mesh_cells, "Grid cells per side");
  dump_mesh->add_option("-o,--output", mesh_out, "Output file");

  CliConfig eig_cfg;
  auto* dump_eigs = app.add_subcommand("dump-eigs", "Write per-subdomain eigenvalues and the subdomain layout");
  add_run_options(*dump_eigs, eig_cfg);
  std::string layout_path, basis_path;
  dump_eigs->add_option("--layout", layout_path, "Subdomain layout CSV");
  dump_eigs->add_option("--basis", basis_path, "Coarse basis Z in coordinate format");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (run->parsed()) {
      const RunConfig c = finalize(run_cfg);
      const RunRecord r = run_single(c);
      print_warnings(r);
      with_output(run_cfg.output, [&](std::ostream& os) {
        write_run_header(os);
        write_run_row(os, r);
      });
      if (!history_path.empty()) with_output(history_path, [&](std::ostream& os) { write_history_csv(os, r.krylov); });
    } else if (grid->parsed()) {
      GridSpec g;
      g.base = finalize(grid_cfg, false);
      g.ks = split_list<double>(ks, to_double);
      g.Ns = split_list<int>(Ns, to_int);
      g.taus = split_list<double>(taus, to_double);
      g.methods = split_list<Method>(methods, to_method);
      std::stringstream ms(media);
      std::string item;
      while (std::getline(ms, item, ',')) g.media.push_back(parse_medium(item, grid_cfg.a_max));
      const auto rows = run_grid(g);
      with_output(grid_cfg.output, [&](std::ostream& os) {
        write_run_header(os);
        for (const auto& r : rows) write_run_row(os, r);
      });
      for (const auto& r : rows) {
        print_warnings(r);
        if (!r.error.empty()) std::cerr << "run k=" << r.config.k << " N=" << r.config.N << " failed: " << r.error << '\n';
      }
      if (!plot_dir.empty()) {
        std::filesystem::create_directories(plot_dir);
        const std::filesystem::path d(plot_dir);
        std::ofstream a(d / "it_vs_cs.csv"), b(d / "it_vs_tau.csv"), c(d / "it_vs_Hwaves.csv"), e(d / "cs_vs_Hwaves.csv");
        write_plot_tables(rows, a, b, c, e);
      }
    } else if (diag->parsed()) {
      const RunConfig c = finalize(diag_cfg);
      const DiagnoseResult d = diagnose(c, samples);
      with_output(diag_cfg.output, [&](std::ostream& os) {
        write_theory_header(os);
        write_theory_row(os, d.report, c.N, c.tau);
      });
      if (!d.report.fov_note.empty()) std::cerr << "note: " << d.report.fov_note << '\n';
      if (d.report.cstab.resonance)
        std::cerr << "warning: near resonance, C_stab = " << d.report.cstab.value
                  << ", smallest singular value of B in the Dk geometry = " << d.report.cstab.min_singular << '\n';
      if (!d.ledger.empty()) {
        std::string path = ledger_path;
        if (path.empty() && !diag_cfg.output.empty() && diag_cfg.output != "-") path = diag_cfg.output + ".ledger.csv";
        with_output(path, [&](std::ostream& os) { write_ledger_csv(os, d.ledger); });
      }
    } else if (dump_mesh->parsed()) {
      const TriMesh m = build_unit_square_mesh(mesh_cells);
      with_output(mesh_out, [&](std::ostream& os) { write_mesh(os, m); });
    } else if (dump_eigs->parsed()) {
      RunConfig c = finalize(eig_cfg);
      if (c.method == Method::one_level) throw InvalidArgument("dump-eigs needs a coarse method");
      validate(c);
      const Instance in = build_instance(c);
      with_output(eig_cfg.output, [&](std::ostream& os) { write_eigen_csv(os, *in.coarse); });
      if (!layout_path.empty())
        with_output(layout_path, [&](std::ostream& os) { write_layout_csv(os, *in.layout, c.k); });
      if (!basis_path.empty())
        with_output(basis_path, [&](std::ostream& os) { write_coordinate(os, in.coarse->Z); });
    }
  } catch (const InvalidArgument& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
