// sgls: command-line driver for the stochastic Galerkin level-set solver.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "sgls/cli_io.hpp"

namespace fs = std::filesystem;
using namespace sgls;

namespace {

int fail(ErrorKind kind, const std::string& msg) {
  std::cerr << "sgls: error: " << to_string(kind) << ": " << msg << "\n";
  return 1;
}

std::string snapshot_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "snap_%06zu.bin", i);
  return buf;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::Io, "cannot create " + dir.string() + ": " + ec.message());
}

int cmd_solve(const fs::path& config_path, const fs::path& out) {
  const RunConfig cfg = load_config(config_path);
  const auto basis = make_basis(cfg);
  const auto alg = std::make_shared<const GpcAlgebra>(basis);
  const Grid grid = make_grid(cfg);
  const SolverState state =
      init_deterministic(grid, make_initial_condition(cfg), make_velocity(cfg), alg, make_solver_options(cfg));
  const RunResult res = run(state, cfg.run.t_end, cfg.run.snapshot_every);

  ensure_dir(out);
  ManifestInfo info;
  info.config_hash = config_hash(cfg);
  info.basis_fingerprint = basis->fingerprint();
  info.seed = cfg.run.seed;
  info.command = "solve";
  info.config_text = serialize(cfg);
  std::ofstream diag(out / "diagnostics.csv", std::ios::trunc);
  diag << "index,step,t,gradient_consistency,max_wavespeed\n";
  for (std::size_t i = 0; i < res.snapshots.size(); ++i) {
    const Snapshot& s = res.snapshots[i];
    const std::string name = snapshot_name(i);
    write_snapshot(out / name, to_field_snapshot(s, grid));
    info.outputs.push_back(name);
    diag << i << ',' << s.step << ',' << s.t << ',' << s.gradient_consistency << ',' << s.max_wavespeed << '\n';
  }
  info.outputs.push_back("diagnostics.csv");
  write_manifest(out / "manifest.json", info);

  std::cout << "solve: " << res.state.step_count << " steps, t = " << res.state.t << ", " << res.snapshots.size()
            << " snapshots in " << out.string() << "\n";
  if (!res.completed) {
    const auto& r = res.last_report;
    return fail(r.error.value_or(ErrorKind::NonConvergence), r.message);
  }
  return 0;
}

int cmd_oracle(const fs::path& config_path, const fs::path& out) {
  const RunConfig cfg = load_config(config_path);
  const auto basis = make_basis(cfg);
  const Grid grid = make_grid(cfg);
  EnsembleMode mode;
  if (cfg.run.mode == RunMode::mc)
    mode = MonteCarlo{cfg.run.samples, cfg.run.seed};
  else if (cfg.run.mode == RunMode::collocation)
    mode = Collocation{cfg.run.nodes};
  else
    return fail(ErrorKind::Config, "oracle needs run.mode = mc or collocation");
  EnsembleOptions opts;
  opts.form = cfg.run.form;
  opts.cfl = cfg.run.cfl;
  opts.epsilons = {cfg.quantile.epsilon};
  const EnsembleStats stats =
      ensemble(grid, make_initial_condition(cfg), make_velocity(cfg), *basis, cfg.run.t_end, mode, opts);

  ensure_dir(out);
  FieldSnapshot snap;
  snap.t = stats.t;
  snap.nx = static_cast<std::uint32_t>(grid.nx);
  snap.ny = static_cast<std::uint32_t>(grid.ny);
  snap.modes = 1;
  snap.components = 3;  // mean, variance, standard error
  snap.payload.assign(grid.cells() * 3, 0.0);
  for (std::uint32_t ix = 0; ix < snap.nx; ++ix)
    for (std::uint32_t iy = 0; iy < snap.ny; ++iy) {
      const std::size_t c = grid.index(static_cast<int>(ix), static_cast<int>(iy));
      snap.at(ix, iy, 0, 0) = stats.mean[c];
      snap.at(ix, iy, 0, 1) = stats.variance[c];
      snap.at(ix, iy, 0, 2) = stats.std_error[c];
    }
  write_snapshot(out / "ensemble.bin", snap);

  QuantileBand band;
  band.epsilon = cfg.quantile.epsilon;
  band.p = cfg.quantile.p;
  band.t = stats.t;
  band.cdf = stats.cdf.at(0);
  for (double v : band.cdf) band.mask.push_back(v >= band.p ? 1 : 0);
  const std::string hash = config_hash(cfg);
  export_band(out / "ensemble_band.txt", band, grid, hash);

  std::ofstream env(out / "envelopes.txt", std::ios::trunc);
  env << "# zero-level-set envelopes over " << stats.samples << " samples\n# columns: x y union intersection\n";
  for (std::size_t c = 0; c < grid.cells(); ++c) {
    const Point p = grid.center(c);
    env << p.x << ' ' << p.y << ' ' << int(stats.union_envelope[c]) << ' ' << int(stats.intersection_envelope[c])
        << '\n';
  }

  ManifestInfo info;
  info.config_hash = hash;
  info.basis_fingerprint = basis->fingerprint();
  info.seed = cfg.run.seed;
  info.command = "oracle";
  info.config_text = serialize(cfg);
  info.outputs = {"ensemble.bin", "ensemble_band.txt", "envelopes.txt"};
  write_manifest(out / "manifest.json", info);
  std::cout << "oracle: " << stats.samples << " samples, t = " << stats.t << "\n";
  return 0;
}

int cmd_band(const fs::path& snapshot, double epsilon, double p, const std::string& config_path, std::string out) {
  RunConfig cfg;
  if (!config_path.empty()) {
    cfg = load_config(config_path);
  } else {
    const fs::path manifest = snapshot.parent_path() / "manifest.json";
    if (!fs::exists(manifest))
      return fail(ErrorKind::Config, "no --config given and no manifest.json next to " + snapshot.string());
    cfg = parse_config(read_manifest(manifest).config_text, snapshot.parent_path());
  }
  const auto basis = make_basis(cfg);
  const auto alg = std::make_shared<const GpcAlgebra>(basis);
  const Grid grid = make_grid(cfg);
  const FieldSnapshot snap = read_snapshot(snapshot);
  if (snap.nx != static_cast<std::uint32_t>(grid.nx) || snap.ny != static_cast<std::uint32_t>(grid.ny) ||
      snap.modes != basis->size())
    return fail(ErrorKind::Format, "snapshot layout does not match the configured grid and basis");
  const CdfEvaluator cdf(alg, make_cdf_options(cfg));
  const QuantileBand band = perturbed_level_set(cdf, phi_field(snap), epsilon, p, snap.t);
  if (out.empty()) out = snapshot.string() + ".band.txt";
  export_band(out, band, grid, config_hash(cfg));
  std::cout << "band: " << band.count() << " of " << band.mask.size() << " cells, written to " << out << "\n";
  return 0;
}

int cmd_check(const fs::path& config_path) {
  const RunConfig cfg = load_config(config_path);
  const auto basis = make_basis(cfg);
  const auto alg = std::make_shared<const GpcAlgebra>(basis);
  const Grid grid = make_grid(cfg);
  const SolverState state =
      init_deterministic(grid, make_initial_condition(cfg), make_velocity(cfg), alg, make_solver_options(cfg));
  // A zero-length step runs every positivity and hyperbolicity test.
  const StepResult r = step(state, INFINITY, 0.0);
  if (r.report.halted) return fail(r.report.error.value_or(ErrorKind::NotSpd), r.report.message);
  std::cout << "check: ok (" << grid.cells() << " cells, |K| = " << basis->size()
            << ", max wave speed " << r.report.max_wavespeed << ", CFL dt " << state.cfl / r.report.max_rate
            << ")\n";
  return 0;
}

int cmd_basis(int L, int K, int nodes, const std::string& config_path, const std::string& out) {
  std::shared_ptr<const GpcBasis> basis;
  if (!config_path.empty())
    basis = make_basis(load_config(config_path));
  else
    basis = nodes > 0 ? GpcBasis::build(L, K, nodes) : GpcBasis::build(L, K);
  std::ostringstream os;
  os << "# L = " << basis->dim() << ", K = " << basis->degree() << ", size = " << basis->size()
     << ", nodes_per_dim = " << basis->nodes_per_dim() << ", fingerprint = " << std::hex << basis->fingerprint()
     << std::dec << "\n";
  basis->dump_tensors(os);
  if (out.empty()) {
    std::cout << os.str();
  } else {
    std::ofstream f(out, std::ios::trunc);
    if (!f) throw Error(ErrorKind::Io, "cannot open " + out);
    f << os.str();
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stochastic Galerkin level-set solver"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  fs::path config, out;
  std::string config_opt, out_opt;
  fs::path snapshot;
  double epsilon = 0.05, p = 0.9;
  int L = 1, K = 1, nodes = 0;

  auto* solve = app.add_subcommand("solve", "Intrusive stochastic Galerkin run");
  solve->add_option("--config", config, "Config file")->required();
  solve->add_option("--out", out, "Output directory")->required();

  auto* oracle = app.add_subcommand("oracle", "Monte Carlo or collocation reference run");
  oracle->add_option("--config", config, "Config file")->required();
  oracle->add_option("--out", out, "Output directory")->required();

  auto* band = app.add_subcommand("band", "Quantile band of a snapshot");
  band->add_option("--snapshot", snapshot, "Snapshot file")->required();
  band->add_option("--epsilon", epsilon, "Level-set thickness")->required()->check(CLI::NonNegativeNumber);
  band->add_option("--p", p, "Probability threshold in (0, 1]")->required()->check(CLI::Range(0.0, 1.0));
  band->add_option("--config", config_opt, "Config (default: manifest next to the snapshot)");
  band->add_option("--out", out_opt, "Output file (default: <snapshot>.band.txt)");

  auto* check = app.add_subcommand("check", "Positivity and hyperbolicity audit at t = 0");
  check->add_option("--config", config, "Config file")->required();

  auto* basis = app.add_subcommand("basis", "Dump triple-product tensors");
  basis->add_option("--L", L, "Stochastic dimension")->check(CLI::Range(1, 4));
  basis->add_option("--K", K, "Total degree")->check(CLI::Range(0, 12));
  basis->add_option("--nodes", nodes, "Quadrature nodes per dimension (0: default)");
  basis->add_option("--config", config_opt, "Take L, K and nodes from a config");
  basis->add_option("--out", out_opt, "Output file (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "sgls: error: Usage: " << e.what() << "\n";
    return 2;
  }

  try {
    if (*solve) return cmd_solve(config, out);
    if (*oracle) return cmd_oracle(config, out);
    if (*band) return cmd_band(snapshot, epsilon, p, config_opt, out_opt);
    if (*check) return cmd_check(config);
    if (*basis) return cmd_basis(L, K, nodes, config_opt, out_opt);
  } catch (const Error& e) {
    std::string msg = e.what();
    if (!e.cells().empty() && msg.find("cells") == std::string::npos) msg += " (cells: " + std::to_string(e.cells().size()) + ")";
    return fail(e.kind(), msg);
  } catch (const std::exception& e) {
    return fail(ErrorKind::Io, e.what());
  }
  return 0;
}
