// Command-line driver: run | sweep | audit | meshgen.
//
// Exit codes: 0 success, 2 configuration error, 3 numerical failure,
// 4 stability audit flagged growth.

#include "pspde/config.hpp"
#include "pspde/ensemble.hpp"
#include "pspde/error.hpp"
#include "pspde/output.hpp"
#include "pspde/report.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <iostream>

namespace
{

using namespace pspde;

constexpr int exit_ok = 0;
constexpr int exit_config = 2;
constexpr int exit_numeric = 3;
constexpr int exit_audit = 4;

struct Common
{
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> samples;
  std::optional<int> threads;
  std::optional<std::string> out;
};

void add_common(CLI::App & cmd, Common & c)
{
  cmd.add_option("config", c.config, "run configuration (JSON)")->required();
  cmd.add_option("--seed", c.seed, "base seed (overrides seeds.base_seed)");
  cmd.add_option("--samples", c.samples, "Monte-Carlo samples");
  cmd.add_option("--threads", c.threads, "worker threads (fallback: PENALTY_SPDE_THREADS)");
  cmd.add_option("--out", c.out, "output directory (overrides outputs.directory)");
}

std::filesystem::path out_dir(RunConfig const & rc, Common const & c)
{
  return c.out ? std::filesystem::path(*c.out) : std::filesystem::path(rc.outputs.directory);
}

EnsembleCase reference_case(RunConfig const & rc, std::shared_ptr<Mesh const> const & mesh, SchemeConfig const & cfg)
{
  EnsembleCase ref{mesh, cfg};
  ref.config.kind = reference_kind(rc);
  ref.config.validate();
  return ref;
}

int cmd_run(Common const & c, std::uint64_t sample)
{
  auto rc = load_run_config(c.config);
  auto mesh = build_mesh(rc);
  auto cfg = make_scheme_config(rc, *mesh);
  cfg.threads = resolve_threads(c.threads);
  auto const dir = out_dir(rc, c);
  std::uint64_t const seed = c.seed.value_or(rc.base_seed);

  auto const t0 = std::chrono::steady_clock::now();
  auto disc = build_discretization(mesh, cfg);
  int snapshot = 0;
  auto write_snapshot = [&](State const & s) {
    char name[64];
    std::snprintf(name, sizeof name, "snapshots/state_%05d.vtk", s.m);
    write_vtk(s.velocity, s.pressure, dir / name, "t = " + format_double(s.t));
    ++snapshot;
  };
  StepObserver observer;
  if (rc.outputs.vtk)
  {
    write_snapshot(initial_state(*disc, cfg));
    observer = [&](State const &, State const & next, StepDiagnostics const &) {
      bool const keep = next.m == cfg.M || (cfg.snapshot_stride > 0 && next.m % cfg.snapshot_stride == 0);
      if (keep)
        write_snapshot(next);
    };
  }
  cfg.snapshot_stride = 0;
  auto traj = run_path(disc, cfg, seed, sample, observer);
  double const elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  ledger_table(traj).write(dir / "ledger.csv");
  write_file_atomically(dir / "summary.json", run_summary_json(traj, elapsed));
  std::cout << to_string(cfg.kind) << ": " << cfg.M << " steps, k = " << cfg.k << ", eps = " << cfg.epsilon
            << ", k/eps = " << cfg.k_over_epsilon() << "\n"
            << "final |V|^2 = " << (traj.energy.empty() ? 0.0 : traj.energy.back().v_sq) << "\n"
            << "wrote " << (dir / "ledger.csv").string();
  if (snapshot > 0)
    std::cout << " and " << snapshot << " VTK snapshots";
  std::cout << "\n";
  return exit_ok;
}

int cmd_sweep(Common const & c, std::vector<double> eps_list, bool paper_fig3, std::optional<std::string> mode)
{
  auto rc = load_run_config(c.config);
  auto mesh = build_mesh(rc);
  auto cfg = make_scheme_config(rc, *mesh);
  if (!is_penalty(cfg.kind))
    throw ConfigError("scheme.kind: a sweep needs a penalty scheme");
  if (paper_fig3)
    eps_list = fifth_presets(cfg.epsilon, 5);
  else if (eps_list.empty())
    eps_list = rc.ensemble.eps_list.empty() ? fifth_presets(cfg.epsilon, rc.ensemble.presets) : rc.ensemble.eps_list;

  SweepOptions opt;
  opt.ensemble.n_samples = c.samples.value_or(rc.ensemble.samples);
  opt.ensemble.base_seed = c.seed.value_or(rc.base_seed);
  opt.ensemble.threads = resolve_threads(c.threads);
  opt.mode = mode ? step_mode_from_string(*mode) : rc.ensemble.mode;
  opt.delta = rc.k.recipe ? rc.k.delta : 0.1;

  auto const result = epsilon_sweep(reference_case(rc, mesh, cfg), {mesh, cfg}, eps_list, opt);
  auto const dir = out_dir(rc, c);
  sweep_table(result).write(dir / "sweep.csv");
  write_file_atomically(dir / "sweep.json", sweep_summary_json(result));

  for (auto const & w : result.warnings)
    std::cerr << "warning: " << w << "\n";
  std::cout << "eps,mean_sq_error,error_variance\n";
  for (auto const & r : result.rows)
    std::cout << r.epsilon << "," << r.stats.mean_sq_error << "," << r.stats.error_variance << "\n";
  if (result.slope)
    std::cout << "fitted slope: " << *result.slope << "\n";
  else
    std::cout << "fitted slope: not applicable (single eps)\n";
  std::cout << "error monotone in eps: " << (result.mse_decreasing ? "yes" : "no") << "\n"
            << "wrote " << (dir / "sweep.csv").string() << "\n";
  return exit_ok;
}

int cmd_audit(Common const & c, std::optional<int> n_levels)
{
  auto rc = load_run_config(c.config);
  auto mesh = build_mesh(rc);
  auto cfg = make_scheme_config(rc, *mesh);
  if (!is_penalty(cfg.kind))
    throw ConfigError("scheme.kind: the stability audit needs a penalty scheme");
  std::vector<double> levels = rc.audit.levels;
  if (n_levels)
  {
    if (*n_levels < 1)
      throw ConfigError("--levels must be >= 1");
    while (static_cast<int>(levels.size()) < *n_levels)
      levels.push_back(levels.back() / 2.0);
    levels.resize(*n_levels);
  }
  EnsembleOptions opt;
  opt.n_samples = c.samples.value_or(rc.audit.samples);
  opt.base_seed = c.seed.value_or(rc.base_seed);
  opt.threads = resolve_threads(c.threads);

  auto const report = stability_audit(cfg, mesh_for_size(rc), levels, rc.audit.delta, opt);
  auto const dir = out_dir(rc, c);
  audit_table(report).write(dir / "audit.csv");
  write_file_atomically(dir / "audit.json", audit_summary_json(report));
  for (auto const & l : report.levels)
    std::cout << "h = " << l.h << " (h_max " << l.h_max << "), eps = " << l.epsilon << ", k = " << l.k
              << ": bracket " << l.bracket << (l.growth > 0 ? ", growth x" + format_double(l.growth) : "") << "\n";
  if (report.blow_up)
  {
    std::cout << "FLAG: energy bracket grew by more than x2 between levels\n";
    return exit_audit;
  }
  std::cout << "no blow-up\n";
  return exit_ok;
}

int cmd_meshgen(Common const & c, std::string const & format)
{
  auto rc = load_run_config(c.config);
  auto mesh = build_mesh(rc);
  auto const dir = out_dir(rc, c);
  auto const stats = mesh_stats(*mesh);
  std::filesystem::path path;
  if (format == "msh")
  {
    path = dir / "mesh.msh";
    write_msh(*mesh, path);
  }
  else
  {
    path = dir / "mesh.txt";
    write_native_mesh(*mesh, path);
  }
  std::cout << mesh->n_vertices() << " vertices, " << mesh->n_triangles() << " triangles, h_max = " << stats.h_max
            << ", h_min = " << stats.h_min << ", ratio = " << stats.quasi_uniformity_ratio << "\n"
            << "wrote " << path.string() << "\n";
  return exit_ok;
}

} // namespace

int main(int argc, char ** argv)
{
  CLI::App app{"Pressure-penalty finite element solver for stochastic Navier-Stokes"};
  app.require_subcommand(1);

  Common run_opts, sweep_opts, audit_opts, mesh_opts;
  std::uint64_t sample = 0;
  auto * run = app.add_subcommand("run", "integrate one noise path and write the energy ledger");
  add_common(*run, run_opts);
  run->add_option("--sample", sample, "sample index of the noise path");

  std::vector<double> eps_list;
  bool paper_fig3 = false;
  std::optional<std::string> mode;
  auto * sweep = app.add_subcommand("sweep", "paired-path eps sweep against the saddle reference");
  add_common(*sweep, sweep_opts);
  auto * eps_opt = sweep->add_option("--eps-list", eps_list, "strictly decreasing eps values")->delimiter(',');
  sweep->add_flag("--paper-fig3", paper_fig3, "eps, eps/5, ..., eps/625 from the configured eps")->excludes(eps_opt);
  sweep->add_option("--step-mode", mode, "fixed-k or recipe");

  std::optional<int> levels;
  auto * audit = app.add_subcommand("audit", "energy bracket under mesh refinement");
  add_common(*audit, audit_opts);
  audit->add_option("--levels", levels, "number of refinement levels");

  std::string format = "msh";
  auto * meshgen = app.add_subcommand("meshgen", "write the configured mesh");
  add_common(*meshgen, mesh_opts);
  meshgen->add_option("--format", format, "msh or native")->check(CLI::IsMember({"msh", "native"}));

  try
  {
    app.parse(argc, argv);
  }
  catch (CLI::CallForHelp const & e)
  {
    return app.exit(e);
  }
  catch (CLI::ParseError const & e)
  {
    app.exit(e);
    return exit_config;
  }

  try
  {
    if (*run)
      return cmd_run(run_opts, sample);
    if (*sweep)
      return cmd_sweep(sweep_opts, eps_list, paper_fig3, mode);
    if (*audit)
      return cmd_audit(audit_opts, levels);
    return cmd_meshgen(mesh_opts, format);
  }
  catch (StepError const & e)
  {
    std::cerr << "error: step " << e.step() << " failed: " << e.what() << "\n";
    return exit_numeric;
  }
  catch (SolverError const & e)
  {
    std::cerr << "error: " << e.what() << "\n";
    return exit_numeric;
  }
  catch (ConfigError const & e)
  {
    std::cerr << "error: " << e.what() << "\n";
    return exit_config;
  }
  catch (ParseError const & e)
  {
    std::cerr << "error: " << e.what() << "\n";
    return exit_config;
  }
  catch (GeometryError const & e)
  {
    std::cerr << "error: " << e.what() << "\n";
    return exit_config;
  }
}
