#include "pspde/ensemble.hpp"

#include "pspde/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <sstream>
#include <stdexcept>

namespace pspde
{

int resolve_threads(std::optional<int> requested)
{
  if (requested && *requested >= 1)
    return *requested;
  if (char const * env = std::getenv("PENALTY_SPDE_THREADS"))
  {
    char * end = nullptr;
    long const v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1)
      return static_cast<int>(v);
  }
  return 1;
}

namespace
{

bool same_mesh(Mesh const & a, Mesh const & b)
{
  if (&a == &b)
    return true;
  if (a.n_vertices() != b.n_vertices() || a.n_triangles() != b.n_triangles())
    return false;
  auto va = a.vertices();
  auto vb = b.vertices();
  for (Index i = 0; i < a.n_vertices(); ++i)
    if (va[i].x != vb[i].x || va[i].y != vb[i].y)
      return false;
  auto ta = a.triangles();
  auto tb = b.triangles();
  for (Index t = 0; t < a.n_triangles(); ++t)
    if (ta[t] != tb[t])
      return false;
  return true;
}

bool same_noise(std::shared_ptr<NoiseModel const> const & a, std::shared_ptr<NoiseModel const> const & b)
{
  if (a == b)
    return true;
  if (!a || !b)
    return false;
  auto const & pa = a->params();
  auto const & pb = b->params();
  if (pa.J != pb.J || pa.domain_scale != pb.domain_scale || pa.gamma_kind != pb.gamma_kind ||
      pa.amplitude != pb.amplitude || pa.linear_c != pb.linear_c)
    return false;
  for (int i = 1; i <= pa.J; ++i)
    for (int j = 1; j <= pa.J; ++j)
      if (a->lambda(i, j) != b->lambda(i, j))
        return false;
  return true;
}

void check_pair(EnsembleCase const & ref, EnsembleCase const & cand)
{
  auto const & a = ref.config;
  auto const & b = cand.config;
  if (!ref.mesh || !cand.mesh || !same_mesh(*ref.mesh, *cand.mesh))
    throw ConfigError("paired schemes must run on the same mesh");
  if (a.k != b.k || a.M != b.M || a.T != b.T)
    throw ConfigError("paired schemes must share the time grid (k, M, T)");
  if (a.nu != b.nu)
    throw ConfigError("paired schemes must share the viscosity");
  if (a.velocity_degree != b.velocity_degree)
    throw ConfigError("paired schemes must share the velocity space");
  if (!same_noise(a.noise, b.noise))
    throw ConfigError("paired schemes must share the noise model");
  if (static_cast<bool>(a.forcing) != static_cast<bool>(b.forcing))
    throw ConfigError("paired schemes must share the forcing");
}

SchemeConfig ensemble_config(SchemeConfig c)
{
  c.record_energy = false;
  c.snapshot_stride = 0;
  c.threads = 1;
  return c;
}

double sample_variance(std::vector<double> const & x, double mean)
{
  if (x.size() < 2)
    return 0.0;
  double s = 0.0;
  for (double v : x)
    s += (v - mean) * (v - mean);
  return s / static_cast<double>(x.size() - 1);
}

void enforce_failure_policy(std::size_t n_failed, int n_samples, double max_fraction, std::string const & what)
{
  if (static_cast<double>(n_failed) > max_fraction * n_samples)
  {
    std::ostringstream msg;
    msg << what << ": " << n_failed << " of " << n_samples << " samples failed (limit "
        << max_fraction * 100.0 << "%)";
    throw SolverError(msg.str(), 0, static_cast<double>(n_failed));
  }
}

} // namespace

ReferencePaths run_reference(EnsembleCase const & reference, EnsembleOptions const & options)
{
  if (options.n_samples < 1)
    throw ConfigError("ensemble needs at least one sample");
  ReferencePaths out;
  out.reference = reference;
  out.options = options;
  auto const n = static_cast<std::size_t>(options.n_samples);
  out.velocity.assign(n, std::nullopt);
  out.noise_hash.assign(n, 0);
  std::vector<std::optional<SampleFailure>> failed(n);

  SchemeConfig const cfg = ensemble_config(reference.config);
  auto const disc = build_discretization(reference.mesh, cfg);

  parallel_for(n, options.threads, [&](std::size_t s) {
    std::vector<Vector> path;
    path.reserve(cfg.M);
    try
    {
      auto traj = run_path(disc, cfg, options.base_seed, s, [&](State const &, State const & next, StepDiagnostics const &) {
        path.push_back(next.velocity.coefficients);
      });
      out.noise_hash[s] = traj.noise_hash;
      out.velocity[s] = std::move(path);
    }
    catch (StepError const & e)
    {
      failed[s] = SampleFailure{s, e.step(), e.what()};
    }
  });

  for (auto & f : failed)
    if (f)
      out.failures.push_back(*f);
  enforce_failure_policy(out.failures.size(), options.n_samples, options.max_failure_fraction,
                         "reference scheme " + to_string(reference.config.kind));
  return out;
}

EnsembleStats compare_to_reference(ReferencePaths const & reference, EnsembleCase const & candidate)
{
  check_pair(reference.reference, candidate);
  auto const & options = reference.options;
  auto const n = static_cast<std::size_t>(options.n_samples);
  SchemeConfig const cfg = ensemble_config(candidate.config);
  auto const disc = build_discretization(candidate.mesh, cfg);
  auto const & mass = disc->mass_v;

  struct Slot
  {
    std::vector<double> step_sq; // e_m^2
    std::optional<SampleFailure> failure;
    bool skipped = false;
  };
  std::vector<Slot> slots(n);

  parallel_for(n, options.threads, [&](std::size_t s) {
    auto const & ref_path = reference.velocity[s];
    if (!ref_path)
    {
      slots[s].skipped = true;
      return;
    }
    auto & slot = slots[s];
    slot.step_sq.reserve(cfg.M);
    try
    {
      auto traj = run_path(disc, cfg, options.base_seed, s, [&](State const &, State const & next, StepDiagnostics const &) {
        Vector const diff = next.velocity.coefficients - (*ref_path)[next.m - 1];
        slot.step_sq.push_back(std::max(0.0, diff.dot(mass * diff)));
      });
      if (traj.noise_hash != reference.noise_hash[s])
        throw std::logic_error("paired paths consumed different noise for sample " + std::to_string(s));
    }
    catch (StepError const & e)
    {
      slot.failure = SampleFailure{s, e.step(), e.what()};
    }
  });

  EnsembleStats st;
  st.n_samples = options.n_samples;
  st.step_mse.assign(cfg.M, 0.0);
  st.failures = reference.failures;
  std::vector<double> sq;
  for (std::size_t s = 0; s < n; ++s)
  {
    auto const & slot = slots[s];
    if (slot.skipped)
      continue;
    if (slot.failure)
    {
      st.failures.push_back(*slot.failure);
      continue;
    }
    st.samples.push_back(s);
    st.errors.push_back(std::sqrt(slot.step_sq.back()));
    sq.push_back(slot.step_sq.back());
    for (int m = 0; m < cfg.M; ++m)
      st.step_mse[m] += slot.step_sq[m];
  }
  std::sort(st.failures.begin(), st.failures.end(),
            [](SampleFailure const & a, SampleFailure const & b) { return a.sample < b.sample; });
  st.n_failed = static_cast<int>(st.failures.size());
  enforce_failure_policy(st.failures.size(), options.n_samples, options.max_failure_fraction,
                         "scheme " + to_string(candidate.config.kind));

  double const n_ok = static_cast<double>(st.errors.size());
  if (n_ok > 0)
  {
    for (std::size_t i = 0; i < st.errors.size(); ++i)
    {
      st.mean_error += st.errors[i];
      st.mean_sq_error += sq[i];
    }
    st.mean_error /= n_ok;
    st.mean_sq_error /= n_ok;
    st.rms_error = std::sqrt(st.mean_sq_error);
    st.error_variance = sample_variance(st.errors, st.mean_error);
    st.sq_error_variance = sample_variance(sq, st.mean_sq_error);
    st.ci_halfwidth = 1.96 * std::sqrt(st.sq_error_variance / n_ok);
    for (auto & v : st.step_mse)
    {
      v /= n_ok;
      st.max_step_mse = std::max(st.max_step_mse, v);
    }
  }
  return st;
}

EnsembleStats run_ensemble(EnsembleCase const & reference,
                           EnsembleCase const & candidate,
                           EnsembleOptions const & options)
{
  check_pair(reference, candidate);
  return compare_to_reference(run_reference(reference, options), candidate);
}

std::string to_string(StepMode mode)
{
  return mode == StepMode::fixed_k ? "fixed-k" : "recipe";
}

StepMode step_mode_from_string(std::string const & name)
{
  if (name == "fixed-k")
    return StepMode::fixed_k;
  if (name == "recipe")
    return StepMode::recipe;
  throw ConfigError("unknown step mode \"" + name + "\" (expected fixed-k or recipe)");
}

std::vector<double> fifth_presets(double eps, int count)
{
  std::vector<double> out;
  for (int j = 0; j < count; ++j)
    out.push_back(eps / std::pow(5.0, j));
  return out;
}

std::optional<double> loglog_slope(std::vector<double> const & x, std::vector<double> const & y)
{
  std::vector<double> lx;
  std::vector<double> ly;
  for (std::size_t i = 0; i < x.size() && i < y.size(); ++i)
    if (x[i] > 0.0 && y[i] > 0.0)
    {
      lx.push_back(std::log(x[i]));
      ly.push_back(std::log(y[i]));
    }
  if (lx.size() < 2)
    return std::nullopt;
  double const n = static_cast<double>(lx.size());
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i)
  {
    mx += lx[i];
    my += ly[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i)
  {
    sxy += (lx[i] - mx) * (ly[i] - my);
    sxx += (lx[i] - mx) * (lx[i] - mx);
  }
  if (sxx == 0.0)
    return std::nullopt;
  return sxy / sxx;
}

SweepResult epsilon_sweep(EnsembleCase const & reference,
                          EnsembleCase const & candidate,
                          std::vector<double> const & eps_list,
                          SweepOptions const & options)
{
  if (eps_list.empty())
    throw ConfigError("eps list is empty");
  for (std::size_t i = 1; i < eps_list.size(); ++i)
    if (!(eps_list[i] < eps_list[i - 1]))
      throw ConfigError("eps list must be strictly decreasing");

  SweepResult out;
  out.mode = options.mode;
  out.h = options.h ? *options.h : candidate.mesh->h_max();

  std::optional<ReferencePaths> cached;
  if (options.mode == StepMode::fixed_k)
    cached = run_reference(reference, options.ensemble);

  for (double eps : eps_list)
  {
    EnsembleCase cand = candidate;
    cand.config.epsilon = eps;
    if (options.mode == StepMode::recipe)
    {
      cand.config.set_time_grid(candidate.config.T, std::pow(eps, 1.0 + options.delta));
      EnsembleCase ref = reference;
      ref.config.set_time_grid(reference.config.T, cand.config.k);
      cached = run_reference(ref, options.ensemble);
    }
    if (cand.config.k_over_epsilon() >= 1.0)
    {
      std::ostringstream w;
      w << "k/eps = " << cand.config.k_over_epsilon() << " >= 1 at eps = " << eps
        << "; convergence needs k/eps -> 0";
      out.warnings.push_back(w.str());
    }
    SweepRow row;
    row.epsilon = eps;
    row.k = cand.config.k;
    row.k_over_eps = cand.config.k_over_epsilon();
    row.stats = compare_to_reference(*cached, cand);
    row.fitted_c = row.stats.max_step_mse * out.h / std::sqrt(eps);
    out.rows.push_back(std::move(row));
  }

  std::vector<double> eps;
  std::vector<double> mse;
  double c_min = 0.0;
  for (auto const & r : out.rows)
  {
    eps.push_back(r.epsilon);
    mse.push_back(r.stats.mean_sq_error);
    out.fitted_c = std::max(out.fitted_c, r.fitted_c);
    c_min = (&r == &out.rows.front()) ? r.fitted_c : std::min(c_min, r.fitted_c);
  }
  out.c_spread = c_min > 0.0 ? out.fitted_c / c_min : 0.0;
  out.slope = loglog_slope(eps, mse);
  out.mse_decreasing = true;
  out.variance_decreasing = true;
  for (std::size_t i = 1; i < out.rows.size(); ++i)
  {
    out.mse_decreasing = out.mse_decreasing && out.rows[i].stats.mean_sq_error < out.rows[i - 1].stats.mean_sq_error;
    out.variance_decreasing =
        out.variance_decreasing && out.rows[i].stats.error_variance < out.rows[i - 1].stats.error_variance;
  }
  return out;
}

double energy_bracket(Trajectory const & trajectory, Discretization const & disc)
{
  double max_v = trajectory.states.empty() ? 0.0
                                           : l2_norm_sq(disc.mass_v, trajectory.states.front().velocity.coefficients);
  double dissipation = 0.0;
  double increments = 0.0;
  double const k = trajectory.config.k;
  double const nu = trajectory.config.nu;
  for (auto const & r : trajectory.energy)
  {
    max_v = std::max(max_v, r.v_sq);
    dissipation += k * nu * r.grad_v_sq;
    increments += r.dv_sq;
  }
  return max_v + dissipation + increments;
}

AuditReport stability_audit(SchemeConfig const & config,
                            MeshForSize const & mesh_for_size,
                            std::vector<double> const & levels,
                            double delta,
                            EnsembleOptions const & options)
{
  if (levels.empty())
    throw ConfigError("stability audit needs at least one level");
  if (options.n_samples < 1)
    throw ConfigError("stability audit needs at least one sample");
  AuditReport report;
  for (double h : levels)
  {
    if (!(h > 0.0))
      throw ConfigError("audit levels must be positive mesh sizes");
    AuditLevel level;
    level.h = h;
    auto mesh = mesh_for_size(h);
    level.h_max = mesh->h_max();

    SchemeConfig cfg = config;
    cfg.epsilon = std::pow(h, 2.0 + delta);
    cfg.set_time_grid(config.T, std::pow(cfg.epsilon, 1.0 + delta));
    cfg.record_energy = true;
    cfg.snapshot_stride = 0;
    cfg.threads = 1;
    level.epsilon = cfg.epsilon;
    level.k = cfg.k;
    level.M = cfg.M;
    auto const disc = build_discretization(mesh, cfg);

    auto const n = static_cast<std::size_t>(options.n_samples);
    std::vector<std::optional<double>> brackets(n);
    parallel_for(n, options.threads, [&](std::size_t s) {
      try
      {
        auto traj = run_path(disc, cfg, options.base_seed, s);
        brackets[s] = energy_bracket(traj, *disc);
      }
      catch (StepError const &)
      {
      }
    });

    std::vector<double> values;
    for (auto const & b : brackets)
      if (b)
        values.push_back(*b);
    level.n_ok = static_cast<int>(values.size());
    level.n_failed = options.n_samples - level.n_ok;
    enforce_failure_policy(level.n_failed, options.n_samples, options.max_failure_fraction, "stability audit");
    double mean = 0.0;
    for (double v : values)
      mean += v;
    mean /= static_cast<double>(values.size());
    level.bracket = mean;
    level.bracket_ci = 1.96 * std::sqrt(sample_variance(values, mean) / static_cast<double>(values.size()));

    if (!report.levels.empty())
    {
      double const prev = report.levels.back().bracket;
      level.growth = prev > 0.0 ? level.bracket / prev : (level.bracket > 0.0 ? INFINITY : 1.0);
      if (level.growth > 2.0)
        report.blow_up = true;
    }
    report.levels.push_back(level);
  }
  return report;
}

} // namespace pspde
