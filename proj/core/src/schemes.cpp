#include "pspde/schemes.hpp"

#include "pspde/error.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseLU>
#ifdef PSPDE_HAVE_UMFPACK
#include <Eigen/UmfPackSupport>
#endif

#include <algorithm>
#include <cmath>
#include <string>

namespace pspde
{

using ColMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor>;

std::string to_string(SchemeKind kind)
{
  switch (kind)
  {
  case SchemeKind::penalty_nonlinear:
    return "penalty-nonlinear";
  case SchemeKind::penalty_linear:
    return "penalty-linear";
  case SchemeKind::saddle:
    return "saddle";
  case SchemeKind::stokes_penalty:
    return "stokes-penalty";
  case SchemeKind::stokes_saddle:
    return "stokes-saddle";
  }
  return "unknown";
}

SchemeKind scheme_kind_from_string(std::string const & name)
{
  for (auto kind : {SchemeKind::penalty_nonlinear, SchemeKind::penalty_linear, SchemeKind::saddle,
                    SchemeKind::stokes_penalty, SchemeKind::stokes_saddle})
    if (to_string(kind) == name)
      return kind;
  throw ConfigError("unknown scheme kind \"" + name + "\"");
}

bool is_penalty(SchemeKind kind)
{
  return kind == SchemeKind::penalty_nonlinear || kind == SchemeKind::penalty_linear ||
         kind == SchemeKind::stokes_penalty;
}

bool has_convection(SchemeKind kind)
{
  return kind == SchemeKind::penalty_nonlinear || kind == SchemeKind::penalty_linear ||
         kind == SchemeKind::saddle;
}

void SchemeConfig::set_time_grid(double final_time, double step)
{
  if (!(final_time > 0.0) || !(step > 0.0))
    throw ConfigError("final time T and step k must be positive");
  M = std::max(1, static_cast<int>(std::lround(final_time / step)));
  T = final_time;
  k = final_time / M;
}

void SchemeConfig::validate() const
{
  if (!(nu > 0.0))
    throw ConfigError("viscosity nu must be positive");
  if (!(k > 0.0) || !(T > 0.0) || M < 1)
    throw ConfigError("time grid needs k > 0, T > 0 and M >= 1");
  if (std::abs(M * k - T) > 1e-12 * T)
    throw ConfigError("time grid must satisfy T = M k");
  if (is_penalty(kind) && !(epsilon > 0.0 && epsilon <= 1.0))
    throw ConfigError("penalty scale must satisfy 0 < epsilon <= 1 (ε ≤ 1), got " + std::to_string(epsilon));
  if (picard.max_iters < 1 || !(picard.tolerance > 0.0))
    throw ConfigError("picard needs max_iters >= 1 and a positive tolerance");
  if (!(linear.tolerance > 0.0))
    throw ConfigError("linear solver tolerance must be positive");
  if (snapshot_stride < 0)
    throw ConfigError("snapshot stride must be >= 0");
  if ((velocity_degree != 1 && velocity_degree != 2) || (pressure_degree != 1 && pressure_degree != 2))
    throw ConfigError("finite element degrees must be 1 or 2");
  if (!is_penalty(kind) && !(velocity_degree == 2 && pressure_degree == 1))
    throw ConfigError("saddle-point schemes need the inf-sup stable P2/P1 pair; P" +
                      std::to_string(velocity_degree) + "/P" + std::to_string(pressure_degree) +
                      " gives a singular system");
}

DiscretizationPtr build_discretization(std::shared_ptr<Mesh const> mesh, SchemeConfig const & config)
{
  config.validate();
  auto disc = std::make_shared<Discretization>();
  disc->mesh = mesh;
  disc->velocity = build_space(mesh, config.velocity_degree, 2);
  disc->pressure = build_space(mesh, config.pressure_degree, 1);
  disc->mass_v = mass_matrix(*disc->velocity);
  disc->stiffness_v = stiffness_matrix(*disc->velocity);
  disc->mass_p = mass_matrix(*disc->pressure);
  disc->div = divergence_matrix(*disc->velocity, *disc->pressure);
  disc->grad = SparseMatrix(disc->div.transpose());
  disc->pressure_ones = basis_integrals(*disc->pressure);
  disc->domain_area = mesh->total_area();
  disc->constraints = dirichlet_constraints(*disc->velocity, config.boundary);
  disc->is_constrained.assign(disc->velocity->n_dofs(), 0);
  for (auto d : disc->constraints.dofs)
    disc->is_constrained[d] = 1;
  disc->convection = std::make_shared<ConvectionAssembler const>(disc->velocity, config.threads);
  if (config.noise)
  {
    disc->noise = config.noise;
    disc->noise_load = std::make_shared<NoiseLoadAssembler const>(config.noise, disc->velocity);
  }
  return disc;
}

State initial_state(Discretization const & disc, SchemeConfig const & config)
{
  State s;
  s.m = 0;
  s.t = 0.0;
  s.velocity = config.initial_velocity ? l2_project(disc.velocity, config.initial_velocity)
                                       : FEFunction(disc.velocity);
  for (std::size_t i = 0; i < disc.constraints.size(); ++i)
    s.velocity.coefficients[disc.constraints.dofs[i]] = disc.constraints.values[i];
  s.pressure = config.initial_pressure ? l2_project(disc.pressure, config.initial_pressure)
                                       : FEFunction(disc.pressure);
  double const mean = disc.pressure_ones.dot(s.pressure.coefficients) / disc.domain_area;
  s.pressure.coefficients.array() -= mean;
  return s;
}

namespace
{

/// Factorization wrapper; the symbolic analysis is done once per pattern.
class LinearSolver
{
public:
  explicit LinearSolver(LinearSolverOptions options)
    : options_(options)
  {
  }

  void factorize(ColMatrix const & K)
  {
    if (options_.method == LinearMethod::direct_lu)
    {
      if (!analyzed_)
      {
        lu_.analyzePattern(K);
        analyzed_ = true;
      }
      lu_.factorize(K);
      if (lu_.info() != Eigen::Success)
        throw SolverError("sparse LU factorization failed");
    }
    else
    {
      iterative_.setTolerance(0.1 * options_.tolerance);
      iterative_.setMaxIterations(10000);
      iterative_.preconditioner().setDroptol(1e-6);
      iterative_.compute(K);
      if (iterative_.info() != Eigen::Success)
        throw SolverError("ILUT preconditioner setup failed");
    }
  }

  Vector solve(Vector const & rhs, int * iterations)
  {
    if (options_.method == LinearMethod::direct_lu)
    {
      *iterations = 1;
      return lu_.solve(rhs);
    }
    Vector x = iterative_.solve(rhs);
    *iterations = static_cast<int>(iterative_.iterations());
    if (iterative_.info() != Eigen::Success)
      throw SolverError("BiCGSTAB did not converge", *iterations, iterative_.error());
    return x;
  }

private:
  LinearSolverOptions options_;
  bool analyzed_ = false;
#ifdef PSPDE_HAVE_UMFPACK
  Eigen::UmfPackLU<ColMatrix> lu_;
#else
  Eigen::SparseLU<ColMatrix, Eigen::COLAMDOrdering<int>> lu_;
#endif
  Eigen::BiCGSTAB<ColMatrix, Eigen::IncompleteLUT<double>> iterative_;
};

/// Assembled block system with Dirichlet rows eliminated: constrained rows
/// become identity rows and their columns move to the right-hand side.
struct BlockSystem
{
  ColMatrix K;
  Vector shift; // right-hand side correction from eliminated columns
};

BlockSystem build_block_system(Discretization const & d,
                               SparseMatrix const & velocity_block,
                               SchemeConfig const & cfg,
                               bool saddle)
{
  Index const nv = d.velocity->n_dofs();
  Index const np = d.pressure->n_dofs();
  Index const n = nv + np + (saddle ? 1 : 0);
  double const k = cfg.k;

  std::vector<double> g(nv, 0.0);
  for (std::size_t i = 0; i < d.constraints.size(); ++i)
    g[d.constraints.dofs[i]] = d.constraints.values[i];
  auto const & fixed = d.is_constrained;

  BlockSystem sys;
  sys.shift = Vector::Zero(n);
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(velocity_block.nonZeros() + 2 * d.div.nonZeros() + d.mass_p.nonZeros() +
                                        nv + 2 * np));

  for (Index r = 0; r < nv; ++r)
  {
    if (fixed[r])
    {
      trip.emplace_back(r, r, 1.0);
      continue;
    }
    for (SparseMatrix::InnerIterator it(velocity_block, r); it; ++it)
    {
      auto const c = static_cast<Index>(it.col());
      if (fixed[c])
        sys.shift[r] -= it.value() * g[c];
      else
        trip.emplace_back(r, c, it.value());
    }
    // pressure gradient -k B^T
    for (SparseMatrix::InnerIterator it(d.grad, r); it; ++it)
      trip.emplace_back(r, nv + static_cast<Index>(it.col()), -k * it.value());
  }

  double const div_scale = saddle ? 1.0 : k;
  for (Index q = 0; q < np; ++q)
  {
    for (SparseMatrix::InnerIterator it(d.div, q); it; ++it)
    {
      auto const c = static_cast<Index>(it.col());
      double const v = div_scale * it.value();
      if (fixed[c])
        sys.shift[nv + q] -= v * g[c];
      else
        trip.emplace_back(nv + q, c, v);
    }
    if (saddle)
    {
      trip.emplace_back(nv + q, n - 1, d.pressure_ones[q]);
      trip.emplace_back(n - 1, nv + q, d.pressure_ones[q]);
    }
    else
    {
      for (SparseMatrix::InnerIterator it(d.mass_p, q); it; ++it)
        trip.emplace_back(nv + q, nv + static_cast<Index>(it.col()), cfg.epsilon * it.value());
    }
  }

  sys.K.resize(n, n);
  sys.K.setFromTriplets(trip.begin(), trip.end());
  return sys;
}

double relative(double num, double den)
{
  if (num == 0.0)
    return 0.0;
  return den > 0.0 ? num / den : num;
}

} // namespace

struct Stepper::Impl
{
  explicit Impl(LinearSolverOptions opts)
    : penalty_convect(opts)
    , saddle_convect(opts)
    , penalty_fixed(opts)
    , saddle_fixed(opts)
  {
  }

  SparseMatrix velocity_base; // M + k nu A

  LinearSolver penalty_convect;
  LinearSolver saddle_convect;

  // Systems without convection are constant in time: factor once.
  LinearSolver penalty_fixed;
  LinearSolver saddle_fixed;
  std::optional<BlockSystem> penalty_fixed_system;
  std::optional<BlockSystem> saddle_fixed_system;
};

Stepper::Stepper(DiscretizationPtr disc, SchemeConfig config)
  : disc_(std::move(disc))
  , config_(std::move(config))
  , impl_(std::make_unique<Impl>(config_.linear))
{
  config_.validate();
  impl_->velocity_base = disc_->mass_v + (config_.k * config_.nu) * disc_->stiffness_v;
}

Stepper::~Stepper() = default;
Stepper::Stepper(Stepper &&) noexcept = default;
Stepper & Stepper::operator=(Stepper &&) noexcept = default;

Vector Stepper::forcing_load(int m) const
{
  if (!config_.forcing)
    return Vector::Zero(disc_->velocity->n_dofs());
  return load_vector(*disc_->velocity, config_.forcing, (m - 1) * config_.k, m * config_.k);
}

Vector Stepper::noise_load(WienerIncrement const & inc, FEFunction const & prev_velocity) const
{
  if (!disc_->noise_load || inc.J == 0)
    return Vector::Zero(disc_->velocity->n_dofs());
  return disc_->noise_load->assemble(inc, prev_velocity);
}

State Stepper::step(State const & prev, WienerIncrement const & inc, StepDiagnostics * diag)
{
  switch (config_.kind)
  {
  case SchemeKind::penalty_nonlinear:
    return step_penalty_nonlinear(prev, inc, diag);
  case SchemeKind::penalty_linear:
    return step_penalty_linear(prev, inc, diag);
  case SchemeKind::saddle:
    return step_saddle(prev, inc, diag);
  case SchemeKind::stokes_penalty:
    return step_stokes_penalty(prev, inc, diag);
  case SchemeKind::stokes_saddle:
    return step_stokes_saddle(prev, inc, diag);
  }
  throw ConfigError("unknown scheme kind");
}

State Stepper::step_penalty_linear(State const & prev, WienerIncrement const & inc, StepDiagnostics * diag)
{
  return penalty_step(prev, inc, config_.convection, false, diag);
}

State Stepper::step_penalty_nonlinear(State const & prev, WienerIncrement const & inc, StepDiagnostics * diag)
{
  return penalty_step(prev, inc, config_.convection, true, diag);
}

State Stepper::step_stokes_penalty(State const & prev, WienerIncrement const & inc, StepDiagnostics * diag)
{
  return penalty_step(prev, inc, false, false, diag);
}

State Stepper::step_saddle(State const & prev, WienerIncrement const & inc, StepDiagnostics * diag)
{
  return saddle_step(prev, inc, config_.convection, diag);
}

State Stepper::step_stokes_saddle(State const & prev, WienerIncrement const & inc, StepDiagnostics * diag)
{
  return saddle_step(prev, inc, false, diag);
}

State Stepper::penalty_step(State const & prev,
                            WienerIncrement const & inc,
                            bool convect,
                            bool picard,
                            StepDiagnostics * diag)
{
  auto const & d = *disc_;
  auto const & cfg = config_;
  Index const nv = d.velocity->n_dofs();
  Index const np = d.pressure->n_dofs();
  int const m = prev.m + 1;

  Vector const load_f = forcing_load(m);
  Vector const load_g = noise_load(inc, prev.velocity);

  Vector rhs(nv + np);
  rhs.head(nv) = d.mass_v * prev.velocity.coefficients + cfg.k * load_f + load_g;
  rhs.tail(np) = cfg.epsilon * (d.mass_p * prev.pressure.coefficients);

  // Solves the linearized block system for a given wind (or none).
  auto solve_with = [&](FEFunction const * wind, Vector & x) {
    BlockSystem const * sys = nullptr;
    BlockSystem local;
    LinearSolver * solver = nullptr;
    if (wind)
    {
      SparseMatrix const A = impl_->velocity_base + cfg.k * d.convection->assemble(*wind);
      local = build_block_system(d, A, cfg, false);
      impl_->penalty_convect.factorize(local.K);
      sys = &local;
      solver = &impl_->penalty_convect;
    }
    else
    {
      if (!impl_->penalty_fixed_system)
      {
        impl_->penalty_fixed_system = build_block_system(d, impl_->velocity_base, cfg, false);
        impl_->penalty_fixed.factorize(impl_->penalty_fixed_system->K);
      }
      sys = &*impl_->penalty_fixed_system;
      solver = &impl_->penalty_fixed;
    }
    Vector b = rhs + sys->shift;
    for (std::size_t i = 0; i < d.constraints.size(); ++i)
      b[d.constraints.dofs[i]] = d.constraints.values[i];
    int iterations = 0;
    x = solver->solve(b, &iterations);
    double const res = relative((sys->K * x - b).norm(), b.norm());
    if (!(res <= cfg.linear.tolerance))
      throw SolverError("linear solve residual " + std::to_string(res) + " exceeds tolerance", iterations, res);
    return res;
  };

  Vector x;
  double linear_res = 0.0;
  int iterations = 0;
  FEFunction wind = prev.velocity;
  double nonlinear_res = 0.0;

  if (!convect)
  {
    linear_res = solve_with(nullptr, x);
    iterations = 1;
  }
  else if (!picard || cfg.picard.max_iters == 1)
  {
    // Linearized convection; a single Picard sweep is the same system.
    linear_res = solve_with(&wind, x);
    iterations = 1;
  }
  else
  {
    bool converged = false;
    double change = 0.0;
    for (int s = 1; s <= cfg.picard.max_iters; ++s)
    {
      linear_res = solve_with(&wind, x);
      iterations = s;
      Vector const diff = x.head(nv) - wind.coefficients;
      change = std::sqrt(std::max(0.0, diff.dot(d.mass_v * diff)));
      double const size = std::sqrt(std::max(0.0, x.head(nv).dot(d.mass_v * x.head(nv))));
      wind.coefficients = x.head(nv);
      if (change <= cfg.picard.tolerance * (1.0 + size))
      {
        converged = true;
        break;
      }
    }
    if (!converged)
      throw SolverError("Picard iteration did not converge in " + std::to_string(cfg.picard.max_iters) +
                            " iterations (last change " + std::to_string(change) + ")",
                        cfg.picard.max_iters, change);

    // residual of the fully nonlinear weak form at the accepted iterate
    Vector const V = x.head(nv);
    Vector const P = x.tail(np);
    FEFunction const vf(d.velocity, V);
    Vector r = (impl_->velocity_base + cfg.k * d.convection->assemble(vf)) * V - cfg.k * (d.grad * P) -
               rhs.head(nv);
    for (auto c : d.constraints.dofs)
      r[c] = 0.0;
    Vector rhs_free = rhs.head(nv);
    for (auto c : d.constraints.dofs)
      rhs_free[c] = 0.0;
    nonlinear_res = relative(r.norm(), std::max(rhs_free.norm(), (d.mass_v * V).norm()));
    if (nonlinear_res > 10.0 * cfg.linear.tolerance)
      throw SolverError("nonlinear residual " + std::to_string(nonlinear_res) + " exceeds 10x linear tolerance",
                        iterations, nonlinear_res);
  }

  State next;
  next.m = m;
  next.t = m * cfg.k;
  next.velocity = FEFunction(d.velocity, x.head(nv));
  next.pressure = FEFunction(d.pressure, x.tail(np));

  if (diag)
  {
    Vector const dp_term = cfg.epsilon * (d.mass_p * (next.pressure.coefficients - prev.pressure.coefficients));
    Vector const bv = d.div * next.velocity.coefficients;
    Vector const kbv = cfg.k * bv;
    diag->picard_iterations = iterations;
    diag->linear_residual = linear_res;
    diag->nonlinear_residual = nonlinear_res;
    diag->pressure_residual = relative((dp_term + kbv).lpNorm<Eigen::Infinity>(),
                                       std::max(dp_term.lpNorm<Eigen::Infinity>(), kbv.lpNorm<Eigen::Infinity>()));
    diag->divergence_linf = bv.lpNorm<Eigen::Infinity>();
    diag->load_f = load_f;
    diag->load_noise = load_g;
    if (convect)
      diag->wind = picard && cfg.picard.max_iters > 1 ? next.velocity : prev.velocity;
    else
      diag->wind.reset();
  }
  return next;
}

State Stepper::saddle_step(State const & prev, WienerIncrement const & inc, bool convect, StepDiagnostics * diag)
{
  auto const & d = *disc_;
  auto const & cfg = config_;
  Index const nv = d.velocity->n_dofs();
  Index const np = d.pressure->n_dofs();
  int const m = prev.m + 1;

  Vector const load_f = forcing_load(m);
  Vector const load_g = noise_load(inc, prev.velocity);

  Vector rhs = Vector::Zero(nv + np + 1);
  rhs.head(nv) = d.mass_v * prev.velocity.coefficients + cfg.k * load_f + load_g;

  BlockSystem const * sys = nullptr;
  BlockSystem local;
  LinearSolver * solver = nullptr;
  if (convect)
  {
    SparseMatrix const A = impl_->velocity_base + cfg.k * d.convection->assemble(prev.velocity);
    local = build_block_system(d, A, cfg, true);
    impl_->saddle_convect.factorize(local.K);
    sys = &local;
    solver = &impl_->saddle_convect;
  }
  else
  {
    if (!impl_->saddle_fixed_system)
    {
      impl_->saddle_fixed_system = build_block_system(d, impl_->velocity_base, cfg, true);
      impl_->saddle_fixed.factorize(impl_->saddle_fixed_system->K);
    }
    sys = &*impl_->saddle_fixed_system;
    solver = &impl_->saddle_fixed;
  }

  Vector b = rhs + sys->shift;
  for (std::size_t i = 0; i < d.constraints.size(); ++i)
    b[d.constraints.dofs[i]] = d.constraints.values[i];
  int iterations = 0;
  Vector const x = solver->solve(b, &iterations);
  double const res = relative((sys->K * x - b).norm(), b.norm());
  if (!(res <= cfg.linear.tolerance))
    throw SolverError("saddle solve residual " + std::to_string(res) + " exceeds tolerance", iterations, res);

  State next;
  next.m = m;
  next.t = m * cfg.k;
  next.velocity = FEFunction(d.velocity, x.head(nv));
  next.pressure = FEFunction(d.pressure, x.segment(nv, np));

  if (diag)
  {
    diag->picard_iterations = 1;
    diag->linear_residual = res;
    diag->nonlinear_residual = 0.0;
    diag->pressure_residual = 0.0;
    diag->divergence_linf = (d.div * next.velocity.coefficients).lpNorm<Eigen::Infinity>();
    diag->load_f = load_f;
    diag->load_noise = load_g;
    if (convect)
      diag->wind = prev.velocity;
    else
      diag->wind.reset();
  }
  return next;
}

Trajectory run_path(DiscretizationPtr const & disc,
                    SchemeConfig const & config,
                    std::uint64_t base_seed,
                    std::uint64_t sample_index,
                    StepObserver const & observer)
{
  Stepper stepper(disc, config);
  Trajectory traj;
  traj.config = config;
  traj.base_seed = base_seed;
  traj.sample_index = sample_index;
  traj.noise_hash = 1469598103934665603ULL;

  State state = initial_state(*disc, config);
  traj.states.push_back(state);
  bool const penalty = is_penalty(config.kind);

  for (int m = 1; m <= config.M; ++m)
  {
    WienerIncrement const inc =
        config.noise ? sample_increment(*config.noise, {base_seed, sample_index}, static_cast<std::uint64_t>(m), config.k)
                     : WienerIncrement{0, config.k, sample_index, static_cast<std::uint64_t>(m), {}};
    traj.noise_hash = increment_hash(inc, traj.noise_hash);

    StepDiagnostics diag;
    State next;
    try
    {
      next = stepper.step(state, inc, &diag);
    }
    catch (SolverError const & e)
    {
      throw StepError("step " + std::to_string(m) + ": " + e.what(), m, e.iterations(), e.residual());
    }

    if (config.record_energy)
    {
      LedgerInputs in;
      in.k = config.k;
      in.nu = config.nu;
      in.epsilon = penalty ? config.epsilon : 0.0;
      in.load_f = &diag.load_f;
      in.load_noise = &diag.load_noise;
      in.wind = diag.wind ? &*diag.wind : nullptr;
      auto report = energy_ledger(*disc, state, next, in);
      report.pressure_residual = diag.pressure_residual;
      report.divergence_linf = diag.divergence_linf;
      report.k_over_eps = penalty ? config.k_over_epsilon() : 0.0;
      report.picard_iterations = diag.picard_iterations;
      traj.energy.push_back(report);
    }
    if (observer)
      observer(state, next, diag);

    bool const keep = m == config.M || (config.snapshot_stride > 0 && m % config.snapshot_stride == 0);
    state = std::move(next);
    if (keep)
      traj.states.push_back(state);
  }
  return traj;
}

Trajectory run_path(std::shared_ptr<Mesh const> mesh,
                    SchemeConfig const & config,
                    std::uint64_t base_seed,
                    std::uint64_t sample_index)
{
  return run_path(build_discretization(std::move(mesh), config), config, base_seed, sample_index);
}

} // namespace pspde
