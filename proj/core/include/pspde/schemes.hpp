#pragma once

#include "pspde/assembly.hpp"
#include "pspde/noise.hpp"
#include "pspde/spaces.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace pspde
{

enum class SchemeKind
{
  penalty_nonlinear, // fully implicit convection, Picard iteration
  penalty_linear,    // convection linearized around V^{m-1}
  saddle,            // exact discrete divergence constraint, linearized convection
  stokes_penalty,    // penalty scheme without convection
  stokes_saddle,     // saddle scheme without convection
};

std::string to_string(SchemeKind kind);
SchemeKind scheme_kind_from_string(std::string const & name);

bool is_penalty(SchemeKind kind);
bool has_convection(SchemeKind kind);

enum class LinearMethod
{
  direct_lu,
  iterative,
};

struct PicardOptions
{
  int max_iters = 50;
  double tolerance = 1e-10;
};

struct LinearSolverOptions
{
  LinearMethod method = LinearMethod::direct_lu;
  double tolerance = 1e-9;
};

/// Everything a time loop needs. T = M k holds exactly after set_time_grid.
struct SchemeConfig
{
  double nu = 1.0;
  double epsilon = 1.0;
  double k = 0.01;
  double T = 1.0;
  int M = 100;
  SchemeKind kind = SchemeKind::penalty_linear;
  PicardOptions picard;
  LinearSolverOptions linear;

  int velocity_degree = 2;
  int pressure_degree = 1;

  TimeField forcing;                        // empty: f = 0
  std::shared_ptr<NoiseModel const> noise;  // null: no stochastic forcing
  BoundarySpec boundary = BoundarySpec::homogeneous();
  VectorField initial_velocity;             // empty: v0 = 0
  VectorField initial_pressure;             // component 0 is used; empty: p0 = 0

  /// Convection can be switched off for a penalty/saddle kind; the Stokes
  /// kinds never convect.
  bool convection = true;
  /// Keep every stride-th state in the trajectory (0: only first and last).
  int snapshot_stride = 0;
  /// Record an energy report per step.
  bool record_energy = true;
  /// Worker threads for element loops inside one step.
  int threads = 1;

  /// Chooses M = round(T / k) and then k = T / M.
  void set_time_grid(double final_time, double step);
  double k_over_epsilon() const { return k / epsilon; }
  bool convects() const { return convection && has_convection(kind); }

  /// Throws ConfigError on violated invariants (nu > 0, 0 < eps <= 1, ...).
  void validate() const;
};

/// Spaces, constant operators and constraint data shared by every path
/// of a configuration. Immutable once built.
struct Discretization
{
  std::shared_ptr<Mesh const> mesh;
  SpacePtr velocity;
  SpacePtr pressure;
  SparseMatrix mass_v;
  SparseMatrix stiffness_v;
  SparseMatrix mass_p;
  SparseMatrix div;      // B, n_p x n_v
  SparseMatrix grad;     // B^T, the discrete pressure gradient
  Vector pressure_ones;  // r_q = (chi_q, 1)
  double domain_area = 0.0;
  ConstraintSet constraints;
  std::vector<char> is_constrained; // per velocity dof
  std::shared_ptr<ConvectionAssembler const> convection;
  std::shared_ptr<NoiseLoadAssembler const> noise_load;
  std::shared_ptr<NoiseModel const> noise;
};

using DiscretizationPtr = std::shared_ptr<Discretization const>;

/// Builds spaces and operators. Saddle kinds require the Taylor-Hood pair
/// (P2 velocity, P1 pressure); anything else is rejected here because the
/// saddle system would be singular.
DiscretizationPtr build_discretization(std::shared_ptr<Mesh const> mesh, SchemeConfig const & config);

struct State
{
  int m = 0;
  double t = 0.0;
  FEFunction velocity;
  FEFunction pressure;
};

/// Per-step solver output retained for diagnostics and the energy ledger.
struct StepDiagnostics
{
  int picard_iterations = 0;
  double linear_residual = 0.0;     // relative residual of the last linear solve
  double nonlinear_residual = 0.0;  // Algorithm-1 weak-form residual, relative
  double pressure_residual = 0.0;   // penalty relation residual, relative
  double divergence_linf = 0.0;     // max |B V^m|
  Vector load_f;                    // (f^m, phi_i)
  Vector load_noise;                // (g(V^{m-1}) dW, phi_i)
  std::optional<FEFunction> wind;   // convection wind of the accepted solve
};

/// Initial state: L2 projections of the initial data, Dirichlet values
/// imposed, pressure shifted to zero mean.
State initial_state(Discretization const & disc, SchemeConfig const & config);

/// One time-stepping engine per (discretization, config). Holds the sparse
/// factorization, reused across steps whenever the system matrix is constant.
class Stepper
{
public:
  Stepper(DiscretizationPtr disc, SchemeConfig config);
  ~Stepper();
  Stepper(Stepper &&) noexcept;
  Stepper & operator=(Stepper &&) noexcept;

  /// Dispatches on config().kind.
  State step(State const & prev, WienerIncrement const & inc, StepDiagnostics * diag = nullptr);

  State step_penalty_linear(State const & prev, WienerIncrement const & inc, StepDiagnostics * diag = nullptr);
  State step_penalty_nonlinear(State const & prev, WienerIncrement const & inc, StepDiagnostics * diag = nullptr);
  State step_saddle(State const & prev, WienerIncrement const & inc, StepDiagnostics * diag = nullptr);
  State step_stokes_penalty(State const & prev, WienerIncrement const & inc, StepDiagnostics * diag = nullptr);
  State step_stokes_saddle(State const & prev, WienerIncrement const & inc, StepDiagnostics * diag = nullptr);

  SchemeConfig const & config() const { return config_; }
  Discretization const & discretization() const { return *disc_; }

  /// Loads of step m = prev.m + 1.
  Vector forcing_load(int m) const;
  Vector noise_load(WienerIncrement const & inc, FEFunction const & prev_velocity) const;

private:
  struct Impl;
  State penalty_step(State const & prev, WienerIncrement const & inc, bool convect, bool picard, StepDiagnostics * diag);
  State saddle_step(State const & prev, WienerIncrement const & inc, bool convect, StepDiagnostics * diag);

  DiscretizationPtr disc_;
  SchemeConfig config_;
  std::unique_ptr<Impl> impl_;
};

/// Quantities of the exact per-step energy balance obtained by testing a
/// penalty step with its own solution:
///   1/2 (|V^m|^2 - |V^{m-1}|^2 + |V^m - V^{m-1}|^2) + k nu |grad V^m|^2
///   + eps/2 (|P^m|^2 - |P^{m-1}|^2 + |P^m - P^{m-1}|^2) + k b(w, V^m, V^m)
///   = k (f^m, V^m) + (g dW, V^m).
struct EnergyReport
{
  int m = 0;
  double t = 0.0;
  double v_sq = 0.0;
  double grad_v_sq = 0.0;
  double dv_sq = 0.0;
  double eps_p_sq = 0.0;
  double eps_dp_sq = 0.0;
  double work_f = 0.0;
  double work_noise = 0.0;
  double convection_term = 0.0;
  double lhs = 0.0;
  double rhs = 0.0;
  double residual = 0.0;          // |lhs - rhs| relative to the largest term
  double pressure_residual = 0.0; // from StepDiagnostics
  double pressure_mean = 0.0;     // (P^m, 1)
  double divergence_linf = 0.0;
  double k_over_eps = 0.0;
  int picard_iterations = 0;
};

struct LedgerInputs
{
  double k = 0.0;
  double nu = 0.0;
  double epsilon = 0.0; // 0 for saddle schemes
  Vector const * load_f = nullptr;
  Vector const * load_noise = nullptr;
  FEFunction const * wind = nullptr; // null when convection is off
};

EnergyReport energy_ledger(Discretization const & disc, State const & prev, State const & next, LedgerInputs const & in);

struct Trajectory
{
  SchemeConfig config;
  std::uint64_t base_seed = 0;
  std::uint64_t sample_index = 0;
  std::vector<State> states;          // thinned by snapshot_stride, always first and last
  std::vector<EnergyReport> energy;   // one per step when recorded
  std::uint64_t noise_hash = 0;       // chained hash of every consumed increment
};

/// Called after every accepted step with (prev, next, diagnostics).
using StepObserver = std::function<void(State const &, State const &, StepDiagnostics const &)>;

/// Drives M steps; the increment of step m is drawn from stream
/// (base_seed, sample_index, m). A failing step raises StepError.
Trajectory run_path(DiscretizationPtr const & disc,
                    SchemeConfig const & config,
                    std::uint64_t base_seed,
                    std::uint64_t sample_index,
                    StepObserver const & observer = {});

/// Convenience overload that builds the discretization.
Trajectory run_path(std::shared_ptr<Mesh const> mesh,
                    SchemeConfig const & config,
                    std::uint64_t base_seed,
                    std::uint64_t sample_index);

/// Poincare constant surrogate 1 / sqrt(lambda_min) of the discrete
/// Dirichlet Laplacian on the scalar velocity space (inverse power iteration).
double poincare_constant(FunctionSpace const & scalar_or_vector_space);

/// Lemma-6 style monotonicity functional for z = u - w (both zero on the
/// boundary):
///   nu |grad z|^2 + b(u, u, z) - b(w, w, z) + 27 / (2 nu^3) |w|_{L4}^4 |z|^2 - L_g^2 |z|^2.
/// Throws ConfigError if L_g > sqrt(nu / (2 C_P^2)).
double monotonicity_check(FEFunction const & u,
                          FEFunction const & w,
                          double nu,
                          NoiseModel const & noise,
                          std::optional<double> poincare = std::nullopt);

/// Scale used to judge the sign of monotonicity_check: sum of the absolute
/// values of its terms.
double monotonicity_scale(FEFunction const & u, FEFunction const & w, double nu, NoiseModel const & noise);

/// Squared L2 and H1-seminorm helpers on coefficient vectors.
double l2_norm_sq(SparseMatrix const & mass, Vector const & x);

} // namespace pspde
