#pragma once

#include "pspde/schemes.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace pspde
{

/// A mesh plus the scheme to run on it.
struct EnsembleCase
{
  std::shared_ptr<Mesh const> mesh;
  SchemeConfig config;
};

struct EnsembleOptions
{
  int n_samples = 100;
  std::uint64_t base_seed = 0;
  int threads = 1; // samples in flight
  /// Abort when more than this fraction of samples fail.
  double max_failure_fraction = 0.01;
};

struct SampleFailure
{
  std::uint64_t sample = 0;
  int step = 0;
  std::string message;
};

/// Statistics of the terminal errors e_s = |V_ref^M - V_eps^M|_{L2} over
/// the successful samples, reduced in sample-index order.
struct EnsembleStats
{
  int n_samples = 0;
  int n_failed = 0;
  std::vector<SampleFailure> failures;
  std::vector<std::uint64_t> samples; // successful sample indices
  std::vector<double> errors;         // e_s, same order

  double mean_error = 0.0;
  double mean_sq_error = 0.0;     // E e^2
  double rms_error = 0.0;         // sqrt(E e^2)
  double error_variance = 0.0;    // sample variance of e_s
  double sq_error_variance = 0.0; // sample variance of e_s^2
  double ci_halfwidth = 0.0;      // 95% normal half-width for E e^2
  std::vector<double> step_mse;   // E e_m^2 for m = 1..M
  double max_step_mse = 0.0;      // max over m of step_mse
};

/// Per-sample velocity coefficients of a reference scheme at every step.
struct ReferencePaths
{
  EnsembleCase reference;
  EnsembleOptions options;
  std::vector<std::optional<std::vector<Vector>>> velocity; // [sample][m - 1]
  std::vector<std::uint64_t> noise_hash;
  std::vector<SampleFailure> failures;
};

ReferencePaths run_reference(EnsembleCase const & reference, EnsembleOptions const & options);

/// Runs the second scheme on the same noise paths as the stored reference.
/// Throws ConfigError when the pair does not share mesh, time grid, spaces
/// or noise model, and SolverError when too many samples fail.
EnsembleStats compare_to_reference(ReferencePaths const & reference, EnsembleCase const & candidate);

EnsembleStats run_ensemble(EnsembleCase const & reference,
                           EnsembleCase const & candidate,
                           EnsembleOptions const & options);

enum class StepMode
{
  fixed_k, // k from the template
  recipe,  // k = eps^{1 + delta} for every eps
};

std::string to_string(StepMode mode);
StepMode step_mode_from_string(std::string const & name);

struct SweepOptions
{
  EnsembleOptions ensemble;
  StepMode mode = StepMode::fixed_k;
  double delta = 0.1;
  /// Mesh size in C~ = max_m E e_m^2 h / sqrt(eps); defaults to the mesh h_max.
  std::optional<double> h;
};

struct SweepRow
{
  double epsilon = 0.0;
  double k = 0.0;
  double k_over_eps = 0.0;
  double fitted_c = 0.0; // max_m E e_m^2 * h / sqrt(eps)
  EnsembleStats stats;
};

struct SweepResult
{
  StepMode mode = StepMode::fixed_k;
  double h = 0.0;
  std::vector<SweepRow> rows;
  std::optional<double> slope;   // least-squares slope of log E e^2 vs log eps
  double fitted_c = 0.0;         // max row constant
  double c_spread = 0.0;         // max / min of the row constants
  bool mse_decreasing = false;      // terminal E e^2, strictly, as eps decreases
  bool variance_decreasing = false; // Var e, strictly
  std::vector<std::string> warnings;
};

/// eps_list must be strictly decreasing. The template candidate's epsilon
/// is replaced by each entry; every eps reuses the same sample indices.
SweepResult epsilon_sweep(EnsembleCase const & reference,
                          EnsembleCase const & candidate,
                          std::vector<double> const & eps_list,
                          SweepOptions const & options);

/// Figure-style preset eps, eps/5, ..., eps/5^(count-1).
std::vector<double> fifth_presets(double eps, int count);

/// Least-squares slope of log y against log x.
std::optional<double> loglog_slope(std::vector<double> const & x, std::vector<double> const & y);

struct AuditLevel
{
  double h = 0.0;      // requested size
  double h_max = 0.0;  // of the generated mesh
  double epsilon = 0.0;
  double k = 0.0;
  int M = 0;
  int n_ok = 0;
  int n_failed = 0;
  double bracket = 0.0;           // E[max |V^m|^2 + k nu sum |grad V^m|^2 + sum |V^m - V^{m-1}|^2]
  double bracket_ci = 0.0;        // 95% half-width
  double growth = 0.0;            // bracket / previous bracket (0 on the first level)
};

struct AuditReport
{
  std::vector<AuditLevel> levels;
  bool blow_up = false; // some growth > 2
};

using MeshForSize = std::function<std::shared_ptr<Mesh const>(double h)>;

/// Runs the penalty template at each h with eps = h^{2 + delta},
/// k = eps^{1 + delta} and averages the energy bracket over samples.
AuditReport stability_audit(SchemeConfig const & config,
                            MeshForSize const & mesh_for_size,
                            std::vector<double> const & levels,
                            double delta,
                            EnsembleOptions const & options);

/// Energy bracket of one trajectory from its recorded energy reports.
double energy_bracket(Trajectory const & trajectory, Discretization const & disc);

/// Workers from an explicit request, else PENALTY_SPDE_THREADS, else 1.
int resolve_threads(std::optional<int> requested);

} // namespace pspde
