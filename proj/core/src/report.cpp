#include "pspde/report.hpp"

#include "pspde/output.hpp"

#include <json.hpp>

#include <cmath>

namespace pspde
{

using nlohmann::json;

namespace
{

std::string fmt(double v)
{
  return format_double(v);
}

/// JSON has no inf/nan; encode them as strings.
json number(double v)
{
  if (std::isfinite(v))
    return v;
  return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
}

} // namespace

CsvTable ledger_table(Trajectory const & tr)
{
  CsvTable t({"m", "t", "v_sq", "grad_v_sq", "dv_sq", "eps_p_sq", "eps_dp_sq", "work_f", "work_noise",
              "convection_term", "lhs", "rhs", "energy_residual", "pressure_residual", "pressure_mean",
              "divergence_linf", "k_over_eps", "picard_iterations"});
  for (auto const & r : tr.energy)
    t.add_row({std::to_string(r.m), fmt(r.t), fmt(r.v_sq), fmt(r.grad_v_sq), fmt(r.dv_sq), fmt(r.eps_p_sq),
               fmt(r.eps_dp_sq), fmt(r.work_f), fmt(r.work_noise), fmt(r.convection_term), fmt(r.lhs), fmt(r.rhs),
               fmt(r.residual), fmt(r.pressure_residual), fmt(r.pressure_mean), fmt(r.divergence_linf),
               fmt(r.k_over_eps), std::to_string(r.picard_iterations)});
  return t;
}

CsvTable sweep_table(SweepResult const & sweep)
{
  CsvTable t({"eps", "mean_sq_error", "rms_error", "error_variance", "sq_error_variance", "ci_halfwidth",
              "max_step_mse", "k", "k_over_eps", "fitted_C", "n_ok", "n_failed"});
  for (auto const & r : sweep.rows)
    t.add_row({fmt(r.epsilon), fmt(r.stats.mean_sq_error), fmt(r.stats.rms_error), fmt(r.stats.error_variance),
               fmt(r.stats.sq_error_variance), fmt(r.stats.ci_halfwidth), fmt(r.stats.max_step_mse), fmt(r.k),
               fmt(r.k_over_eps), fmt(r.fitted_c), std::to_string(r.stats.errors.size()),
               std::to_string(r.stats.n_failed)});
  return t;
}

CsvTable audit_table(AuditReport const & audit)
{
  CsvTable t({"h", "h_max", "eps", "k", "M", "bracket", "bracket_ci", "growth", "n_ok", "n_failed"});
  for (auto const & l : audit.levels)
    t.add_row({fmt(l.h), fmt(l.h_max), fmt(l.epsilon), fmt(l.k), std::to_string(l.M), fmt(l.bracket),
               fmt(l.bracket_ci), fmt(l.growth), std::to_string(l.n_ok), std::to_string(l.n_failed)});
  return t;
}

std::string run_summary_json(Trajectory const & tr, double elapsed_seconds)
{
  double max_residual = 0.0;
  double max_div = 0.0;
  for (auto const & r : tr.energy)
  {
    max_residual = std::max(max_residual, r.residual);
    max_div = std::max(max_div, r.divergence_linf);
  }
  json j{{"schema_version", summary_schema_version},
         {"kind", "run"},
         {"scheme", to_string(tr.config.kind)},
         {"epsilon", tr.config.epsilon},
         {"k", tr.config.k},
         {"T", tr.config.T},
         {"M", tr.config.M},
         {"k_over_eps", tr.config.k_over_epsilon()},
         {"base_seed", tr.base_seed},
         {"sample_index", tr.sample_index},
         {"noise_hash", tr.noise_hash},
         {"max_energy_residual", number(max_residual)},
         {"max_divergence_linf", number(max_div)},
         {"final_v_sq", tr.energy.empty() ? 0.0 : tr.energy.back().v_sq},
         {"elapsed_seconds", elapsed_seconds}};
  return j.dump(2) + "\n";
}

std::string sweep_summary_json(SweepResult const & sweep)
{
  json rows = json::array();
  for (auto const & r : sweep.rows)
    rows.push_back({{"eps", r.epsilon},
                    {"mean_sq_error", number(r.stats.mean_sq_error)},
                    {"error_variance", number(r.stats.error_variance)},
                    {"max_step_mse", number(r.stats.max_step_mse)},
                    {"fitted_C", number(r.fitted_c)},
                    {"n_failed", r.stats.n_failed}});
  json j{{"schema_version", summary_schema_version},
         {"kind", "sweep"},
         {"step_mode", to_string(sweep.mode)},
         {"h", sweep.h},
         {"slope", sweep.slope ? json(number(*sweep.slope)) : json("not-applicable")},
         {"fitted_C", number(sweep.fitted_c)},
         {"C_spread", number(sweep.c_spread)},
         {"mse_decreasing", sweep.mse_decreasing},
         {"variance_decreasing", sweep.variance_decreasing},
         {"warnings", sweep.warnings},
         {"rows", rows}};
  return j.dump(2) + "\n";
}

std::string audit_summary_json(AuditReport const & audit)
{
  json levels = json::array();
  for (auto const & l : audit.levels)
    levels.push_back({{"h", l.h}, {"h_max", l.h_max}, {"eps", l.epsilon}, {"k", l.k}, {"M", l.M},
                      {"bracket", number(l.bracket)}, {"growth", number(l.growth)}, {"n_failed", l.n_failed}});
  json j{{"schema_version", summary_schema_version}, {"kind", "audit"}, {"blow_up", audit.blow_up}, {"levels", levels}};
  return j.dump(2) + "\n";
}

} // namespace pspde
