#pragma once

#include "pspde/ensemble.hpp"
#include "pspde/schemes.hpp"
#include "pspde/output.hpp"

#include <string>

namespace pspde
{

inline constexpr int summary_schema_version = 1;

/// Per-step ledger: m, t, energy terms, residuals, k/eps.
CsvTable ledger_table(Trajectory const & trajectory);

/// One row per eps: eps, mean_sq_error, rms_error, error_variance,
/// sq_error_variance, ci_halfwidth, max_step_mse, k, k_over_eps, fitted_C,
/// n_ok, n_failed.
CsvTable sweep_table(SweepResult const & sweep);

CsvTable audit_table(AuditReport const & audit);

std::string run_summary_json(Trajectory const & trajectory, double elapsed_seconds);
std::string sweep_summary_json(SweepResult const & sweep);
std::string audit_summary_json(AuditReport const & audit);

} // namespace pspde
