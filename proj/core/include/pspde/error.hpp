#pragma once

#include <stdexcept>
#include <string>

namespace pspde
{

/// Invalid user input: bad parameters, unknown keys, inconsistent setups.
class ConfigError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file.
class ParseError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// Degenerate or inconsistent geometry.
class GeometryError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// A linear or nonlinear solve did not reach its tolerance.
class SolverError : public std::runtime_error
{
public:
  SolverError(std::string const & what, int iterations = 0, double residual = 0.0)
    : std::runtime_error(what)
    , iterations_(iterations)
    , residual_(residual)
  {
  }

  int iterations() const noexcept { return iterations_; }
  double residual() const noexcept { return residual_; }

private:
  int iterations_;
  double residual_;
};

/// A solver failure raised while driving a time loop; carries the step index.
class StepError : public SolverError
{
public:
  StepError(std::string const & what, int step, int iterations, double residual)
    : SolverError(what, iterations, residual)
    , step_(step)
  {
  }

  int step() const noexcept { return step_; }

private:
  int step_;
};

} // namespace pspde
