#include "helpers.hpp"

#include "pspde/error.hpp"
#include "pspde/schemes.hpp"

#include <doctest.h>

#include <cmath>
#include <cstring>
#include <limits>
#include <numbers>

using namespace pspde;
using testing::unit_square;

namespace
{

std::shared_ptr<NoiseModel const> additive_noise(double amplitude = 1.0)
{
  return std::make_shared<NoiseModel const>(
    make_noise_model(5, LambdaKind::inverse_square_sum, 5.0, GammaKind::additive, amplitude));
}

SchemeConfig base_config(SchemeKind kind, double eps, double k, double T)
{
  SchemeConfig c;
  c.kind = kind;
  c.nu = 1.0;
  c.epsilon = eps;
  c.set_time_grid(T, k);
  return c;
}

TimeField smooth_forcing()
{
  return [](double t, Point const & p) {
    return Vec2{(1.0 + t) * std::sin(std::numbers::pi * p.y), t * std::cos(std::numbers::pi * p.x) * p.y};
  };
}

bool same_bits(Vector const & a, Vector const & b)
{
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), sizeof(double) * a.size()) == 0;
}

bool same_trajectory(Trajectory const & a, Trajectory const & b)
{
  if (a.states.size() != b.states.size())
    return false;
  for (std::size_t i = 0; i < a.states.size(); ++i)
    if (!same_bits(a.states[i].velocity.coefficients, b.states[i].velocity.coefficients) ||
        !same_bits(a.states[i].pressure.coefficients, b.states[i].pressure.coefficients))
      return false;
  return a.noise_hash == b.noise_hash;
}

double l2_dist_sq(Discretization const & d, Vector const & a, Vector const & b)
{
  Vector const diff = a - b;
  return diff.dot(d.mass_v * diff);
}

} // namespace

TEST_CASE("time grid and validation")
{
  SchemeConfig c;
  c.set_time_grid(1.0, 0.3);
  CHECK(c.M == 3);
  CHECK(c.k == doctest::Approx(1.0 / 3.0));
  c.set_time_grid(0.05, 1e-3);
  CHECK(c.M == 50);
  CHECK(c.M * c.k == doctest::Approx(0.05).epsilon(1e-15));
  CHECK_THROWS_AS(c.set_time_grid(-1.0, 0.1), ConfigError);

  c.epsilon = 2.0;
  CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("ε ≤ 1"), ConfigError);
  c.epsilon = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.epsilon = 1.0;
  c.nu = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.nu = 1.0;
  c.picard.max_iters = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);

  for (auto k : {SchemeKind::penalty_nonlinear, SchemeKind::penalty_linear, SchemeKind::saddle,
                 SchemeKind::stokes_penalty, SchemeKind::stokes_saddle})
    CHECK(scheme_kind_from_string(to_string(k)) == k);
  CHECK_THROWS_AS(scheme_kind_from_string("upwind"), ConfigError);
}

TEST_CASE("saddle schemes reject P1/P1")
{
  auto mesh = unit_square(3);
  auto c = base_config(SchemeKind::saddle, 0.1, 0.1, 0.2);
  c.velocity_degree = 1;
  CHECK_THROWS_AS(build_discretization(mesh, c), ConfigError);
  c.kind = SchemeKind::penalty_linear;
  CHECK_NOTHROW(build_discretization(mesh, c));
}

TEST_CASE("zero data stays at rest")
{
  auto mesh = unit_square(3);
  for (auto kind : {SchemeKind::penalty_nonlinear, SchemeKind::penalty_linear, SchemeKind::saddle,
                    SchemeKind::stokes_penalty, SchemeKind::stokes_saddle})
  {
    auto c = base_config(kind, 0.1, 0.05, 0.2);
    auto traj = run_path(mesh, c, 1, 0);
    REQUIRE(traj.states.size() == 2);
    CHECK(traj.states.back().m == c.M);
    CHECK(traj.states.back().velocity.coefficients.lpNorm<Eigen::Infinity>() == 0.0);
    CHECK(traj.states.back().pressure.coefficients.lpNorm<Eigen::Infinity>() == 0.0);
    for (auto const & e : traj.energy)
      CHECK(e.picard_iterations == 1);
  }
}

TEST_CASE("degenerate settings reproduce the simpler schemes bitwise")
{
  auto mesh = unit_square(4);
  auto base = base_config(SchemeKind::penalty_linear, 0.05, 0.01, 0.1);
  base.noise = additive_noise();
  base.forcing = smooth_forcing();

  auto one_sweep = base;
  one_sweep.kind = SchemeKind::penalty_nonlinear;
  one_sweep.picard.max_iters = 1;
  CHECK(same_trajectory(run_path(mesh, base, 3, 1), run_path(mesh, one_sweep, 3, 1)));

  auto no_conv = base;
  no_conv.convection = false;
  auto stokes = base;
  stokes.kind = SchemeKind::stokes_penalty;
  CHECK(same_trajectory(run_path(mesh, no_conv, 3, 1), run_path(mesh, stokes, 3, 1)));

  auto saddle_off = base;
  saddle_off.kind = SchemeKind::saddle;
  saddle_off.convection = false;
  auto stokes_saddle = base;
  stokes_saddle.kind = SchemeKind::stokes_saddle;
  CHECK(same_trajectory(run_path(mesh, saddle_off, 3, 1), run_path(mesh, stokes_saddle, 3, 1)));

  // convection really acts when it is on
  CHECK(!same_trajectory(run_path(mesh, base, 3, 1), run_path(mesh, stokes, 3, 1)));
}

TEST_CASE("energy identity and pressure relation of the linearized scheme")
{
  auto mesh = unit_square(4);
  for (auto kind : {SchemeKind::penalty_linear, SchemeKind::stokes_penalty})
  {
    auto c = base_config(kind, 0.02, 0.004, 0.08);
    c.noise = additive_noise();
    c.forcing = smooth_forcing();
    c.initial_pressure = [](Point const & p) { return Vec2{p.x - p.y * p.y, 0.0}; };
    auto traj = run_path(mesh, c, 17, 4);
    REQUIRE(static_cast<int>(traj.energy.size()) == c.M);
    double const mean0 = traj.energy.front().pressure_mean;
    for (auto const & e : traj.energy)
    {
      CHECK(e.residual <= 1e-9);
      CHECK(e.pressure_residual <= 1e-9);
      CHECK(std::abs(e.pressure_mean - mean0) <= 1e-11);
      CHECK(e.k_over_eps == doctest::Approx(c.k / c.epsilon));
    }
    CHECK(traj.energy.back().v_sq > 0.0);
  }
}

TEST_CASE("picard iteration solves the nonlinear step")
{
  auto mesh = unit_square(4);
  auto c = base_config(SchemeKind::penalty_nonlinear, 0.05, 0.02, 0.1);
  c.noise = additive_noise(5.0);
  c.forcing = [](double, Point const & p) { return Vec2{20.0 * p.y, -10.0 * p.x}; };
  c.picard.tolerance = 1e-12;
  auto disc = build_discretization(mesh, c);
  Stepper stepper(disc, c);
  State s = initial_state(*disc, c);
  for (int m = 1; m <= c.M; ++m)
  {
    StepDiagnostics diag;
    s = stepper.step(s, sample_increment(*c.noise, {2, 0}, m, c.k), &diag);
    CHECK(diag.picard_iterations > 1);
    CHECK(diag.nonlinear_residual <= 1e-8);
    CHECK(diag.linear_residual <= c.linear.tolerance);
  }

  c.picard.max_iters = 2;
  c.picard.tolerance = 1e-14;
  auto disc2 = build_discretization(mesh, c);
  Stepper tight(disc2, c);
  CHECK_THROWS_AS(tight.step(initial_state(*disc2, c), sample_increment(*c.noise, {2, 0}, 1, c.k)), SolverError);
}

TEST_CASE("first order in time: squared self-differences fall like k^2")
{
  auto mesh = unit_square(3);
  std::vector<double> ks{0.02, 0.01, 0.005, 0.0025};
  std::vector<Vector> finals;
  DiscretizationPtr disc;
  for (double k : ks)
  {
    auto c = base_config(SchemeKind::penalty_linear, 0.5, k, 0.2);
    c.forcing = smooth_forcing();
    disc = build_discretization(mesh, c);
    finals.push_back(run_path(disc, c, 0, 0).states.back().velocity.coefficients);
  }
  std::vector<double> x, y;
  for (std::size_t i = 0; i + 1 < ks.size(); ++i)
  {
    x.push_back(std::log(ks[i]));
    y.push_back(std::log(l2_dist_sq(*disc, finals[i], finals[i + 1])));
  }
  double const slope1 = (y[1] - y[0]) / (x[1] - x[0]);
  double const slope2 = (y[2] - y[1]) / (x[2] - x[1]);
  CHECK(slope1 == doctest::Approx(2.0).epsilon(0.15));
  CHECK(slope2 == doctest::Approx(2.0).epsilon(0.15));
}

TEST_CASE("saddle scheme is discretely divergence free with mean-zero pressure")
{
  auto mesh = unit_square(4);
  for (auto kind : {SchemeKind::saddle, SchemeKind::stokes_saddle})
  {
    auto c = base_config(kind, 1.0, 0.01, 0.05);
    c.noise = additive_noise();
    c.forcing = smooth_forcing();
    auto disc = build_discretization(mesh, c);
    Stepper stepper(disc, c);
    State s = initial_state(*disc, c);
    for (int m = 1; m <= c.M; ++m)
    {
      StepDiagnostics diag;
      s = stepper.step(s, sample_increment(*c.noise, {8, 0}, m, c.k), &diag);
      CHECK(diag.divergence_linf <= 1e-9);
      CHECK(std::abs(disc->pressure_ones.dot(s.pressure.coefficients)) <= 1e-11);
    }
  }
}

TEST_CASE("penalty divergence shrinks with eps on paired paths")
{
  auto mesh = unit_square(4);
  double prev = std::numeric_limits<double>::infinity();
  for (double eps : {1e-1, 5e-2, 2.5e-2, 1.25e-2})
  {
    auto c = base_config(SchemeKind::stokes_penalty, eps, 0.005, 0.05);
    c.noise = additive_noise();
    auto disc = build_discretization(mesh, c);
    auto traj = run_path(disc, c, 21, 0);
    Vector const bv = disc->div * traj.states.back().velocity.coefficients;
    CHECK(bv.norm() < prev);
    prev = bv.norm();
  }
}

TEST_CASE("runs are deterministic, also across element threads")
{
  auto mesh = unit_square(5);
  auto c = base_config(SchemeKind::penalty_nonlinear, 0.05, 0.01, 0.05);
  c.noise = additive_noise();
  c.forcing = smooth_forcing();
  c.snapshot_stride = 1;
  auto a = run_path(mesh, c, 5, 2);
  auto b = run_path(mesh, c, 5, 2);
  CHECK(a.states.size() == static_cast<std::size_t>(c.M + 1));
  CHECK(same_trajectory(a, b));
  c.threads = 3;
  CHECK(same_trajectory(a, run_path(mesh, c, 5, 2)));
  CHECK(!same_trajectory(a, run_path(mesh, c, 5, 3)));
}

TEST_CASE("snapshot stride keeps first and last")
{
  auto mesh = unit_square(2);
  auto c = base_config(SchemeKind::stokes_penalty, 0.1, 0.1, 0.7);
  c.snapshot_stride = 3;
  auto traj = run_path(mesh, c, 0, 0);
  std::vector<int> ms;
  for (auto const & s : traj.states)
    ms.push_back(s.m);
  CHECK(ms == std::vector<int>{0, 3, 6, 7});
}

TEST_CASE("poincare constant of the unit square")
{
  // lambda_min of the Dirichlet Laplacian on (0,1)^2 is 2 pi^2
  auto space = build_space(unit_square(8), 2, 1);
  CHECK(poincare_constant(*space) == doctest::Approx(1.0 / (std::numbers::pi * std::sqrt(2.0))).epsilon(1e-3));
  // a conforming space over-estimates lambda, so C_P comes out from below
  CHECK(poincare_constant(*space) <= 1.0 / (std::numbers::pi * std::sqrt(2.0)));
}

TEST_CASE("monotonicity functional")
{
  auto mesh = unit_square(4);
  auto space = build_space(mesh, 2, 2);
  auto noise = make_noise_model(5, LambdaKind::inverse_square_sum, 5.0, GammaKind::additive);
  std::mt19937_64 rng(99);
  auto u = testing::random_field(space, rng, true);
  FEFunction w0(space);
  auto const A = stiffness_matrix(*space);
  CHECK(monotonicity_check(u, w0, 1.0, noise) ==
        doctest::Approx(u.coefficients.dot(A * u.coefficients)).epsilon(1e-10));

  for (int s = 0; s < 20; ++s)
  {
    auto a = testing::random_field(space, rng, true);
    auto b = testing::random_field(space, rng, true);
    double const v = monotonicity_check(a, b, 0.5, noise);
    CHECK(v >= -1e-9 * monotonicity_scale(a, b, 0.5, noise));
  }

  // L_g beyond sqrt(nu / (2 C_P^2)) is outside the lemma
  auto strong = make_noise_model(5, LambdaKind::inverse_square_sum, 5.0, GammaKind::linear, 1.0, 10.0);
  CHECK_THROWS_AS(monotonicity_check(u, w0, 1.0, strong), ConfigError);
  auto weak = make_noise_model(5, LambdaKind::inverse_square_sum, 5.0, GammaKind::linear, 1.0, 0.5);
  CHECK_NOTHROW(monotonicity_check(u, w0, 1.0, weak));
}
