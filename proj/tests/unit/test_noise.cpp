#include "helpers.hpp"

#include "pspde/error.hpp"
#include "pspde/noise.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace pspde;
using testing::unit_square;

namespace
{

NoiseModel paper_model(double amplitude = 1.0)
{
  return make_noise_model(5, LambdaKind::inverse_square_sum, 5.0, GammaKind::additive, amplitude);
}

} // namespace

TEST_CASE("eigenvalues, trace and eigenfunctions")
{
  auto model = paper_model();
  CHECK(model.lambda(1, 1) == 0.25);
  CHECK(model.lambda(2, 3) == doctest::Approx(1.0 / 25.0).epsilon(1e-15));

  double const by_hand = 2.0 * (1.0 / 4 + 2.0 / 9 + 3.0 / 16 + 4.0 / 25 + 5.0 / 36 + 4.0 / 49 + 3.0 / 64 + 2.0 / 81 +
                                1.0 / 100);
  CHECK(model.trace() == doctest::Approx(by_hand).epsilon(1e-14));

  CHECK(model.eigenfunction(1, 1, {2.5, 2.5}) == doctest::Approx(0.4).epsilon(1e-15));
  CHECK(std::abs(model.eigenfunction(2, 1, {5.0, 1.0})) <= 1e-15);
  CHECK(model.eigenfunction(3, 2, {0.5, 1.25}) ==
        doctest::Approx(0.4 * std::sin(0.3 * std::numbers::pi) * std::sin(0.5 * std::numbers::pi)));
}

TEST_CASE("partial traces increase and stay bounded")
{
  double prev = 0.0;
  for (int J = 1; J <= 40; ++J)
  {
    auto m = make_noise_model(J, LambdaKind::inverse_square_sum, 5.0, GammaKind::additive);
    CHECK(m.trace() > prev);
    // sum_{i,j>=1} 1/(i+j)^2 = sum_{n>=2} (n-1)/n^2 diverges only logarithmically,
    // but every truncation stays below 2 (1 + log J)
    CHECK(m.trace() < 2.0 * (1.0 + std::log(static_cast<double>(J))));
    prev = m.trace();
  }
}

TEST_CASE("invalid eigenvalue tables")
{
  NoiseModel::Params p;
  p.J = 2;
  p.lambda_kind = LambdaKind::custom;
  p.lambda_table = {1.0, 0.5, 0.0, 0.25};
  CHECK_THROWS_AS(NoiseModel{p}, ConfigError);
  p.lambda_table = {1.0, 0.5, -1.0, 0.25};
  CHECK_THROWS_AS(NoiseModel{p}, ConfigError);
  p.lambda_table = {1.0, 0.5};
  CHECK_THROWS_AS(NoiseModel{p}, ConfigError);
  p.lambda_table = {1.0, 0.5, 0.5, 0.25};
  CHECK(NoiseModel{p}.lambda(2, 1) == 0.5);
  CHECK_THROWS_AS(make_noise_model(0, LambdaKind::inverse_square_sum, 5.0, GammaKind::additive), ConfigError);
}

TEST_CASE("lipschitz constant of the diffusion coefficient")
{
  auto additive = paper_model(3.0);
  CHECK(additive.lipschitz_constant() == 0.0);
  CHECK(empirical_lipschitz(additive, 10000, 1) == 0.0);

  auto linear = make_noise_model(5, LambdaKind::inverse_square_sum, 5.0, GammaKind::linear, 1.0, -0.7);
  CHECK(linear.lipschitz_constant() == doctest::Approx(0.7));
  double const seen = empirical_lipschitz(linear, 10000, 2);
  CHECK(seen <= 0.7 * (1.0 + 1e-12));
  CHECK(seen >= 0.69);
}

TEST_CASE("increments are deterministic per stream")
{
  auto model = paper_model();
  auto a = sample_increment(model, {42, 3}, 7, 0.01);
  auto b = sample_increment(model, {42, 3}, 7, 0.01);
  REQUIRE(a.xi.size() == 50);
  CHECK(a.xi == b.xi);
  CHECK(increment_hash(a) == increment_hash(b));

  auto other_step = sample_increment(model, {42, 3}, 8, 0.01);
  auto other_sample = sample_increment(model, {42, 4}, 7, 0.01);
  auto other_seed = sample_increment(model, {43, 3}, 7, 0.01);
  CHECK(a.xi != other_step.xi);
  CHECK(a.xi != other_sample.xi);
  CHECK(a.xi != other_seed.xi);
  CHECK(increment_hash(a) != increment_hash(other_step));

  CHECK(stream_key(1, 2, 3, 0) != stream_key(1, 2, 3, 1));
  CHECK(stream_key(1, 2, 3, 0) != stream_key(1, 3, 2, 0));
}

TEST_CASE("coefficient statistics")
{
  auto model = paper_model();
  double const k = 0.02;
  int const N = 10000;
  int const n = 2 * model.n_modes();
  std::vector<double> sum(n, 0.0), sum_sq(n, 0.0);
  double cross = 0.0; // (0,1,1) against (1,1,1)
  for (int s = 0; s < N; ++s)
  {
    auto inc = sample_increment(model, {5, static_cast<std::uint64_t>(s)}, 1, k);
    for (int idx = 0; idx < n; ++idx)
    {
      int const c = idx / model.n_modes();
      int const i = (idx % model.n_modes()) / 5 + 1;
      int const j = idx % 5 + 1;
      double const x = scaled_coefficient(model, inc, c, i, j);
      sum[idx] += x;
      sum_sq[idx] += x * x;
    }
    cross += inc.xi_at(0, 1, 1) * inc.xi_at(1, 1, 1);
  }
  for (int idx = 0; idx < n; ++idx)
  {
    int const i = (idx % model.n_modes()) / 5 + 1;
    int const j = idx % 5 + 1;
    double const var_true = k * model.lambda(i, j);
    double const mean = sum[idx] / N;
    double const var = sum_sq[idx] / N - mean * mean;
    CHECK(std::abs(mean) <= 4.0 * std::sqrt(var_true / N));
    // relative sd of a sample variance is sqrt(2 / N) ~ 1.4%
    CHECK(var == doctest::Approx(var_true).epsilon(0.07));
  }
  CHECK(std::abs(cross / N) <= 0.05);
}

TEST_CASE("increment field scales with sqrt(k)")
{
  auto model = paper_model();
  auto a = sample_increment(model, {9, 0}, 1, 0.01);
  auto b = a;
  b.k = 0.02;
  for (Point p : {Point{0.3, 0.7}, Point{2.2, 4.1}, Point{4.9, 0.05}})
  {
    auto va = increment_value(model, a, p);
    auto vb = increment_value(model, b, p);
    CHECK(vb[0] == doctest::Approx(std::sqrt(2.0) * va[0]).epsilon(1e-13));
    CHECK(vb[1] == doctest::Approx(std::sqrt(2.0) * va[1]).epsilon(1e-13));
  }

  // direct summation of the expansion
  Point const p{1.3, 3.4};
  double ex = 0.0;
  for (int i = 1; i <= 5; ++i)
    for (int j = 1; j <= 5; ++j)
      ex += std::sqrt(0.01) * std::sqrt(1.0 / ((i + j) * (i + j))) * a.xi_at(0, i, j) * 0.4 *
            std::sin(i * std::numbers::pi * p.x / 5.0) * std::sin(j * std::numbers::pi * p.y / 5.0);
  CHECK(increment_value(model, a, p)[0] == doctest::Approx(ex).epsilon(1e-13));
}

TEST_CASE("noise load vector")
{
  auto mesh = unit_square(6);
  auto vel = build_space(mesh, 2, 2);
  auto model = paper_model();
  std::mt19937_64 rng(3);
  auto prev = testing::random_field(vel, rng, false);

  auto zero = zero_increment(model, 1, 0.01);
  CHECK(noise_load_vector(model, zero, prev, vel).lpNorm<Eigen::Infinity>() == 0.0);

  auto inc = sample_increment(model, {1, 1}, 1, 0.01);
  auto silent = make_noise_model(5, LambdaKind::inverse_square_sum, 5.0, GammaKind::linear, 1.0, 0.0);
  CHECK(noise_load_vector(silent, inc, prev, vel).lpNorm<Eigen::Infinity>() == 0.0);

  // one active mode: M * projection of the increment field
  auto single = zero;
  single.xi.assign(single.xi.size(), 0.0);
  single.xi[(1 * 5 + 2) * 5 + 1] = 1.3; // component 1, i = 3, j = 2
  auto const load = noise_load_vector(model, single, prev, vel);
  auto const proj = l2_project(vel, [&](Point const & p) { return increment_value(model, single, p); });
  Vector const via_projection = mass_matrix(*vel) * proj.coefficients;
  CHECK((load - via_projection).lpNorm<Eigen::Infinity>() <= 1e-8 * load.lpNorm<Eigen::Infinity>());
  for (Index s = 0; s < vel->n_scalar_dofs(); ++s)
    CHECK(load[s] == 0.0);

  // cached-table assembler agrees with the free function
  NoiseLoadAssembler assembler(std::make_shared<NoiseModel const>(model), vel);
  CHECK((assembler.assemble(inc, prev) - noise_load_vector(model, inc, prev, vel)).lpNorm<Eigen::Infinity>() <=
        1e-14);

  // linear coefficient: doubling the previous velocity doubles the load
  auto linear = make_noise_model(5, LambdaKind::inverse_square_sum, 5.0, GammaKind::linear, 1.0, 0.4);
  FEFunction twice(vel);
  twice.coefficients = 2.0 * prev.coefficients;
  CHECK((noise_load_vector(linear, inc, twice, vel) - 2.0 * noise_load_vector(linear, inc, prev, vel))
          .lpNorm<Eigen::Infinity>() <= 1e-13);
}

TEST_CASE("increment dump round trip")
{
  auto model = paper_model();
  std::vector<WienerIncrement> incs;
  for (int m = 1; m <= 4; ++m)
    incs.push_back(sample_increment(model, {11, 2}, m, 0.005));
  auto path = testing::temp_path("xi.bin");
  write_increments(incs, path);
  auto back = read_increments(path);
  REQUIRE(back.size() == incs.size());
  for (std::size_t n = 0; n < incs.size(); ++n)
  {
    CHECK(back[n].J == incs[n].J);
    CHECK(back[n].k == incs[n].k);
    CHECK(back[n].sample_index == incs[n].sample_index);
    CHECK(back[n].step_index == incs[n].step_index);
    CHECK(back[n].xi == incs[n].xi);
  }
  testing::write_text(path, "not a dump");
  CHECK_THROWS_AS(read_increments(path), ParseError);
}
