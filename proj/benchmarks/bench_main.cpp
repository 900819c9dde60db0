#include "pspde/noise.hpp"
#include "pspde/schemes.hpp"

#include <benchmark/benchmark.h>

#include <random>

namespace
{

using namespace pspde;

std::shared_ptr<Mesh const> l_shape(int n)
{
  return std::make_shared<Mesh const>(generate_l_shape(5.0, n));
}

std::shared_ptr<NoiseModel const> paper_noise()
{
  return std::make_shared<NoiseModel const>(
    make_noise_model(5, LambdaKind::inverse_square_sum, 5.0, GammaKind::additive));
}

void convection_assembly(benchmark::State & state)
{
  auto space = build_space(l_shape(static_cast<int>(state.range(0))), 2, 2);
  ConvectionAssembler conv(space);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  FEFunction wind(space);
  for (Index i = 0; i < space->n_dofs(); ++i)
    wind.coefficients[i] = g(rng);
  for (auto _ : state)
    benchmark::DoNotOptimize(conv.assemble(wind));
  state.counters["dofs"] = static_cast<double>(space->n_dofs());
}
BENCHMARK(convection_assembly)->Arg(10)->Arg(20)->Arg(30)->Unit(benchmark::kMillisecond);

void scheme_step(benchmark::State & state, SchemeKind kind)
{
  SchemeConfig cfg;
  cfg.kind = kind;
  cfg.epsilon = 0.05;
  cfg.set_time_grid(1.0, 0.04);
  cfg.noise = paper_noise();
  auto disc = build_discretization(l_shape(static_cast<int>(state.range(0))), cfg);
  Stepper stepper(disc, cfg);
  State s = initial_state(*disc, cfg);
  std::uint64_t m = 0;
  for (auto _ : state)
  {
    s = stepper.step(s, sample_increment(*cfg.noise, {1, 0}, ++m, cfg.k));
    if (s.m == cfg.M)
      s = initial_state(*disc, cfg);
  }
  state.counters["dofs"] = static_cast<double>(disc->velocity->n_dofs() + disc->pressure->n_dofs());
}
BENCHMARK_CAPTURE(scheme_step, penalty_linear, SchemeKind::penalty_linear)
  ->Arg(10)
  ->Arg(30)
  ->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(scheme_step, stokes_penalty, SchemeKind::stokes_penalty)
  ->Arg(10)
  ->Arg(30)
  ->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(scheme_step, saddle, SchemeKind::saddle)->Arg(10)->Arg(30)->Unit(benchmark::kMillisecond);

void noise_sampling(benchmark::State & state)
{
  auto model = paper_noise();
  std::uint64_t s = 0;
  for (auto _ : state)
    benchmark::DoNotOptimize(sample_increment(*model, {7, s++}, 1, 0.01));
}
BENCHMARK(noise_sampling);

void noise_load(benchmark::State & state)
{
  auto model = paper_noise();
  auto space = build_space(l_shape(30), 2, 2);
  NoiseLoadAssembler assembler(model, space);
  FEFunction prev(space);
  std::uint64_t s = 0;
  for (auto _ : state)
    benchmark::DoNotOptimize(assembler.assemble(sample_increment(*model, {7, s++}, 1, 0.01), prev));
}
BENCHMARK(noise_load)->Unit(benchmark::kMillisecond);

} // namespace

BENCHMARK_MAIN();
