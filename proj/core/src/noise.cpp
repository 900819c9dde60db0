#include "pspde/noise.hpp"

#include "pspde/error.hpp"
#include "pspde/output.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>

namespace pspde
{

namespace
{

std::uint64_t splitmix64(std::uint64_t x)
{
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr char xi_magic[8] = {'P', 'S', 'P', 'D', 'E', 'X', 'I', '1'};

} // namespace

NoiseModel::NoiseModel(Params params)
  : params_(std::move(params))
{
  int const J = params_.J;
  if (J < 1)
    throw ConfigError("noise truncation J must be >= 1");
  if (!(params_.domain_scale > 0.0))
    throw ConfigError("noise domain scale must be positive");
  if (!std::isfinite(params_.amplitude) || !std::isfinite(params_.linear_c))
    throw ConfigError("noise coefficients must be finite");

  lambda_.resize(static_cast<std::size_t>(J) * J);
  if (params_.lambda_kind == LambdaKind::inverse_square_sum)
  {
    for (int i = 1; i <= J; ++i)
      for (int j = 1; j <= J; ++j)
        lambda_[(i - 1) * J + (j - 1)] = 1.0 / ((i + j) * (i + j));
  }
  else
  {
    if (params_.lambda_table.size() != lambda_.size())
      throw ConfigError("custom eigenvalue table must hold J * J = " + std::to_string(lambda_.size()) +
                        " entries");
    lambda_ = params_.lambda_table;
  }
  for (double l : lambda_)
    if (!(l > 0.0) || !std::isfinite(l))
      throw ConfigError("noise eigenvalues must be positive and finite");

  double const declared = lipschitz_constant();
  double const observed = empirical_lipschitz(*this, 10000, 0x5eedULL);
  if (observed > declared * (1.0 + 1e-12) + 1e-300)
    throw ConfigError("diffusion coefficient violates its declared Lipschitz constant");
}

double NoiseModel::eigenfunction(int i, int j, Point const & p) const
{
  double const L = params_.domain_scale;
  return (2.0 / L) * std::sin(i * std::numbers::pi * p.x / L) * std::sin(j * std::numbers::pi * p.y / L);
}

double NoiseModel::trace() const
{
  double sum = 0.0;
  for (double l : lambda_)
    sum += l;
  return 2.0 * sum;
}

Vec2 NoiseModel::apply_gamma(Vec2 const & velocity, Vec2 const & increment) const
{
  if (params_.gamma_kind == GammaKind::additive)
    return {params_.amplitude * increment[0], params_.amplitude * increment[1]};
  return {params_.linear_c * velocity[0] * increment[0], params_.linear_c * velocity[1] * increment[1]};
}

double NoiseModel::lipschitz_constant() const
{
  return params_.gamma_kind == GammaKind::additive ? 0.0 : std::abs(params_.linear_c);
}

NoiseModel make_noise_model(int J,
                            LambdaKind lambda_kind,
                            double domain_scale,
                            GammaKind gamma_kind,
                            double amplitude,
                            double linear_c)
{
  NoiseModel::Params p;
  p.J = J;
  p.lambda_kind = lambda_kind;
  p.domain_scale = domain_scale;
  p.gamma_kind = gamma_kind;
  p.amplitude = amplitude;
  p.linear_c = linear_c;
  return NoiseModel(std::move(p));
}

double empirical_lipschitz(NoiseModel const & model, int n_pairs, std::uint64_t seed)
{
  // The coefficient acts on the velocity argument; probe with a unit increment.
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  Vec2 const unit{1.0, 1.0};
  double worst = 0.0;
  for (int n = 0; n < n_pairs; ++n)
  {
    Vec2 const a{u(rng), u(rng)};
    Vec2 const b{u(rng), u(rng)};
    double const dist = std::hypot(a[0] - b[0], a[1] - b[1]);
    if (dist == 0.0)
      continue;
    auto const ga = model.apply_gamma(a, unit);
    auto const gb = model.apply_gamma(b, unit);
    worst = std::max(worst, std::hypot(ga[0] - gb[0], ga[1] - gb[1]) / dist);
  }
  return worst;
}

std::uint64_t stream_key(std::uint64_t base_seed,
                         std::uint64_t sample_index,
                         std::uint64_t step_index,
                         std::uint64_t block)
{
  std::uint64_t h = splitmix64(base_seed);
  h = splitmix64(h ^ sample_index);
  h = splitmix64(h ^ step_index);
  return splitmix64(h ^ block);
}

WienerIncrement sample_increment(NoiseModel const & model,
                                 NoiseStream const & stream,
                                 std::uint64_t step_index,
                                 double k)
{
  if (!(k > 0.0))
    throw ConfigError("time step must be positive");
  WienerIncrement inc;
  inc.J = model.J();
  inc.k = k;
  inc.sample_index = stream.sample_index;
  inc.step_index = step_index;
  inc.xi.resize(2 * static_cast<std::size_t>(model.n_modes()));
  for (int c = 0; c < 2; ++c)
  {
    std::mt19937_64 rng(stream_key(stream.base_seed, stream.sample_index, step_index, c));
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int m = 0; m < model.n_modes(); ++m)
      inc.xi[static_cast<std::size_t>(c) * model.n_modes() + m] = normal(rng);
  }
  return inc;
}

WienerIncrement zero_increment(NoiseModel const & model, std::uint64_t step_index, double k)
{
  WienerIncrement inc;
  inc.J = model.J();
  inc.k = k;
  inc.step_index = step_index;
  inc.xi.assign(2 * static_cast<std::size_t>(model.n_modes()), 0.0);
  return inc;
}

double scaled_coefficient(NoiseModel const & model, WienerIncrement const & inc, int component, int i, int j)
{
  return std::sqrt(inc.k) * std::sqrt(model.lambda(i, j)) * inc.xi_at(component, i, j);
}

Vec2 increment_value(NoiseModel const & model, WienerIncrement const & inc, Point const & p)
{
  Vec2 v{0.0, 0.0};
  for (int c = 0; c < 2; ++c)
    for (int i = 1; i <= model.J(); ++i)
      for (int j = 1; j <= model.J(); ++j)
        v[c] += scaled_coefficient(model, inc, c, i, j) * model.eigenfunction(i, j, p);
  return v;
}

std::uint64_t increment_hash(WienerIncrement const & inc, std::uint64_t h)
{
  auto mix = [&h](void const * data, std::size_t n) {
    auto const * bytes = static_cast<unsigned char const *>(data);
    for (std::size_t i = 0; i < n; ++i)
    {
      h ^= bytes[i];
      h *= 1099511628211ULL;
    }
  };
  mix(&inc.k, sizeof inc.k);
  mix(inc.xi.data(), inc.xi.size() * sizeof(double));
  return h;
}

NoiseLoadAssembler::NoiseLoadAssembler(std::shared_ptr<NoiseModel const> model, SpacePtr velocity)
  : model_(std::move(model))
  , space_(std::move(velocity))
{
  if (space_->components() != 2)
    throw ConfigError("noise load needs a vector velocity space");
  auto const & mesh = space_->mesh();
  auto const & rule = quadrature_rule(default_quadrature_degree);
  int const J = model_->J();
  double const L = model_->domain_scale();
  std::size_t const nq = rule.size();
  sin_x_.resize(static_cast<std::size_t>(mesh.n_triangles()) * nq * J);
  sin_y_.resize(sin_x_.size());
  for (Index t = 0; t < mesh.n_triangles(); ++t)
  {
    auto const g = element_geometry(mesh, t);
    for (std::size_t q = 0; q < nq; ++q)
    {
      auto const p = g.map(rule.points[q]);
      for (int i = 1; i <= J; ++i)
      {
        auto const slot = (static_cast<std::size_t>(t) * nq + q) * J + (i - 1);
        sin_x_[slot] = std::sin(i * std::numbers::pi * p.x / L);
        sin_y_[slot] = std::sin(i * std::numbers::pi * p.y / L);
      }
    }
  }
}

Vector NoiseLoadAssembler::assemble(WienerIncrement const & inc, FEFunction const & prev) const
{
  auto const & model = *model_;
  auto const & space = *space_;
  if (inc.J != model.J())
    throw ConfigError("increment truncation does not match the noise model");
  if (prev.space->n_dofs() != space.n_dofs())
    throw ConfigError("previous velocity is not in the velocity space");

  int const J = model.J();
  double const L = model.domain_scale();
  auto const & rule = quadrature_rule(default_quadrature_degree);
  std::size_t const nq = rule.size();
  int const nl = space.local_dofs();

  std::vector<double> coeff(2 * static_cast<std::size_t>(J) * J);
  for (int c = 0; c < 2; ++c)
    for (int i = 1; i <= J; ++i)
      for (int j = 1; j <= J; ++j)
        coeff[(static_cast<std::size_t>(c) * J + (i - 1)) * J + (j - 1)] =
            (2.0 / L) * scaled_coefficient(model, inc, c, i, j);

  std::vector<std::array<double, 6>> phi(nq);
  for (std::size_t q = 0; q < nq; ++q)
    eval_basis(space.degree(), rule.points[q], phi[q]);

  Vector b = Vector::Zero(space.n_dofs());
  bool const additive = model.is_additive();
  for (Index t = 0; t < space.mesh().n_triangles(); ++t)
  {
    double const area = space.mesh().area(t);
    auto const dofs = space.cell_dofs(t);
    for (std::size_t q = 0; q < nq; ++q)
    {
      auto const base = (static_cast<std::size_t>(t) * nq + q) * J;
      double const * sx = &sin_x_[base];
      double const * sy = &sin_y_[base];
      Vec2 dW{0.0, 0.0};
      for (int c = 0; c < 2; ++c)
      {
        double acc = 0.0;
        for (int i = 0; i < J; ++i)
        {
          double row = 0.0;
          double const * cr = &coeff[(static_cast<std::size_t>(c) * J + i) * J];
          for (int j = 0; j < J; ++j)
            row += cr[j] * sy[j];
          acc += sx[i] * row;
        }
        dW[c] = acc;
      }
      Vec2 v{0.0, 0.0};
      if (!additive)
        for (int c = 0; c < 2; ++c)
          for (int k = 0; k < nl; ++k)
            v[c] += prev.coefficients[space.component_dof(c, dofs[k])] * phi[q][k];
      auto const g = model.apply_gamma(v, dW);
      double const w = rule.weights[q] * area;
      for (int c = 0; c < 2; ++c)
        for (int i = 0; i < nl; ++i)
          b[space.component_dof(c, dofs[i])] += w * g[c] * phi[q][i];
    }
  }
  return b;
}

Vector noise_load_vector(NoiseModel const & model,
                         WienerIncrement const & inc,
                         FEFunction const & prev_velocity,
                         SpacePtr const & velocity)
{
  return NoiseLoadAssembler(std::make_shared<NoiseModel const>(model), velocity).assemble(inc, prev_velocity);
}

void write_increments(std::vector<WienerIncrement> const & increments, std::filesystem::path const & path)
{
  std::ostringstream out(std::ios::binary);
  std::uint32_t const J = increments.empty() ? 0u : static_cast<std::uint32_t>(increments.front().J);
  std::uint64_t const count = increments.size();
  out.write(xi_magic, sizeof xi_magic);
  out.write(reinterpret_cast<char const *>(&J), sizeof J);
  out.write(reinterpret_cast<char const *>(&count), sizeof count);
  for (auto const & inc : increments)
  {
    if (static_cast<std::uint32_t>(inc.J) != J)
      throw ConfigError("all dumped increments must share J");
    out.write(reinterpret_cast<char const *>(&inc.sample_index), sizeof inc.sample_index);
    out.write(reinterpret_cast<char const *>(&inc.step_index), sizeof inc.step_index);
    out.write(reinterpret_cast<char const *>(&inc.k), sizeof inc.k);
    out.write(reinterpret_cast<char const *>(inc.xi.data()),
              static_cast<std::streamsize>(inc.xi.size() * sizeof(double)));
  }
  write_file_atomically(path, out.str());
}

std::vector<WienerIncrement> read_increments(std::filesystem::path const & path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw ParseError("cannot open " + path.string());
  char magic[8];
  std::uint32_t J = 0;
  std::uint64_t count = 0;
  in.read(magic, sizeof magic);
  in.read(reinterpret_cast<char *>(&J), sizeof J);
  in.read(reinterpret_cast<char *>(&count), sizeof count);
  if (!in || std::memcmp(magic, xi_magic, sizeof magic) != 0)
    throw ParseError("not an increment dump: " + path.string());
  std::vector<WienerIncrement> out(count);
  for (auto & inc : out)
  {
    inc.J = static_cast<int>(J);
    inc.xi.resize(2 * static_cast<std::size_t>(J) * J);
    in.read(reinterpret_cast<char *>(&inc.sample_index), sizeof inc.sample_index);
    in.read(reinterpret_cast<char *>(&inc.step_index), sizeof inc.step_index);
    in.read(reinterpret_cast<char *>(&inc.k), sizeof inc.k);
    in.read(reinterpret_cast<char *>(inc.xi.data()), static_cast<std::streamsize>(inc.xi.size() * sizeof(double)));
    if (!in)
      throw ParseError("truncated increment dump: " + path.string());
  }
  return out;
}

} // namespace pspde
