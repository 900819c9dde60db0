#pragma once

#include "pspde/spaces.hpp"

#include <cstdint>
#include <filesystem>
#include <memory>
#include <vector>

namespace pspde
{

enum class LambdaKind
{
  inverse_square_sum, // lambda(i, j) = 1 / (i + j)^2
  custom,
};

enum class GammaKind
{
  additive, // g(v) = amplitude
  linear,   // g(v) = c * v, componentwise
};

/// Truncated Karhunen-Loeve model of a two-component Q-Wiener process.
///
/// Modes e_ij(x, y) = (2 / L) sin(i pi x / L) sin(j pi y / L), i, j = 1..J,
/// the Dirichlet Laplacian eigenfunctions of (0, L)^2, restricted to the mesh
/// domain. Both components share the eigenvalue table and draw independent
/// coefficients.
class NoiseModel
{
public:
  struct Params
  {
    int J = 5;
    LambdaKind lambda_kind = LambdaKind::inverse_square_sum;
    std::vector<double> lambda_table; // row-major J x J, custom kind only
    double domain_scale = 5.0;        // L
    GammaKind gamma_kind = GammaKind::additive;
    double amplitude = 1.0;           // additive scale
    double linear_c = 0.0;            // linear coefficient
  };

  explicit NoiseModel(Params params);

  int J() const { return params_.J; }
  int n_modes() const { return params_.J * params_.J; }
  double domain_scale() const { return params_.domain_scale; }
  Params const & params() const { return params_; }

  /// Eigenvalue of mode (i, j), 1-based.
  double lambda(int i, int j) const { return lambda_[(i - 1) * params_.J + (j - 1)]; }
  /// Eigenfunction e_ij at a point, 1-based.
  double eigenfunction(int i, int j, Point const & p) const;

  /// Sum of all eigenvalues over both components.
  double trace() const;

  /// Pointwise diffusion coefficient applied to the increment: g(v) dW.
  Vec2 apply_gamma(Vec2 const & velocity, Vec2 const & increment) const;
  /// Declared Lipschitz constant L_g of g.
  double lipschitz_constant() const;
  bool is_additive() const { return params_.gamma_kind == GammaKind::additive; }

private:
  Params params_;
  std::vector<double> lambda_;
};

NoiseModel make_noise_model(int J,
                            LambdaKind lambda_kind,
                            double domain_scale,
                            GammaKind gamma_kind,
                            double amplitude = 1.0,
                            double linear_c = 0.0);

/// Largest |g(a) - g(b)| / |a - b| over random pairs; used to verify the
/// declared Lipschitz constant.
double empirical_lipschitz(NoiseModel const & model, int n_pairs, std::uint64_t seed);

/// Identifies an independent random stream: one Monte-Carlo sample.
struct NoiseStream
{
  std::uint64_t base_seed = 0;
  std::uint64_t sample_index = 0;
};

/// Counter-style key for (base_seed, sample, step, block), built by chained
/// SplitMix64 finalization.
std::uint64_t stream_key(std::uint64_t base_seed,
                         std::uint64_t sample_index,
                         std::uint64_t step_index,
                         std::uint64_t block);

/// One sampled increment Delta_m W = W(t_m) - W(t_{m-1}).
struct WienerIncrement
{
  int J = 0;
  double k = 0.0;
  std::uint64_t sample_index = 0;
  std::uint64_t step_index = 0;
  /// Standard normal draws, layout [component][i - 1][j - 1].
  std::vector<double> xi;

  double xi_at(int component, int i, int j) const
  {
    return xi[(static_cast<std::size_t>(component) * J + (i - 1)) * J + (j - 1)];
  }
};

WienerIncrement sample_increment(NoiseModel const & model,
                                 NoiseStream const & stream,
                                 std::uint64_t step_index,
                                 double k);

/// All-zero draws, used by deterministic runs.
WienerIncrement zero_increment(NoiseModel const & model, std::uint64_t step_index, double k);

/// sqrt(k) sqrt(lambda(i, j)) xi: the coefficient multiplying e_ij.
double scaled_coefficient(NoiseModel const & model, WienerIncrement const & inc, int component, int i, int j);

/// Delta_m W evaluated at a point.
Vec2 increment_value(NoiseModel const & model, WienerIncrement const & inc, Point const & p);

/// FNV-1a over the raw bytes of the draws; equal hashes mark replayed paths.
std::uint64_t increment_hash(WienerIncrement const & inc, std::uint64_t seed = 1469598103934665603ULL);

/// Assembles (g(V^{m-1}) Delta_m W, phi_i) with the increment evaluated
/// analytically at quadrature points. Sine tables at every quadrature point
/// are cached at construction.
class NoiseLoadAssembler
{
public:
  NoiseLoadAssembler(std::shared_ptr<NoiseModel const> model, SpacePtr velocity);

  Vector assemble(WienerIncrement const & inc, FEFunction const & prev_velocity) const;

private:
  std::shared_ptr<NoiseModel const> model_;
  SpacePtr space_;
  std::vector<double> sin_x_; // [t][q][i]
  std::vector<double> sin_y_; // [t][q][j]
};

Vector noise_load_vector(NoiseModel const & model,
                         WienerIncrement const & inc,
                         FEFunction const & prev_velocity,
                         SpacePtr const & velocity);

/// Binary dump of increments for replay across schemes.
void write_increments(std::vector<WienerIncrement> const & increments, std::filesystem::path const & path);
std::vector<WienerIncrement> read_increments(std::filesystem::path const & path);

} // namespace pspde
