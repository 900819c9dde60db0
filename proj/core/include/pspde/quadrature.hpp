#pragma once

#include <array>
#include <vector>

namespace pspde
{

/// Quadrature on the reference triangle {(x, y) : x, y >= 0, x + y <= 1}.
///
/// Points are barycentric (l0, l1, l2) with x = l1, y = l2. Weights are
/// normalized to sum to 1, so a physical integral is area * sum(w_q f(x_q)).
struct QuadRule
{
  int degree = 0;
  std::vector<std::array<double, 3>> points;
  std::vector<double> weights;

  std::size_t size() const { return weights.size(); }
};

/// Rule exact for all polynomials of total degree <= exactness_degree (0..6).
QuadRule const & quadrature_rule(int exactness_degree);

/// Default exactness used by every assembly routine: degree 5 integrates the
/// P2 convection integrand exactly.
inline constexpr int default_quadrature_degree = 5;

/// Gauss-Legendre nodes and weights on [0, 1].
void gauss_legendre_01(int n, std::vector<double> & nodes, std::vector<double> & weights);

} // namespace pspde
