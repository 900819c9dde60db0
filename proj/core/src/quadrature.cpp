#include "pspde/quadrature.hpp"

#include "pspde/error.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace pspde
{

void gauss_legendre_01(int n, std::vector<double> & nodes, std::vector<double> & weights)
{
  nodes.assign(n, 0.0);
  weights.assign(n, 0.0);
  for (int i = 0; i < n; ++i)
  {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it)
    {
      double p0 = 1.0;
      double p1 = x;
      for (int k = 2; k <= n; ++k)
      {
        double const p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      double const pn = (n == 0) ? 1.0 : p1;
      double const pn1 = (n == 1) ? 1.0 : p0;
      dp = n * (x * pn - pn1) / (x * x - 1.0);
      double const dx = pn / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16)
        break;
    }
    nodes[i] = 0.5 * (1.0 - x);
    weights[i] = 1.0 / ((1.0 - x * x) * dp * dp);
  }
}

namespace
{

QuadRule centroid_rule()
{
  return {1, {{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0}}, {1.0}};
}

QuadRule three_point_rule()
{
  QuadRule r;
  r.degree = 2;
  r.points = {{2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0},
              {1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0},
              {1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0}};
  r.weights = {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
  return r;
}

// Radon's 7-point rule in closed form.
QuadRule seven_point_rule()
{
  double const s = std::sqrt(15.0);
  double const a1 = (6.0 - s) / 21.0;
  double const a2 = (6.0 + s) / 21.0;
  double const w1 = (155.0 - s) / 1200.0;
  double const w2 = (155.0 + s) / 1200.0;
  QuadRule r;
  r.degree = 5;
  r.points.push_back({1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0});
  r.weights.push_back(9.0 / 40.0);
  for (auto [a, w] : {std::pair{a1, w1}, std::pair{a2, w2}})
  {
    double const b = 1.0 - 2.0 * a;
    r.points.push_back({b, a, a});
    r.points.push_back({a, b, a});
    r.points.push_back({a, a, b});
    r.weights.insert(r.weights.end(), 3, w);
  }
  return r;
}

// Collapsed (Duffy) tensor Gauss rule.
QuadRule collapsed_rule(int degree)
{
  int const nx = (degree + 3) / 2;
  int const ny = (degree + 2) / 2;
  std::vector<double> xs, wx, ys, wy;
  gauss_legendre_01(nx, xs, wx);
  gauss_legendre_01(ny, ys, wy);
  QuadRule r;
  r.degree = degree;
  for (int i = 0; i < nx; ++i)
    for (int j = 0; j < ny; ++j)
    {
      double const x = xs[i];
      double const y = ys[j] * (1.0 - x);
      r.points.push_back({1.0 - x - y, x, y});
      r.weights.push_back(2.0 * wx[i] * wy[j] * (1.0 - x));
    }
  return r;
}

} // namespace

QuadRule const & quadrature_rule(int exactness_degree)
{
  static std::array<QuadRule, 7> const rules = {
      centroid_rule(), centroid_rule(), three_point_rule(), collapsed_rule(3),
      collapsed_rule(4), seven_point_rule(), collapsed_rule(6)};
  if (exactness_degree < 0 || exactness_degree > 6)
    throw ConfigError("quadrature exactness degree must be in [0, 6], got " +
                      std::to_string(exactness_degree));
  return rules[exactness_degree];
}

} // namespace pspde
