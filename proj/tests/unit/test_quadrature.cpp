#include "pspde/error.hpp"
#include "pspde/quadrature.hpp"

#include <doctest.h>

#include <cmath>

using namespace pspde;

namespace
{

double factorial(int n)
{
  return n <= 1 ? 1.0 : n * factorial(n - 1);
}

// Integral of x^a y^b over the reference triangle (0,0), (1,0), (0,1).
double monomial_integral(int a, int b)
{
  return factorial(a) * factorial(b) / factorial(a + b + 2);
}

double rule_integral(QuadRule const & rule, int a, int b)
{
  // barycentric (l0, l1, l2) maps to x = l1, y = l2; weights sum to 1 = area 1/2
  double s = 0.0;
  for (std::size_t q = 0; q < rule.points.size(); ++q)
    s += rule.weights[q] * std::pow(rule.points[q][1], a) * std::pow(rule.points[q][2], b);
  return 0.5 * s;
}

} // namespace

TEST_CASE("every rule integrates monomials up to its degree")
{
  for (int degree = 0; degree <= 6; ++degree)
  {
    auto const & rule = quadrature_rule(degree);
    CHECK(rule.degree >= degree);
    double wsum = 0.0;
    for (double w : rule.weights)
      wsum += w;
    CHECK(wsum == doctest::Approx(1.0).epsilon(1e-15));
    for (int a = 0; a <= degree; ++a)
      for (int b = 0; a + b <= degree; ++b)
      {
        double const exact = monomial_integral(a, b);
        CAPTURE(degree);
        CAPTURE(a);
        CAPTURE(b);
        CHECK(std::abs(rule_integral(rule, a, b) - exact) <= 1e-14 * exact);
      }
  }
}

TEST_CASE("specific quadrature oracles")
{
  auto const & one = quadrature_rule(1);
  REQUIRE(one.points.size() == 1);
  CHECK(one.points[0][0] == doctest::Approx(1.0 / 3.0));
  CHECK(one.weights[0] == 1.0);
  // x^2 y^3: 2! 3! / 7! = 12 / 5040 = 1/420
  CHECK(rule_integral(quadrature_rule(5), 2, 3) == doctest::Approx(1.0 / 420.0).epsilon(1e-14));
  CHECK(default_quadrature_degree == 5);
  CHECK_THROWS_AS(quadrature_rule(7), ConfigError);
}
