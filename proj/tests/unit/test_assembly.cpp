#include "helpers.hpp"

#include "pspde/error.hpp"

#include <Eigen/SparseCholesky>
#include <doctest.h>

#include <cmath>

using namespace pspde;
using testing::random_field;
using testing::unit_square;

namespace
{

std::shared_ptr<Mesh const> single_triangle(Point a, Point b, Point c)
{
  return std::make_shared<Mesh const>(Mesh({a, b, c}, {{0, 1, 2}}, {}));
}

Eigen::MatrixXd dense(SparseMatrix const & m)
{
  return Eigen::MatrixXd(m);
}

} // namespace

TEST_CASE("P1 element mass and stiffness")
{
  auto ref = build_space(single_triangle({0, 0}, {1, 0}, {0, 1}), 1, 1);
  Eigen::Matrix3d mass_oracle;
  mass_oracle << 2, 1, 1, 1, 2, 1, 1, 1, 2;
  mass_oracle *= 0.5 / 12.0;
  CHECK((dense(mass_matrix(*ref)) - mass_oracle).cwiseAbs().maxCoeff() <= 1e-13);

  Eigen::Matrix3d stiff_oracle;
  stiff_oracle << 1, -0.5, -0.5, -0.5, 0.5, 0, -0.5, 0, 0.5;
  CHECK((dense(stiffness_matrix(*ref)) - stiff_oracle).cwiseAbs().maxCoeff() <= 1e-13);

  // a general triangle: mass scales with the area only
  auto skew = build_space(single_triangle({0.3, -0.2}, {2.1, 0.4}, {0.9, 1.7}), 1, 1);
  double const area = skew->mesh().area(0);
  Eigen::Matrix3d general;
  general << 2, 1, 1, 1, 2, 1, 1, 1, 2;
  general *= area / 12.0;
  CHECK((dense(mass_matrix(*skew)) - general).cwiseAbs().maxCoeff() <= 1e-13);
}

TEST_CASE("mass and stiffness structure")
{
  auto mesh = std::make_shared<Mesh const>(generate_l_shape(2.0, 4));
  for (int degree : {1, 2})
    for (int comps : {1, 2})
    {
      auto space = build_space(mesh, degree, comps);
      auto const M = mass_matrix(*space);
      auto const A = stiffness_matrix(*space);
      CHECK(M.sum() == doctest::Approx(mesh->total_area() * comps).epsilon(1e-12));
      CHECK((dense(M) - dense(M).transpose()).cwiseAbs().maxCoeff() == 0.0);
      CHECK((dense(A) - dense(A).transpose()).cwiseAbs().maxCoeff() == 0.0);
      Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> llt{Eigen::SparseMatrix<double>(M)};
      CHECK(llt.info() == Eigen::Success);
      Vector const ones = Vector::Ones(space->n_dofs());
      CHECK((A * ones).lpNorm<Eigen::Infinity>() <= 1e-12);
      // x^T A x > 0 off the constants
      std::mt19937_64 rng(degree * 10 + comps);
      auto f = random_field(space, rng, false);
      Vector x = f.coefficients;
      for (int c = 0; c < comps; ++c)
      {
        auto block = x.segment(c * space->n_scalar_dofs(), space->n_scalar_dofs());
        block.array() -= block.mean();
      }
      CHECK(x.dot(A * x) > 0.0);
    }

  // P1 scalar mass row sums: patch area / 3
  auto p1 = build_space(mesh, 1, 1);
  Vector const rows = mass_matrix(*p1) * Vector::Ones(p1->n_dofs());
  std::vector<double> patch(mesh->n_vertices(), 0.0);
  for (Index t = 0; t < mesh->n_triangles(); ++t)
    for (Index v : mesh->triangles()[t])
      patch[v] += mesh->area(t) / 3.0;
  for (Index v = 0; v < mesh->n_vertices(); ++v)
    CHECK(rows[v] == doctest::Approx(patch[v]).epsilon(1e-13));
}

TEST_CASE("divergence matrix")
{
  auto mesh = unit_square(4);
  auto vel = build_space(mesh, 2, 2);
  auto pres = build_space(mesh, 1, 1);
  auto const B = divergence_matrix(*vel, *pres);
  CHECK(B.rows() == pres->n_dofs());
  CHECK(B.cols() == vel->n_dofs());

  auto constant = interpolate(vel, [](Point const &) { return Vec2{0.7, -1.3}; });
  CHECK((B * constant.coefficients).lpNorm<Eigen::Infinity>() <= 1e-12);

  auto stretch = interpolate(vel, [](Point const & p) { return Vec2{p.x, 0.0}; });
  Vector const ones = Vector::Ones(pres->n_dofs());
  CHECK(ones.dot(B * stretch.coefficients) == doctest::Approx(1.0).epsilon(1e-12));

  std::mt19937_64 rng(2);
  for (int s = 0; s < 10; ++s)
  {
    auto v = random_field(vel, rng, true);
    CHECK(std::abs(ones.dot(B * v.coefficients)) <= 1e-12);
  }

  auto other = build_space(unit_square(3), 1, 1);
  CHECK_THROWS_AS(divergence_matrix(*vel, *other), ConfigError);
}

TEST_CASE("gradient operator is the transpose of B")
{
  auto mesh = unit_square(3);
  auto vel = build_space(mesh, 2, 2);
  auto pres = build_space(mesh, 1, 1);
  auto const B = divergence_matrix(*vel, *pres);
  SparseMatrix const G(B.transpose());
  std::mt19937_64 rng(4);
  Vector p = Vector::Random(pres->n_dofs());
  auto v = random_field(vel, rng, false);
  // (p, div v) through both operators, bit-equal entries
  Eigen::MatrixXd const bt = dense(B).transpose();
  CHECK((dense(G) - bt).cwiseAbs().maxCoeff() == 0.0);
  CHECK(p.dot(B * v.coefficients) == doctest::Approx(v.coefficients.dot(G * p)).epsilon(1e-14));
}

TEST_CASE("convection matrix: zero wind, skew-symmetry, direct evaluation")
{
  auto mesh = unit_square(4);
  auto vel = build_space(mesh, 2, 2);
  ConvectionAssembler conv(vel);
  CHECK(conv.assemble(FEFunction(vel)).cwiseAbs().sum() == 0.0);

  std::mt19937_64 rng(9);
  for (int s = 0; s < 20; ++s)
  {
    auto w = random_field(vel, rng, false);
    auto z = random_field(vel, rng, true);
    auto const N = conv.assemble(w);
    double const zz = z.coefficients.dot(N * z.coefficients);
    CHECK(std::abs(zz) <= 1e-11 * (1.0 + testing::h1_norm(w)) * std::pow(testing::h1_norm(z), 2));

    auto v = random_field(vel, rng, false);
    double const direct = trilinear_eval(w, v, z);
    double const via_matrix = z.coefficients.dot(N * v.coefficients);
    CHECK(std::abs(direct - via_matrix) <= 1e-12 * std::max(1.0, std::abs(direct)));
  }
  CHECK(trilinear_eval(FEFunction(vel), random_field(vel, rng, false), random_field(vel, rng, false)) == 0.0);
}

TEST_CASE("trilinear form of polynomial fields")
{
  // u = (y, 0), v = (x^2, 0), w = (1, 0): int 2 x y = 1/2, div u = 0
  auto vel = build_space(unit_square(3), 2, 2);
  auto u = interpolate(vel, [](Point const & p) { return Vec2{p.y, 0.0}; });
  auto v = interpolate(vel, [](Point const & p) { return Vec2{p.x * p.x, 0.0}; });
  auto w = interpolate(vel, [](Point const &) { return Vec2{1.0, 0.0}; });
  CHECK(trilinear_eval(u, v, w) == doctest::Approx(0.5).epsilon(1e-13));

  // u = (x, 0): div u = 1, so b = int 2x*x + 1/2 int x^2 = 2/3 + 1/6
  auto s = interpolate(vel, [](Point const & p) { return Vec2{p.x, 0.0}; });
  CHECK(trilinear_eval(s, v, w) == doctest::Approx(5.0 / 6.0).epsilon(1e-13));
}

TEST_CASE("convection assembly is independent of the thread count")
{
  auto vel = build_space(std::make_shared<Mesh const>(generate_l_shape(5.0, 12)), 2, 2);
  std::mt19937_64 rng(1);
  auto w = random_field(vel, rng, false);
  auto const a = ConvectionAssembler(vel, 1).assemble(w);
  auto const b = ConvectionAssembler(vel, 4).assemble(w);
  REQUIRE(a.nonZeros() == b.nonZeros());
  for (Eigen::Index i = 0; i < a.nonZeros(); ++i)
    CHECK(a.valuePtr()[i] == b.valuePtr()[i]);
}

TEST_CASE("load vectors")
{
  auto vel = build_space(unit_square(3), 2, 2);
  auto const M = mass_matrix(*vel);
  CHECK(load_vector(*vel, [](double, Point const &) { return Vec2{0.0, 0.0}; }, 0.0, 0.1).norm() == 0.0);

  auto one = interpolate(vel, [](Point const &) { return Vec2{1.0, 0.0}; });
  Vector const expected = M * one.coefficients;
  Vector const constant = load_vector(*vel, [](double, Point const &) { return Vec2{1.0, 0.0}; }, 0.0, 0.1);
  CHECK((constant - expected).lpNorm<Eigen::Infinity>() <= 1e-14);

  // f = t (1, 0) averaged over [0.2, 0.5] -> 0.35 (1, 0)
  Vector const ramp = load_vector(*vel, [](double t, Point const &) { return Vec2{t, 0.0}; }, 0.2, 0.5);
  CHECK((ramp - 0.35 * expected).lpNorm<Eigen::Infinity>() <= 1e-14);

  Vector const stat = load_vector_static(*vel, [](Point const &) { return Vec2{1.0, 0.0}; });
  CHECK((stat - expected).lpNorm<Eigen::Infinity>() <= 1e-14);
}

TEST_CASE("matrix market export")
{
  auto space = build_space(unit_square(1), 1, 1);
  auto path = testing::temp_path("m.mtx");
  write_matrix_market(mass_matrix(*space), path);
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header == "%%MatrixMarket matrix coordinate real general");
  int rows = 0, cols = 0, nnz = 0;
  in >> rows >> cols >> nnz;
  CHECK(rows == 4);
  CHECK(cols == 4);
  CHECK(nnz == mass_matrix(*space).nonZeros());
}
