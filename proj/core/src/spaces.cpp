#include "pspde/spaces.hpp"

#include "pspde/assembly.hpp"
#include "pspde/error.hpp"
#include "pspde/output.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <fstream>
#include <sstream>
#include <string>

namespace pspde
{

ElementGeometry element_geometry(Mesh const & mesh, Index t)
{
  ElementGeometry g;
  auto const & tri = mesh.triangles()[t];
  for (int i = 0; i < 3; ++i)
    g.corners[i] = mesh.vertices()[tri[i]];
  auto const & p0 = g.corners[0];
  auto const & p1 = g.corners[1];
  auto const & p2 = g.corners[2];
  double const det = (p1.x - p0.x) * (p2.y - p0.y) - (p2.x - p0.x) * (p1.y - p0.y);
  g.area = 0.5 * det;
  // rows of the inverse Jacobian are the gradients of lambda_1 and lambda_2
  g.grad_lambda[1] = {(p2.y - p0.y) / det, -(p2.x - p0.x) / det};
  g.grad_lambda[2] = {-(p1.y - p0.y) / det, (p1.x - p0.x) / det};
  g.grad_lambda[0] = {-g.grad_lambda[1][0] - g.grad_lambda[2][0],
                      -g.grad_lambda[1][1] - g.grad_lambda[2][1]};
  return g;
}

void eval_basis(int degree, std::array<double, 3> const & l, std::span<double> values)
{
  if (degree == 1)
  {
    values[0] = l[0];
    values[1] = l[1];
    values[2] = l[2];
    return;
  }
  for (int i = 0; i < 3; ++i)
    values[i] = l[i] * (2.0 * l[i] - 1.0);
  for (int e = 0; e < 3; ++e)
    values[3 + e] = 4.0 * l[e] * l[(e + 1) % 3];
}

void eval_basis_gradients(int degree,
                          std::array<double, 3> const & l,
                          std::array<Vec2, 3> const & gl,
                          std::span<Vec2> gradients)
{
  if (degree == 1)
  {
    for (int i = 0; i < 3; ++i)
      gradients[i] = gl[i];
    return;
  }
  for (int i = 0; i < 3; ++i)
  {
    double const s = 4.0 * l[i] - 1.0;
    gradients[i] = {s * gl[i][0], s * gl[i][1]};
  }
  for (int e = 0; e < 3; ++e)
  {
    int const i = e;
    int const j = (e + 1) % 3;
    gradients[3 + e] = {4.0 * (l[j] * gl[i][0] + l[i] * gl[j][0]),
                        4.0 * (l[j] * gl[i][1] + l[i] * gl[j][1])};
  }
}

FunctionSpace::FunctionSpace(std::shared_ptr<Mesh const> mesh, int degree, int components)
  : mesh_(std::move(mesh))
  , degree_(degree)
  , components_(components)
{
  if (!mesh_)
    throw ConfigError("function space needs a mesh");
  if (degree != 1 && degree != 2)
    throw ConfigError("unsupported polynomial degree " + std::to_string(degree) + " (expected 1 or 2)");
  if (components != 1 && components != 2)
    throw ConfigError("unsupported component count " + std::to_string(components) + " (expected 1 or 2)");

  auto const & m = *mesh_;
  Index const nv = m.n_vertices();
  n_scalar_ = (degree == 1) ? nv : nv + m.n_edges();

  coordinates_.assign(m.vertices().begin(), m.vertices().end());
  if (degree == 2)
    for (auto const & e : m.edges())
    {
      auto const & a = m.vertices()[e[0]];
      auto const & b = m.vertices()[e[1]];
      coordinates_.push_back({0.5 * (a.x + b.x), 0.5 * (a.y + b.y)});
    }

  int const nl = local_dofs();
  cell_dofs_.resize(static_cast<std::size_t>(m.n_triangles()) * nl);
  for (Index t = 0; t < m.n_triangles(); ++t)
  {
    auto * d = cell_dofs_.data() + static_cast<std::size_t>(t) * nl;
    auto const & tri = m.triangles()[t];
    d[0] = tri[0];
    d[1] = tri[1];
    d[2] = tri[2];
    if (degree == 2)
    {
      auto const & te = m.triangle_edges(t);
      d[3] = nv + te[0];
      d[4] = nv + te[1];
      d[5] = nv + te[2];
    }
  }
}

SpacePtr build_space(std::shared_ptr<Mesh const> mesh, int degree, int components)
{
  return std::make_shared<FunctionSpace const>(std::move(mesh), degree, components);
}

FEFunction::FEFunction(SpacePtr s, Vector c)
  : space(std::move(s))
  , coefficients(std::move(c))
{
  if (coefficients.size() != space->n_dofs())
    throw ConfigError("coefficient vector length " + std::to_string(coefficients.size()) +
                      " does not match space dimension " + std::to_string(space->n_dofs()));
}

Vec2 FEFunction::value(Index t, std::array<double, 3> const & bary) const
{
  std::array<double, 6> phi{};
  eval_basis(space->degree(), bary, phi);
  auto const dofs = space->cell_dofs(t);
  Vec2 v{0.0, 0.0};
  for (int c = 0; c < space->components(); ++c)
    for (std::size_t i = 0; i < dofs.size(); ++i)
      v[c] += coefficients[space->component_dof(c, dofs[i])] * phi[i];
  return v;
}

Vec2 FEFunction::value(Point const & p) const
{
  auto const & mesh = space->mesh();
  double const tol = 1e-12;
  for (Index t = 0; t < mesh.n_triangles(); ++t)
  {
    auto const g = element_geometry(mesh, t);
    double const dx = p.x - g.corners[0].x;
    double const dy = p.y - g.corners[0].y;
    double const l1 = g.grad_lambda[1][0] * dx + g.grad_lambda[1][1] * dy;
    double const l2 = g.grad_lambda[2][0] * dx + g.grad_lambda[2][1] * dy;
    double const l0 = 1.0 - l1 - l2;
    if (l0 >= -tol && l1 >= -tol && l2 >= -tol)
      return value(t, {l0, l1, l2});
  }
  throw GeometryError("point (" + std::to_string(p.x) + ", " + std::to_string(p.y) + ") is outside the mesh");
}

FEFunction l2_project(SpacePtr const & space, VectorField const & target)
{
  auto const mass = mass_matrix(*space);
  auto const rhs = load_vector_static(*space, target);

  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(mass);
  if (solver.info() != Eigen::Success)
    throw SolverError("mass matrix factorization failed");
  Vector c = solver.solve(rhs);
  double const residual = (mass * c - rhs).norm();
  if (residual > 1e-12 * std::max(rhs.norm(), 1e-300) && residual > 1e-300)
  {
    // one step of iterative refinement before giving up
    c += solver.solve(rhs - mass * c);
    double const refined = (mass * c - rhs).norm();
    if (refined > 1e-12 * rhs.norm())
      throw SolverError("L2 projection residual too large", 1, refined);
  }
  return FEFunction(space, std::move(c));
}

FEFunction interpolate(SpacePtr const & space, VectorField const & target)
{
  FEFunction f(space);
  for (Index s = 0; s < space->n_scalar_dofs(); ++s)
  {
    auto const v = target(space->dof_coordinate(s));
    for (int c = 0; c < space->components(); ++c)
      f.coefficients[space->component_dof(c, s)] = v[c];
  }
  return f;
}

BoundarySpec BoundarySpec::homogeneous()
{
  BoundarySpec spec;
  spec.fallback = [](Point const &) { return Vec2{0.0, 0.0}; };
  return spec;
}

ConstraintSet dirichlet_constraints(FunctionSpace const & space, BoundarySpec const & spec)
{
  auto const & mesh = space.mesh();
  for (auto const & [tag, field] : spec.by_tag)
    if (!mesh.has_tag(tag))
      throw ConfigError("unknown boundary tag " + std::to_string(tag));

  // per scalar dof: (priority, field); fallback has priority -1
  constexpr long unset = -2;
  std::vector<long> priority(space.n_scalar_dofs(), unset);
  std::vector<VectorField const *> source(space.n_scalar_dofs(), nullptr);

  auto claim = [&](Index dof, long prio, VectorField const * field) {
    if (prio > priority[dof])
    {
      priority[dof] = prio;
      source[dof] = field;
    }
  };

  Index const nv = mesh.n_vertices();
  for (Index e = 0; e < mesh.n_edges(); ++e)
  {
    int const tag = mesh.edge_tag(e);
    if (tag < 0)
      continue;
    VectorField const * field = nullptr;
    long prio = -1;
    if (auto it = spec.by_tag.find(tag); it != spec.by_tag.end())
    {
      field = &it->second;
      prio = tag;
    }
    else if (spec.fallback)
      field = &*spec.fallback;
    else
      continue;

    auto const & ends = mesh.edges()[e];
    claim(ends[0], prio, field);
    claim(ends[1], prio, field);
    if (space.degree() == 2)
      claim(nv + e, prio, field);
  }

  ConstraintSet set;
  for (int c = 0; c < space.components(); ++c)
    for (Index s = 0; s < space.n_scalar_dofs(); ++s)
      if (source[s] != nullptr)
      {
        set.dofs.push_back(space.component_dof(c, s));
        set.values.push_back((*source[s])(space.dof_coordinate(s))[c]);
      }
  return set;
}

void write_fefunction(FEFunction const & f, std::filesystem::path const & path)
{
  std::ostringstream out;
  out.precision(17);
  out << "pspde-fefunction 1\n"
      << f.space->degree() << ' ' << f.space->components() << ' ' << f.space->n_dofs() << '\n';
  for (Eigen::Index i = 0; i < f.coefficients.size(); ++i)
    out << f.coefficients[i] << '\n';
  write_file_atomically(path, out.str());
}

FEFunction read_fefunction(SpacePtr const & space, std::filesystem::path const & path)
{
  std::ifstream in(path);
  if (!in)
    throw ParseError("cannot open " + path.string());
  std::string magic;
  int version = 0, degree = 0, components = 0;
  long n = 0;
  if (!(in >> magic >> version >> degree >> components >> n) || magic != "pspde-fefunction" || version != 1)
    throw ParseError("not a coefficient dump: " + path.string());
  if (degree != space->degree() || components != space->components() || n != space->n_dofs())
    throw ParseError("coefficient dump does not match the target space");
  Vector c(n);
  for (long i = 0; i < n; ++i)
    if (!(in >> c[i]))
      throw ParseError("truncated coefficient dump");
  return FEFunction(space, std::move(c));
}

} // namespace pspde
