#pragma once

#include "pspde/mesh.hpp"
#include "pspde/quadrature.hpp"

#include <Eigen/Core>

#include <array>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <vector>

namespace pspde
{

using Vector = Eigen::VectorXd;
using Vec2 = std::array<double, 2>;

/// Pointwise evaluable vector field; scalar spaces read component 0.
using VectorField = std::function<Vec2(Point const &)>;

/// Affine map data of one triangle.
struct ElementGeometry
{
  double area = 0.0;
  std::array<Vec2, 3> grad_lambda{}; // gradients of the barycentric coordinates
  std::array<Point, 3> corners{};

  Point map(std::array<double, 3> const & bary) const
  {
    return {bary[0] * corners[0].x + bary[1] * corners[1].x + bary[2] * corners[2].x,
            bary[0] * corners[0].y + bary[1] * corners[1].y + bary[2] * corners[2].y};
  }
};

ElementGeometry element_geometry(Mesh const & mesh, Index t);

/// Number of scalar basis functions per triangle: 3 for P1, 6 for P2.
constexpr int local_dof_count(int degree) { return degree == 1 ? 3 : 6; }

/// Local Lagrange basis at a barycentric point. P2 ordering: three vertex
/// functions, then the edge functions of local edges (0,1), (1,2), (2,0).
void eval_basis(int degree, std::array<double, 3> const & bary, std::span<double> values);
void eval_basis_gradients(int degree,
                          std::array<double, 3> const & bary,
                          std::array<Vec2, 3> const & grad_lambda,
                          std::span<Vec2> gradients);

/// Scalar or vector Lagrange space on a mesh.
///
/// Scalar dofs: vertices first, then (P2) one dof per mesh edge in the mesh's
/// edge order. Vector dofs are component blocked: dof(c, s) = c * n_scalar + s.
class FunctionSpace
{
public:
  FunctionSpace(std::shared_ptr<Mesh const> mesh, int degree, int components);

  Mesh const & mesh() const { return *mesh_; }
  std::shared_ptr<Mesh const> const & mesh_ptr() const { return mesh_; }
  int degree() const { return degree_; }
  int components() const { return components_; }
  int local_dofs() const { return local_dof_count(degree_); }

  Index n_scalar_dofs() const { return n_scalar_; }
  Index n_dofs() const { return n_scalar_ * components_; }

  /// Scalar dof indices of triangle t, in local basis order.
  std::span<Index const> cell_dofs(Index t) const
  {
    return {cell_dofs_.data() + static_cast<std::size_t>(t) * local_dofs(),
            static_cast<std::size_t>(local_dofs())};
  }

  Index component_dof(int component, Index scalar_dof) const
  {
    return component * n_scalar_ + scalar_dof;
  }

  Point const & dof_coordinate(Index scalar_dof) const { return coordinates_[scalar_dof]; }

private:
  std::shared_ptr<Mesh const> mesh_;
  int degree_;
  int components_;
  Index n_scalar_ = 0;
  std::vector<Index> cell_dofs_;
  std::vector<Point> coordinates_;
};

using SpacePtr = std::shared_ptr<FunctionSpace const>;

SpacePtr build_space(std::shared_ptr<Mesh const> mesh, int degree, int components);

/// A finite element field: space plus coefficient vector.
struct FEFunction
{
  SpacePtr space;
  Vector coefficients;

  FEFunction() = default;
  explicit FEFunction(SpacePtr s)
    : space(std::move(s))
    , coefficients(Vector::Zero(space->n_dofs()))
  {
  }
  FEFunction(SpacePtr s, Vector c);

  /// Value inside triangle t at the given barycentric point.
  Vec2 value(Index t, std::array<double, 3> const & bary) const;
  /// Value at an arbitrary point; throws GeometryError outside the mesh.
  Vec2 value(Point const & p) const;
};

/// L2 orthogonal projection: solves M c = b with b_i = (target, phi_i).
FEFunction l2_project(SpacePtr const & space, VectorField const & target);

/// Nodal interpolation at the dof coordinates.
FEFunction interpolate(SpacePtr const & space, VectorField const & target);

/// Constrained dofs (sorted, unique) with prescribed values.
struct ConstraintSet
{
  std::vector<Index> dofs;
  std::vector<double> values;

  std::size_t size() const { return dofs.size(); }
  bool empty() const { return dofs.empty(); }
};

/// Dirichlet data keyed by boundary tag. Where dofs are shared between
/// edges of different listed tags, the larger tag wins. `fallback` applies
/// to every boundary edge whose tag is not listed and has lowest priority.
struct BoundarySpec
{
  std::map<int, VectorField> by_tag;
  std::optional<VectorField> fallback;

  static BoundarySpec homogeneous();
};

ConstraintSet dirichlet_constraints(FunctionSpace const & space, BoundarySpec const & spec);

/// Plain ASCII coefficient dump: header line, "degree components n_dofs", values.
void write_fefunction(FEFunction const & f, std::filesystem::path const & path);
FEFunction read_fefunction(SpacePtr const & space, std::filesystem::path const & path);

} // namespace pspde
