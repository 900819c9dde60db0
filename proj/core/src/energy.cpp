#include "pspde/error.hpp"
#include "pspde/schemes.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <initializer_list>

namespace pspde
{

double l2_norm_sq(SparseMatrix const & mass, Vector const & x)
{
  return x.dot(mass * x);
}

EnergyReport energy_ledger(Discretization const & d, State const & prev, State const & next, LedgerInputs const & in)
{
  EnergyReport r;
  r.m = next.m;
  r.t = next.t;

  Vector const & V = next.velocity.coefficients;
  Vector const & Vold = prev.velocity.coefficients;
  Vector const dV = V - Vold;
  Vector const & P = next.pressure.coefficients;
  Vector const & Pold = prev.pressure.coefficients;
  Vector const dP = P - Pold;

  double const v_old_sq = l2_norm_sq(d.mass_v, Vold);
  r.v_sq = l2_norm_sq(d.mass_v, V);
  r.dv_sq = l2_norm_sq(d.mass_v, dV);
  r.grad_v_sq = V.dot(d.stiffness_v * V);
  double const eps_p_old_sq = in.epsilon * l2_norm_sq(d.mass_p, Pold);
  r.eps_p_sq = in.epsilon * l2_norm_sq(d.mass_p, P);
  r.eps_dp_sq = in.epsilon * l2_norm_sq(d.mass_p, dP);
  r.work_f = in.load_f ? in.k * in.load_f->dot(V) : 0.0;
  r.work_noise = in.load_noise ? in.load_noise->dot(V) : 0.0;
  r.convection_term = in.wind ? in.k * trilinear_eval(*in.wind, next.velocity, next.velocity) : 0.0;
  r.pressure_mean = d.pressure_ones.dot(P);

  double const kinetic = 0.5 * (r.v_sq - v_old_sq + r.dv_sq);
  double const dissipation = in.k * in.nu * r.grad_v_sq;
  double const pressure = 0.5 * (r.eps_p_sq - eps_p_old_sq + r.eps_dp_sq);
  r.lhs = kinetic + dissipation + pressure + r.convection_term;
  r.rhs = r.work_f + r.work_noise;

  double scale = 0.0;
  for (double term : {0.5 * r.v_sq, 0.5 * v_old_sq, 0.5 * r.dv_sq, dissipation, 0.5 * r.eps_p_sq,
                      0.5 * eps_p_old_sq, 0.5 * r.eps_dp_sq, r.convection_term, r.work_f, r.work_noise})
    scale = std::max(scale, std::abs(term));
  double const gap = std::abs(r.lhs - r.rhs);
  r.residual = scale > 0.0 ? gap / scale : gap;
  return r;
}

double poincare_constant(FunctionSpace const & space)
{
  auto scalar = build_space(space.mesh_ptr(), space.degree(), 1);
  SparseMatrix const A = stiffness_matrix(*scalar);
  SparseMatrix const M = mass_matrix(*scalar);

  auto const boundary = dirichlet_constraints(*scalar, BoundarySpec::homogeneous());
  std::vector<Index> free_index(scalar->n_dofs(), -1);
  {
    std::vector<char> fixed(scalar->n_dofs(), 0);
    for (auto dof : boundary.dofs)
      fixed[dof] = 1;
    Index next = 0;
    for (Index i = 0; i < scalar->n_dofs(); ++i)
      if (!fixed[i])
        free_index[i] = next++;
    if (next == 0)
      throw GeometryError("no interior dofs for the Poincare estimate");
  }

  auto restrict_to_free = [&](SparseMatrix const & full) {
    std::vector<Eigen::Triplet<double>> trip;
    Index n = 0;
    for (Index r = 0; r < full.rows(); ++r)
    {
      if (free_index[r] < 0)
        continue;
      n = std::max(n, free_index[r] + 1);
      for (SparseMatrix::InnerIterator it(full, r); it; ++it)
        if (free_index[it.col()] >= 0)
          trip.emplace_back(free_index[r], free_index[it.col()], it.value());
    }
    Eigen::SparseMatrix<double> out(n, n);
    out.setFromTriplets(trip.begin(), trip.end());
    return out;
  };

  Eigen::SparseMatrix<double> const Af = restrict_to_free(A);
  Eigen::SparseMatrix<double> const Mf = restrict_to_free(M);
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(Af);
  if (ldlt.info() != Eigen::Success)
    throw SolverError("Dirichlet Laplacian factorization failed");

  Vector x = Vector::Ones(Af.rows());
  double lambda = 0.0;
  for (int it = 0; it < 1000; ++it)
  {
    x = ldlt.solve(Mf * x);
    x /= std::sqrt(x.dot(Mf * x));
    double const next = x.dot(Af * x);
    if (it > 0 && std::abs(next - lambda) <= 1e-13 * next)
    {
      lambda = next;
      break;
    }
    lambda = next;
  }
  return 1.0 / std::sqrt(lambda);
}

namespace
{

double l4_norm_fourth(FEFunction const & w)
{
  auto const & space = *w.space;
  auto const & rule = quadrature_rule(6);
  double total = 0.0;
  for (Index t = 0; t < space.mesh().n_triangles(); ++t)
  {
    double const area = space.mesh().area(t);
    double local = 0.0;
    for (std::size_t q = 0; q < rule.points.size(); ++q)
    {
      auto const v = w.value(t, rule.points[q]);
      double const s = v[0] * v[0] + v[1] * v[1];
      local += rule.weights[q] * s * s;
    }
    total += area * local;
  }
  return total;
}

struct MonotonicityTerms
{
  double viscous = 0.0;
  double convective = 0.0;
  double compensation = 0.0;
  double noise = 0.0;
};

MonotonicityTerms monotonicity_terms(FEFunction const & u, FEFunction const & w, double nu, NoiseModel const & noise)
{
  if (!u.space || u.space != w.space)
    throw ConfigError("monotonicity check needs u and w on the same space");
  FEFunction z(u.space, u.coefficients - w.coefficients);
  SparseMatrix const A = stiffness_matrix(*u.space);
  SparseMatrix const M = mass_matrix(*u.space);
  double const z_sq = l2_norm_sq(M, z.coefficients);
  double const lg = noise.lipschitz_constant();

  MonotonicityTerms t;
  t.viscous = nu * z.coefficients.dot(A * z.coefficients);
  t.convective = trilinear_eval(u, u, z) - trilinear_eval(w, w, z);
  t.compensation = 27.0 / (2.0 * nu * nu * nu) * l4_norm_fourth(w) * z_sq;
  t.noise = -lg * lg * z_sq;
  return t;
}

} // namespace

double monotonicity_check(FEFunction const & u,
                          FEFunction const & w,
                          double nu,
                          NoiseModel const & noise,
                          std::optional<double> poincare)
{
  double const lg = noise.lipschitz_constant();
  if (lg > 0.0)
  {
    double const cp = poincare ? *poincare : poincare_constant(*u.space);
    double const bound = std::sqrt(nu / (2.0 * cp * cp));
    if (lg > bound)
      throw ConfigError("noise Lipschitz constant " + std::to_string(lg) + " exceeds sqrt(nu / (2 C_P^2)) = " +
                        std::to_string(bound));
  }
  auto const t = monotonicity_terms(u, w, nu, noise);
  return t.viscous + t.convective + t.compensation + t.noise;
}

double monotonicity_scale(FEFunction const & u, FEFunction const & w, double nu, NoiseModel const & noise)
{
  auto const t = monotonicity_terms(u, w, nu, noise);
  return std::abs(t.viscous) + std::abs(t.convective) + std::abs(t.compensation) + std::abs(t.noise);
}

} // namespace pspde
