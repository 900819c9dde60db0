#include "pspde/assembly.hpp"

#include "pspde/error.hpp"
#include "pspde/output.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>
#include <thread>

namespace pspde
{

namespace
{

struct Tabulation
{
  int nl = 0;
  QuadRule const * rule = nullptr;
  std::vector<std::array<double, 6>> values; // per quadrature point
};

Tabulation tabulate(int degree, int quad_degree = default_quadrature_degree)
{
  Tabulation tab;
  tab.nl = local_dof_count(degree);
  tab.rule = &quadrature_rule(quad_degree);
  tab.values.resize(tab.rule->size());
  for (std::size_t q = 0; q < tab.rule->size(); ++q)
    eval_basis(degree, tab.rule->points[q], tab.values[q]);
  return tab;
}

using LocalMatrix = std::array<double, 36>;

void check_same_mesh(FunctionSpace const & a, FunctionSpace const & b)
{
  if (a.mesh_ptr() != b.mesh_ptr())
    throw ConfigError("function spaces are defined on different meshes");
}

} // namespace

void parallel_for(std::size_t n, int threads, std::function<void(std::size_t)> const & body)
{
  std::size_t const workers = std::min<std::size_t>(std::max(threads, 1), n);
  if (workers <= 1)
  {
    for (std::size_t i = 0; i < n; ++i)
      body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  auto worker = [&] {
    for (;;)
    {
      std::size_t const i = next.fetch_add(1);
      if (i >= n || failed.load())
        return;
      try
      {
        body(i);
      }
      catch (...)
      {
        if (!failed.exchange(true))
          failure = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back(worker);
  for (auto & t : pool)
    t.join();
  if (failure)
    std::rethrow_exception(failure);
}

ScalarPattern::ScalarPattern(FunctionSpace const & space)
  : n_(space.n_scalar_dofs())
  , nl_(space.local_dofs())
{
  auto const & mesh = space.mesh();
  std::vector<std::vector<Index>> rows(n_);
  for (Index t = 0; t < mesh.n_triangles(); ++t)
  {
    auto const dofs = space.cell_dofs(t);
    for (auto r : dofs)
      for (auto c : dofs)
        rows[r].push_back(c);
  }
  row_offsets_.assign(n_ + 1, 0);
  for (Index r = 0; r < n_; ++r)
  {
    auto & row = rows[r];
    std::sort(row.begin(), row.end());
    row.erase(std::unique(row.begin(), row.end()), row.end());
    row_offsets_[r + 1] = row_offsets_[r] + static_cast<Index>(row.size());
  }
  columns_.reserve(row_offsets_.back());
  for (auto const & row : rows)
    columns_.insert(columns_.end(), row.begin(), row.end());

  slots_.resize(static_cast<std::size_t>(mesh.n_triangles()) * nl_ * nl_);
  for (Index t = 0; t < mesh.n_triangles(); ++t)
  {
    auto const dofs = space.cell_dofs(t);
    for (int i = 0; i < nl_; ++i)
    {
      auto const begin = columns_.begin() + row_offsets_[dofs[i]];
      auto const end = columns_.begin() + row_offsets_[dofs[i] + 1];
      for (int j = 0; j < nl_; ++j)
      {
        auto const it = std::lower_bound(begin, end, dofs[j]);
        slots_[(static_cast<std::size_t>(t) * nl_ + i) * nl_ + j] =
            static_cast<Index>(it - columns_.begin());
      }
    }
  }
}

SparseMatrix ScalarPattern::to_matrix(std::vector<double> const & values) const
{
  SparseMatrix m(n_, n_);
  m.reserve(static_cast<Eigen::Index>(nnz()));
  for (Index r = 0; r < n_; ++r)
  {
    m.startVec(r);
    for (Index k = row_offsets_[r]; k < row_offsets_[r + 1]; ++k)
      m.insertBackByOuterInner(r, columns_[k]) = values[k];
  }
  m.finalize();
  return m;
}

SparseMatrix block_diagonal(SparseMatrix const & scalar, int components)
{
  if (components == 1)
    return scalar;
  auto const n = scalar.rows();
  SparseMatrix out(n * components, scalar.cols() * components);
  out.reserve(scalar.nonZeros() * components);
  for (int c = 0; c < components; ++c)
    for (Eigen::Index r = 0; r < n; ++r)
    {
      out.startVec(c * n + r);
      for (SparseMatrix::InnerIterator it(scalar, r); it; ++it)
        out.insertBackByOuterInner(c * n + r, c * scalar.cols() + it.col()) = it.value();
    }
  out.finalize();
  return out;
}

namespace
{

// Assemble a scalar matrix from per-triangle local matrices, in triangle order.
template <typename LocalFn>
SparseMatrix assemble_scalar(FunctionSpace const & space, LocalFn && local, int threads = 1)
{
  ScalarPattern const pattern(space);
  auto const nt = static_cast<std::size_t>(space.mesh().n_triangles());
  int const nl = space.local_dofs();
  std::vector<LocalMatrix> locals(nt);
  parallel_for(nt, threads, [&](std::size_t t) { locals[t] = local(static_cast<Index>(t)); });
  std::vector<double> values(pattern.nnz(), 0.0);
  for (std::size_t t = 0; t < nt; ++t)
    for (int i = 0; i < nl; ++i)
      for (int j = 0; j < nl; ++j)
        values[pattern.slot(static_cast<Index>(t), i, j)] += locals[t][i * nl + j];
  return pattern.to_matrix(values);
}

} // namespace

SparseMatrix mass_matrix(FunctionSpace const & space)
{
  auto const tab = tabulate(space.degree());
  int const nl = tab.nl;
  auto const scalar = assemble_scalar(space, [&](Index t) {
    LocalMatrix loc{};
    double const area = space.mesh().area(t);
    for (std::size_t q = 0; q < tab.rule->size(); ++q)
    {
      double const w = tab.rule->weights[q] * area;
      auto const & phi = tab.values[q];
      for (int i = 0; i < nl; ++i)
        for (int j = 0; j < nl; ++j)
          loc[i * nl + j] += w * (phi[i] * phi[j]);
    }
    return loc;
  });
  return block_diagonal(scalar, space.components());
}

SparseMatrix stiffness_matrix(FunctionSpace const & space)
{
  auto const tab = tabulate(space.degree());
  int const nl = tab.nl;
  auto const scalar = assemble_scalar(space, [&](Index t) {
    LocalMatrix loc{};
    auto const g = element_geometry(space.mesh(), t);
    std::array<Vec2, 6> grad{};
    for (std::size_t q = 0; q < tab.rule->size(); ++q)
    {
      double const w = tab.rule->weights[q] * g.area;
      eval_basis_gradients(space.degree(), tab.rule->points[q], g.grad_lambda, grad);
      for (int i = 0; i < nl; ++i)
        for (int j = 0; j < nl; ++j)
          loc[i * nl + j] += w * (grad[i][0] * grad[j][0] + grad[i][1] * grad[j][1]);
    }
    return loc;
  });
  return block_diagonal(scalar, space.components());
}

SparseMatrix divergence_matrix(FunctionSpace const & velocity, FunctionSpace const & pressure)
{
  check_same_mesh(velocity, pressure);
  if (velocity.components() != 2 || pressure.components() != 1)
    throw ConfigError("divergence matrix needs a vector velocity space and a scalar pressure space");

  auto const & rule = quadrature_rule(default_quadrature_degree);
  int const nlv = velocity.local_dofs();
  int const nlp = pressure.local_dofs();
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(velocity.mesh().n_triangles()) * nlv * nlp * 2);
  std::array<Vec2, 6> grad{};
  std::array<double, 6> chi{};
  for (Index t = 0; t < velocity.mesh().n_triangles(); ++t)
  {
    auto const g = element_geometry(velocity.mesh(), t);
    std::array<double, 2 * 6 * 6> loc{}; // [c][q_local][v_local]
    for (std::size_t q = 0; q < rule.size(); ++q)
    {
      double const w = rule.weights[q] * g.area;
      eval_basis_gradients(velocity.degree(), rule.points[q], g.grad_lambda, grad);
      eval_basis(pressure.degree(), rule.points[q], chi);
      for (int c = 0; c < 2; ++c)
        for (int a = 0; a < nlp; ++a)
          for (int b = 0; b < nlv; ++b)
            loc[(c * 6 + a) * 6 + b] += w * grad[b][c] * chi[a];
    }
    auto const vd = velocity.cell_dofs(t);
    auto const pd = pressure.cell_dofs(t);
    for (int c = 0; c < 2; ++c)
      for (int a = 0; a < nlp; ++a)
        for (int b = 0; b < nlv; ++b)
          triplets.emplace_back(pd[a], velocity.component_dof(c, vd[b]), loc[(c * 6 + a) * 6 + b]);
  }
  SparseMatrix B(pressure.n_dofs(), velocity.n_dofs());
  B.setFromTriplets(triplets.begin(), triplets.end());
  return B;
}

ConvectionAssembler::ConvectionAssembler(SpacePtr velocity, int threads)
  : space_(std::move(velocity))
  , pattern_(*space_)
  , threads_(threads)
{
  if (space_->components() != 2)
    throw ConfigError("convection needs a vector velocity space");
}

SparseMatrix ConvectionAssembler::assemble(FEFunction const & wind) const
{
  auto const & space = *space_;
  if (wind.space->mesh_ptr() != space.mesh_ptr() || wind.space->degree() != space.degree() ||
      wind.space->components() != 2)
    throw ConfigError("convection wind must live in the velocity space");

  auto const tab = tabulate(space.degree());
  int const nl = tab.nl;
  auto const nt = static_cast<std::size_t>(space.mesh().n_triangles());
  auto const & coef = wind.coefficients;

  std::vector<LocalMatrix> locals(nt);
  parallel_for(nt, threads_, [&](std::size_t ti) {
    auto const t = static_cast<Index>(ti);
    auto const g = element_geometry(space.mesh(), t);
    auto const dofs = space.cell_dofs(t);
    std::array<double, 6> wx{}, wy{};
    for (int k = 0; k < nl; ++k)
    {
      wx[k] = coef[space.component_dof(0, dofs[k])];
      wy[k] = coef[space.component_dof(1, dofs[k])];
    }
    LocalMatrix loc{};
    std::array<Vec2, 6> grad{};
    for (std::size_t q = 0; q < tab.rule->size(); ++q)
    {
      double const w = tab.rule->weights[q] * g.area;
      auto const & phi = tab.values[q];
      eval_basis_gradients(space.degree(), tab.rule->points[q], g.grad_lambda, grad);
      double ux = 0.0, uy = 0.0, div = 0.0;
      for (int k = 0; k < nl; ++k)
      {
        ux += wx[k] * phi[k];
        uy += wy[k] * phi[k];
        div += wx[k] * grad[k][0] + wy[k] * grad[k][1];
      }
      for (int i = 0; i < nl; ++i)
        for (int j = 0; j < nl; ++j)
          loc[i * nl + j] += w * phi[i] * (ux * grad[j][0] + uy * grad[j][1] + 0.5 * div * phi[j]);
    }
    locals[ti] = loc;
  });

  std::vector<double> values(pattern_.nnz(), 0.0);
  for (std::size_t t = 0; t < nt; ++t)
    for (int i = 0; i < nl; ++i)
      for (int j = 0; j < nl; ++j)
        values[pattern_.slot(static_cast<Index>(t), i, j)] += locals[t][i * nl + j];
  return block_diagonal(pattern_.to_matrix(values), 2);
}

SparseMatrix convection_matrix(SpacePtr const & velocity, FEFunction const & wind)
{
  return ConvectionAssembler(velocity).assemble(wind);
}

double trilinear_eval(FEFunction const & u, FEFunction const & v, FEFunction const & w)
{
  auto const & space = *u.space;
  for (auto const * f : {&v, &w})
    if (f->space->mesh_ptr() != space.mesh_ptr() || f->space->degree() != space.degree() ||
        f->space->components() != 2)
      throw ConfigError("trilinear form arguments must share one vector space");

  auto const & rule = quadrature_rule(default_quadrature_degree);
  int const nl = space.local_dofs();
  double total = 0.0;
  std::array<double, 6> phi{};
  std::array<Vec2, 6> grad{};
  for (Index t = 0; t < space.mesh().n_triangles(); ++t)
  {
    auto const g = element_geometry(space.mesh(), t);
    auto const dofs = space.cell_dofs(t);
    double cell = 0.0;
    for (std::size_t q = 0; q < rule.size(); ++q)
    {
      eval_basis(space.degree(), rule.points[q], phi);
      eval_basis_gradients(space.degree(), rule.points[q], g.grad_lambda, grad);
      Vec2 uu{}, vv{}, ww{};
      std::array<Vec2, 2> grad_v{}; // grad_v[c] = gradient of component c of v
      double div_u = 0.0;
      for (int k = 0; k < nl; ++k)
        for (int c = 0; c < 2; ++c)
        {
          auto const d = space.component_dof(c, dofs[k]);
          uu[c] += u.coefficients[d] * phi[k];
          vv[c] += v.coefficients[d] * phi[k];
          ww[c] += w.coefficients[d] * phi[k];
          grad_v[c][0] += v.coefficients[d] * grad[k][0];
          grad_v[c][1] += v.coefficients[d] * grad[k][1];
          div_u += u.coefficients[d] * grad[k][c];
        }
      double value = 0.0;
      for (int c = 0; c < 2; ++c)
        value += (uu[0] * grad_v[c][0] + uu[1] * grad_v[c][1]) * ww[c] + 0.5 * div_u * vv[c] * ww[c];
      cell += rule.weights[q] * value;
    }
    total += g.area * cell;
  }
  return total;
}

Vector load_vector_static(FunctionSpace const & space, VectorField const & f)
{
  auto const tab = tabulate(space.degree());
  Vector b = Vector::Zero(space.n_dofs());
  for (Index t = 0; t < space.mesh().n_triangles(); ++t)
  {
    auto const g = element_geometry(space.mesh(), t);
    auto const dofs = space.cell_dofs(t);
    for (std::size_t q = 0; q < tab.rule->size(); ++q)
    {
      double const w = tab.rule->weights[q] * g.area;
      auto const value = f(g.map(tab.rule->points[q]));
      for (int c = 0; c < space.components(); ++c)
        for (int i = 0; i < tab.nl; ++i)
          b[space.component_dof(c, dofs[i])] += w * value[c] * tab.values[q][i];
    }
  }
  return b;
}

Vector load_vector(FunctionSpace const & space, TimeField const & f, double t_start, double t_end)
{
  double const mid = 0.5 * (t_start + t_end);
  double const half = 0.5 * (t_end - t_start);
  double const offset = half / std::sqrt(3.0);
  double const t1 = mid - offset;
  double const t2 = mid + offset;
  return load_vector_static(space, [&](Point const & p) {
    auto const a = f(t1, p);
    auto const b = f(t2, p);
    return Vec2{0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])};
  });
}

Vector basis_integrals(FunctionSpace const & scalar_space)
{
  return load_vector_static(scalar_space, [](Point const &) { return Vec2{1.0, 1.0}; })
      .head(scalar_space.n_scalar_dofs());
}

void write_matrix_market(SparseMatrix const & matrix, std::filesystem::path const & path)
{
  std::ostringstream out;
  out.precision(17);
  out << "%%MatrixMarket matrix coordinate real general\n";
  out << matrix.rows() << ' ' << matrix.cols() << ' ' << matrix.nonZeros() << '\n';
  for (Eigen::Index r = 0; r < matrix.outerSize(); ++r)
    for (SparseMatrix::InnerIterator it(matrix, r); it; ++it)
      out << it.row() + 1 << ' ' << it.col() + 1 << ' ' << it.value() << '\n';
  write_file_atomically(path, out.str());
}

} // namespace pspde
