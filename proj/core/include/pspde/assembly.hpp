#pragma once

#include "pspde/spaces.hpp"

#include <Eigen/SparseCore>

#include <filesystem>
#include <functional>
#include <vector>

namespace pspde
{

/// Compressed-row matrix; indices strictly increasing within each row.
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// f(t, x), used for time-dependent forcing.
using TimeField = std::function<Vec2(double, Point const &)>;

/// Sparsity pattern of a scalar space plus, for every triangle, the slot in
/// the value array that receives each local (i, j) contribution. Filling the
/// values in triangle order makes assembly bitwise reproducible.
class ScalarPattern
{
public:
  explicit ScalarPattern(FunctionSpace const & space);

  Index n() const { return n_; }
  std::vector<Index> const & row_offsets() const { return row_offsets_; }
  std::vector<Index> const & columns() const { return columns_; }
  std::size_t nnz() const { return columns_.size(); }

  /// Value slot of local entry (i, j) of triangle t.
  Index slot(Index t, int i, int j) const
  {
    return slots_[(static_cast<std::size_t>(t) * nl_ + i) * nl_ + j];
  }

  /// Build an n x n scalar matrix from a value array laid out on this pattern.
  SparseMatrix to_matrix(std::vector<double> const & values) const;

private:
  Index n_ = 0;
  int nl_ = 0;
  std::vector<Index> row_offsets_;
  std::vector<Index> columns_;
  std::vector<Index> slots_;
};

/// block_diag(scalar, ..., scalar) with `components` copies.
SparseMatrix block_diagonal(SparseMatrix const & scalar, int components);

/// L2 inner-product matrix (phi_j, phi_i).
SparseMatrix mass_matrix(FunctionSpace const & space);

/// (grad phi_j, grad phi_i); for vector spaces the componentwise sum.
SparseMatrix stiffness_matrix(FunctionSpace const & space);

/// B[q, phi] = (div phi, q), shape n_pressure x n_velocity. The same matrix,
/// transposed, is the discrete pressure gradient in the momentum equation.
SparseMatrix divergence_matrix(FunctionSpace const & velocity, FunctionSpace const & pressure);

/// Assembles N(w)[i, j] = b(w, phi_j, phi_i) with
/// b(u, v, w) = ([u . grad] v, w) + 1/2 ([div u] v, w).
/// The sparsity pattern is built once; each call only refills values.
class ConvectionAssembler
{
public:
  explicit ConvectionAssembler(SpacePtr velocity, int threads = 1);

  SparseMatrix assemble(FEFunction const & wind) const;
  FunctionSpace const & space() const { return *space_; }

private:
  SpacePtr space_;
  ScalarPattern pattern_;
  int threads_;
};

SparseMatrix convection_matrix(SpacePtr const & velocity, FEFunction const & wind);

/// b(u, v, w) by direct quadrature of the three fields, without forming N.
double trilinear_eval(FEFunction const & u, FEFunction const & v, FEFunction const & w);

/// Entries (f, phi_i) for a time-independent field.
Vector load_vector_static(FunctionSpace const & space, VectorField const & f);

/// Entries (f^m, phi_i) with f^m the time average of f over [t_start, t_end],
/// computed by 2-point Gauss in time (exact for f affine in t).
Vector load_vector(FunctionSpace const & space, TimeField const & f, double t_start, double t_end);

/// Entries (r, 1) of each scalar basis function: the constant-mode pairing.
Vector basis_integrals(FunctionSpace const & scalar_space);

/// Matrix Market coordinate export, 1-based, general real.
void write_matrix_market(SparseMatrix const & matrix, std::filesystem::path const & path);

/// Runs body(i) for i in [0, n) on up to `threads` workers. Work is claimed
/// dynamically; callers must write results to per-index slots.
void parallel_for(std::size_t n, int threads, std::function<void(std::size_t)> const & body);

} // namespace pspde
