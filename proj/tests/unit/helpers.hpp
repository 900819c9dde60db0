#pragma once

#include "pspde/assembly.hpp"
#include "pspde/mesh.hpp"
#include "pspde/spaces.hpp"

#include <filesystem>
#include <fstream>
#include <memory>
#include <random>
#include <string>

namespace testing
{

using namespace pspde;

inline std::shared_ptr<Mesh const> unit_square(int n)
{
  return std::make_shared<Mesh const>(generate_rect_mesh(n, n));
}

/// Random coefficients; boundary dofs zeroed when `zero_boundary`.
inline FEFunction random_field(SpacePtr const & space, std::mt19937_64 & rng, bool zero_boundary)
{
  std::normal_distribution<double> g;
  FEFunction f(space);
  for (Index i = 0; i < space->n_dofs(); ++i)
    f.coefficients[i] = g(rng);
  if (zero_boundary)
    for (auto d : dirichlet_constraints(*space, BoundarySpec::homogeneous()).dofs)
      f.coefficients[d] = 0.0;
  return f;
}

inline double h1_norm(FEFunction const & f)
{
  auto const M = mass_matrix(*f.space);
  auto const A = stiffness_matrix(*f.space);
  return std::sqrt(f.coefficients.dot(M * f.coefficients) + f.coefficients.dot(A * f.coefficients));
}

inline std::filesystem::path temp_path(std::string const & name)
{
  auto dir = std::filesystem::temp_directory_path() / "pspde_tests";
  std::filesystem::create_directories(dir);
  return dir / name;
}

inline void write_text(std::filesystem::path const & p, std::string const & text)
{
  std::ofstream(p) << text;
}

} // namespace testing
