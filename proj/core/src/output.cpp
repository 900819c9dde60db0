#include "pspde/output.hpp"

#include "pspde/error.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace pspde
{

void write_file_atomically(std::filesystem::path const & path, std::string_view contents)
{
  if (path.has_parent_path())
    std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out)
      throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out)
      throw std::runtime_error("write to " + tmp.string() + " failed");
  }
  std::filesystem::rename(tmp, path);
}

std::string format_double(double value)
{
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

void write_vtk(FEFunction const & velocity,
               FEFunction const & pressure,
               std::filesystem::path const & path,
               std::string const & title)
{
  auto const & vs = *velocity.space;
  auto const & ps = *pressure.space;
  if (vs.mesh_ptr() != ps.mesh_ptr())
    throw ConfigError("velocity and pressure live on different meshes");
  auto const & mesh = vs.mesh();

  std::ostringstream out;
  out.precision(17);
  out << "# vtk DataFile Version 3.0\n" << title << "\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  out << "POINTS " << mesh.n_vertices() << " double\n";
  for (auto const & p : mesh.vertices())
    out << p.x << ' ' << p.y << " 0\n";
  out << "CELLS " << mesh.n_triangles() << ' ' << 4 * mesh.n_triangles() << '\n';
  for (auto const & tri : mesh.triangles())
    out << "3 " << tri[0] << ' ' << tri[1] << ' ' << tri[2] << '\n';
  out << "CELL_TYPES " << mesh.n_triangles() << '\n';
  for (Index t = 0; t < mesh.n_triangles(); ++t)
    out << "5\n";
  // vertex dofs come first in every Lagrange space
  out << "POINT_DATA " << mesh.n_vertices() << '\n';
  out << "VECTORS velocity double\n";
  for (Index v = 0; v < mesh.n_vertices(); ++v)
    out << velocity.coefficients[vs.component_dof(0, v)] << ' '
        << velocity.coefficients[vs.component_dof(1, v)] << " 0\n";
  out << "SCALARS pressure double 1\nLOOKUP_TABLE default\n";
  for (Index v = 0; v < mesh.n_vertices(); ++v)
    out << pressure.coefficients[ps.component_dof(0, v)] << '\n';
  write_file_atomically(path, out.str());
}

CsvTable::CsvTable(std::vector<std::string> header)
  : header_(std::move(header))
{
}

void CsvTable::add_row(std::vector<std::string> cells)
{
  if (cells.size() != header_.size())
    throw std::logic_error("CSV row has " + std::to_string(cells.size()) + " cells, header has " +
                           std::to_string(header_.size()));
  rows_.push_back(std::move(cells));
}

std::string CsvTable::str() const
{
  std::ostringstream out;
  auto emit = [&out](std::vector<std::string> const & cells) {
    for (std::size_t i = 0; i < cells.size(); ++i)
      out << (i ? "," : "") << cells[i];
    out << '\n';
  };
  emit(header_);
  for (auto const & row : rows_)
    emit(row);
  return out.str();
}

void CsvTable::write(std::filesystem::path const & path) const
{
  write_file_atomically(path, str());
}

} // namespace pspde
