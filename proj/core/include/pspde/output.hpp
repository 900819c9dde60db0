#pragma once

#include "pspde/spaces.hpp"

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace pspde
{

/// Writes to "<path>.tmp" and renames over `path`, so readers never see a
/// truncated file. Parent directories are created.
void write_file_atomically(std::filesystem::path const & path, std::string_view contents);

/// Legacy VTK ASCII unstructured grid on the mesh vertices: point data
/// "velocity" (3-vector, z = 0) and "pressure" (scalar).
void write_vtk(FEFunction const & velocity,
               FEFunction const & pressure,
               std::filesystem::path const & path,
               std::string const & title = "pspde snapshot");

/// Shortest round-trip representation of a double ("%.17g").
std::string format_double(double value);

/// Minimal CSV table writer with a fixed header.
class CsvTable
{
public:
  explicit CsvTable(std::vector<std::string> header);

  void add_row(std::vector<std::string> cells);
  std::string str() const;
  void write(std::filesystem::path const & path) const;
  std::size_t rows() const { return rows_.size(); }

private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

} // namespace pspde
