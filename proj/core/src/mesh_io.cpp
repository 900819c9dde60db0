#include "pspde/error.hpp"
#include "pspde/mesh.hpp"
#include "pspde/output.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <unordered_map>

namespace pspde
{

namespace
{

std::ifstream open_for_reading(std::filesystem::path const & path)
{
  std::ifstream in(path);
  if (!in)
    throw ParseError("cannot open " + path.string());
  return in;
}

// Advance to the line holding exactly `marker`; false at EOF.
bool seek_section(std::istream & in, std::string const & marker)
{
  std::string line;
  while (std::getline(in, line))
  {
    if (!line.empty() && line.back() == '\r')
      line.pop_back();
    if (line == marker)
      return true;
  }
  return false;
}

template <typename T>
T read_value(std::istream & in, char const * what)
{
  T value{};
  if (!(in >> value))
    throw ParseError(std::string("malformed or truncated input while reading ") + what);
  return value;
}

} // namespace

Mesh load_msh(std::filesystem::path const & path)
{
  auto in = open_for_reading(path);

  if (!seek_section(in, "$MeshFormat"))
    throw ParseError("missing $MeshFormat section");
  auto const version = read_value<std::string>(in, "MSH version");
  auto const file_type = read_value<int>(in, "MSH file type");
  read_value<int>(in, "MSH data size");
  if (version.rfind("2.", 0) != 0)
    throw ParseError("unsupported MSH version " + version + " (expected 2.2)");
  if (file_type != 0)
    throw ParseError("binary MSH files are not supported");

  in.clear();
  in.seekg(0);
  if (!seek_section(in, "$Nodes"))
    throw ParseError("missing $Nodes section");
  auto const n_nodes = read_value<long>(in, "node count");
  std::unordered_map<long, std::size_t> node_pos;
  std::vector<Point> nodes;
  std::vector<long> node_ids;
  nodes.reserve(n_nodes);
  for (long i = 0; i < n_nodes; ++i)
  {
    auto const id = read_value<long>(in, "node id");
    auto const x = read_value<double>(in, "node x");
    auto const y = read_value<double>(in, "node y");
    auto const z = read_value<double>(in, "node z");
    if (std::abs(z) > 1e-12)
      throw GeometryError("node " + std::to_string(id) + " has nonzero z = " + std::to_string(z));
    node_pos[id] = nodes.size();
    node_ids.push_back(id);
    nodes.push_back({x, y});
  }

  in.clear();
  in.seekg(0);
  if (!seek_section(in, "$Elements"))
    throw ParseError("missing $Elements section");
  auto const n_elements = read_value<long>(in, "element count");

  auto lookup = [&](long id) {
    auto it = node_pos.find(id);
    if (it == node_pos.end())
      throw ParseError("element references unknown node " + std::to_string(id));
    return it->second;
  };

  std::vector<std::array<std::size_t, 3>> raw_triangles;
  std::vector<std::pair<std::array<std::size_t, 2>, int>> raw_lines;
  for (long e = 0; e < n_elements; ++e)
  {
    read_value<long>(in, "element id");
    auto const type = read_value<int>(in, "element type");
    auto const n_tags = read_value<int>(in, "element tag count");
    int physical = 0;
    for (int t = 0; t < n_tags; ++t)
    {
      auto const tag = read_value<int>(in, "element tag");
      if (t == 0)
        physical = tag;
    }
    switch (type)
    {
    case 1: {
      auto const a = lookup(read_value<long>(in, "line node"));
      auto const b = lookup(read_value<long>(in, "line node"));
      raw_lines.push_back({{a, b}, physical});
      break;
    }
    case 2: {
      std::array<std::size_t, 3> tri{};
      for (auto & v : tri)
        v = lookup(read_value<long>(in, "triangle node"));
      raw_triangles.push_back(tri);
      break;
    }
    case 15:
      read_value<long>(in, "point node");
      break;
    default:
      throw ParseError("unsupported element type " + std::to_string(type));
    }
  }

  // keep only nodes referenced by triangles, in file order
  std::vector<Index> renumber(nodes.size(), -1);
  for (auto const & tri : raw_triangles)
    for (auto v : tri)
      renumber[v] = 0;
  std::vector<Point> vertices;
  for (std::size_t i = 0; i < nodes.size(); ++i)
    if (renumber[i] == 0)
    {
      renumber[i] = static_cast<Index>(vertices.size());
      vertices.push_back(nodes[i]);
    }

  std::vector<Triangle> triangles;
  triangles.reserve(raw_triangles.size());
  for (auto const & tri : raw_triangles)
    triangles.push_back({renumber[tri[0]], renumber[tri[1]], renumber[tri[2]]});

  std::vector<BoundaryEdge> boundary;
  for (auto const & [ends, tag] : raw_lines)
  {
    if (renumber[ends[0]] < 0 || renumber[ends[1]] < 0)
      throw ParseError("line element references a node outside every triangle");
    boundary.push_back({{renumber[ends[0]], renumber[ends[1]]}, tag});
  }

  return Mesh(std::move(vertices), std::move(triangles), std::move(boundary));
}

void write_msh(Mesh const & mesh, std::filesystem::path const & path)
{
  std::ostringstream out;
  out.precision(17);
  out << "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n";
  out << "$Nodes\n" << mesh.n_vertices() << '\n';
  for (Index i = 0; i < mesh.n_vertices(); ++i)
  {
    auto const & p = mesh.vertices()[i];
    out << i + 1 << ' ' << p.x << ' ' << p.y << " 0\n";
  }
  out << "$EndNodes\n";
  auto const boundary = mesh.boundary_edges();
  out << "$Elements\n" << boundary.size() + mesh.triangles().size() << '\n';
  long id = 1;
  for (auto const & be : boundary)
    out << id++ << " 1 2 " << be.tag << ' ' << be.tag << ' ' << be.v[0] + 1 << ' ' << be.v[1] + 1 << '\n';
  for (auto const & tri : mesh.triangles())
    out << id++ << " 2 2 0 0 " << tri[0] + 1 << ' ' << tri[1] + 1 << ' ' << tri[2] + 1 << '\n';
  out << "$EndElements\n";
  write_file_atomically(path, out.str());
}

void write_native_mesh(Mesh const & mesh, std::filesystem::path const & path)
{
  std::ostringstream out;
  out.precision(17);
  out << "pspde-mesh 1\n";
  out << mesh.n_vertices() << '\n';
  for (auto const & p : mesh.vertices())
    out << p.x << ' ' << p.y << '\n';
  out << mesh.n_triangles() << '\n';
  for (auto const & tri : mesh.triangles())
    out << tri[0] << ' ' << tri[1] << ' ' << tri[2] << '\n';
  out << mesh.boundary_edges().size() << '\n';
  for (auto const & be : mesh.boundary_edges())
    out << be.v[0] << ' ' << be.v[1] << ' ' << be.tag << '\n';
  write_file_atomically(path, out.str());
}

Mesh read_native_mesh(std::filesystem::path const & path)
{
  auto in = open_for_reading(path);
  auto const magic = read_value<std::string>(in, "header");
  auto const version = read_value<int>(in, "header version");
  if (magic != "pspde-mesh" || version != 1)
    throw ParseError("not a native mesh file: " + path.string());

  std::vector<Point> vertices(read_value<std::size_t>(in, "vertex count"));
  for (auto & p : vertices)
  {
    p.x = read_value<double>(in, "vertex x");
    p.y = read_value<double>(in, "vertex y");
  }
  std::vector<Triangle> triangles(read_value<std::size_t>(in, "triangle count"));
  for (auto & tri : triangles)
    for (auto & v : tri)
      v = read_value<Index>(in, "triangle vertex");
  std::vector<BoundaryEdge> boundary(read_value<std::size_t>(in, "boundary edge count"));
  for (auto & be : boundary)
  {
    be.v[0] = read_value<Index>(in, "edge vertex");
    be.v[1] = read_value<Index>(in, "edge vertex");
    be.tag = read_value<int>(in, "edge tag");
  }
  return Mesh(std::move(vertices), std::move(triangles), std::move(boundary));
}

} // namespace pspde
