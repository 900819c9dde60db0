#include "pspde/mesh.hpp"

#include "pspde/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <unordered_map>

namespace pspde
{

namespace
{

std::uint64_t edge_key(Index a, Index b)
{
  if (a > b)
    std::swap(a, b);
  return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint32_t>(b);
}

double distance(Point const & a, Point const & b)
{
  return std::hypot(a.x - b.x, a.y - b.y);
}

} // namespace

double signed_area(Point const & a, Point const & b, Point const & c)
{
  return 0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y));
}

Mesh::Mesh(std::vector<Point> vertices,
           std::vector<Triangle> triangles,
           std::vector<BoundaryEdge> boundary_edges)
  : vertices_(std::move(vertices))
  , triangles_(std::move(triangles))
  , boundary_edges_(std::move(boundary_edges))
{
  if (triangles_.empty())
    throw GeometryError("mesh has no triangles");

  auto const nv = n_vertices();
  for (auto & tri : triangles_)
  {
    for (auto v : tri)
      if (v < 0 || v >= nv)
        throw GeometryError("triangle references vertex " + std::to_string(v) +
                            " outside [0, " + std::to_string(nv) + ")");
    auto const a = signed_area(vertices_[tri[0]], vertices_[tri[1]], vertices_[tri[2]]);
    if (!(std::abs(a) > 0.0))
      throw GeometryError("degenerate triangle with zero area");
    if (a < 0.0)
      std::swap(tri[1], tri[2]);
  }

  // unique edges in order of first appearance
  std::unordered_map<std::uint64_t, Index> edge_index;
  edge_index.reserve(triangles_.size() * 2);
  std::vector<int> owners;
  triangle_edges_.resize(triangles_.size());
  for (std::size_t t = 0; t < triangles_.size(); ++t)
  {
    auto const & tri = triangles_[t];
    for (int e = 0; e < 3; ++e)
    {
      Index a = tri[e];
      Index b = tri[(e + 1) % 3];
      auto [it, inserted] = edge_index.try_emplace(edge_key(a, b), static_cast<Index>(edges_.size()));
      if (inserted)
      {
        edges_.push_back({std::min(a, b), std::max(a, b)});
        owners.push_back(0);
      }
      triangle_edges_[t][e] = it->second;
      ++owners[it->second];
    }
  }

  edge_tag_.assign(edges_.size(), -1);
  for (auto const & be : boundary_edges_)
  {
    auto it = edge_index.find(edge_key(be.v[0], be.v[1]));
    if (it == edge_index.end())
      throw GeometryError("boundary edge (" + std::to_string(be.v[0]) + ", " +
                          std::to_string(be.v[1]) + ") is not an edge of the mesh");
    if (owners[it->second] != 1)
      throw GeometryError("boundary edge (" + std::to_string(be.v[0]) + ", " +
                          std::to_string(be.v[1]) + ") is shared by " +
                          std::to_string(owners[it->second]) + " triangles");
    if (edge_tag_[it->second] >= 0)
      throw GeometryError("duplicate boundary edge (" + std::to_string(be.v[0]) + ", " +
                          std::to_string(be.v[1]) + ")");
    if (be.tag < 0)
      throw GeometryError("negative boundary tag");
    edge_tag_[it->second] = be.tag;
  }
  for (std::size_t e = 0; e < edges_.size(); ++e)
  {
    if (owners[e] > 2)
      throw GeometryError("non-manifold edge shared by " + std::to_string(owners[e]) + " triangles");
    if (owners[e] == 1 && edge_tag_[e] < 0)
    {
      boundary_edges_.push_back({edges_[e], tags::untagged});
      edge_tag_[e] = tags::untagged;
    }
  }

  for (Index t = 0; t < n_triangles(); ++t)
    h_max_ = std::max(h_max_, diameter(t));
}

double Mesh::area(Index t) const
{
  auto const & tri = triangles_[t];
  return signed_area(vertices_[tri[0]], vertices_[tri[1]], vertices_[tri[2]]);
}

double Mesh::total_area() const
{
  double sum = 0.0;
  for (Index t = 0; t < n_triangles(); ++t)
    sum += area(t);
  return sum;
}

double Mesh::diameter(Index t) const
{
  auto const & tri = triangles_[t];
  auto const & a = vertices_[tri[0]];
  auto const & b = vertices_[tri[1]];
  auto const & c = vertices_[tri[2]];
  return std::max({distance(a, b), distance(b, c), distance(c, a)});
}

bool Mesh::has_tag(int tag) const
{
  return std::any_of(boundary_edges_.begin(), boundary_edges_.end(),
                     [tag](BoundaryEdge const & be) { return be.tag == tag; });
}

Rect Mesh::bounding_box() const
{
  Rect box{std::numeric_limits<double>::max(), std::numeric_limits<double>::max(),
           std::numeric_limits<double>::lowest(), std::numeric_limits<double>::lowest()};
  for (auto const & p : vertices_)
  {
    box.x0 = std::min(box.x0, p.x);
    box.y0 = std::min(box.y0, p.y);
    box.x1 = std::max(box.x1, p.x);
    box.y1 = std::max(box.y1, p.y);
  }
  return box;
}

Mesh generate_rect_mesh(int nx, int ny, Rect const & bounds)
{
  if (nx < 1 || ny < 1)
    throw ConfigError("rectangle mesh needs nx, ny >= 1");
  double const w = bounds.x1 - bounds.x0;
  double const h = bounds.y1 - bounds.y0;
  if (!(w > 0.0) || !(h > 0.0))
    throw GeometryError("degenerate rectangle: width and height must be positive");

  std::vector<Point> vertices;
  vertices.reserve(static_cast<std::size_t>(nx + 1) * (ny + 1));
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i <= nx; ++i)
    {
      // exact end coordinates, no accumulated round-off on the far sides
      double const x = (i == nx) ? bounds.x1 : bounds.x0 + w * i / nx;
      double const y = (j == ny) ? bounds.y1 : bounds.y0 + h * j / ny;
      vertices.push_back({x, y});
    }

  auto id = [nx](int i, int j) { return static_cast<Index>(j * (nx + 1) + i); };

  std::vector<Triangle> triangles;
  triangles.reserve(static_cast<std::size_t>(2) * nx * ny);
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i)
    {
      triangles.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
      triangles.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
    }

  std::vector<BoundaryEdge> boundary;
  for (int i = 0; i < nx; ++i)
    boundary.push_back({{id(i, 0), id(i + 1, 0)}, tags::bottom});
  for (int j = 0; j < ny; ++j)
    boundary.push_back({{id(nx, j), id(nx, j + 1)}, tags::right});
  for (int i = nx; i > 0; --i)
    boundary.push_back({{id(i, ny), id(i - 1, ny)}, tags::top});
  for (int j = ny; j > 0; --j)
    boundary.push_back({{id(0, j), id(0, j - 1)}, tags::left});

  return Mesh(std::move(vertices), std::move(triangles), std::move(boundary));
}

Mesh generate_l_shape(double side, int n)
{
  if (!(side > 0.0))
    throw GeometryError("L-shape side must be positive");
  if (n < 2 || n % 2 != 0)
    throw ConfigError("L-shape resolution n must be even and >= 2, got " + std::to_string(n));

  int const half = n / 2;
  auto inside_cell = [half](int i, int j) { return !(i >= half && j >= half); };
  auto coord = [side, n](int i) { return (i == n) ? side : side * i / n; };

  // vertices used by at least one kept cell, numbered row-major
  std::vector<Index> id((n + 1) * (n + 1), -1);
  std::vector<Point> vertices;
  for (int j = 0; j <= n; ++j)
    for (int i = 0; i <= n; ++i)
    {
      bool used = false;
      for (int dj = -1; dj <= 0 && !used; ++dj)
        for (int di = -1; di <= 0 && !used; ++di)
        {
          int const ci = i + di;
          int const cj = j + dj;
          used = ci >= 0 && cj >= 0 && ci < n && cj < n && inside_cell(ci, cj);
        }
      if (used)
      {
        id[j * (n + 1) + i] = static_cast<Index>(vertices.size());
        vertices.push_back({coord(i), coord(j)});
      }
    }
  auto vid = [&](int i, int j) { return id[j * (n + 1) + i]; };

  std::vector<Triangle> triangles;
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i)
    {
      if (!inside_cell(i, j))
        continue;
      triangles.push_back({vid(i, j), vid(i + 1, j), vid(i + 1, j + 1)});
      triangles.push_back({vid(i, j), vid(i + 1, j + 1), vid(i, j + 1)});
    }

  double const tol = 1e-12 * side;
  double const mid = 0.5 * side;
  bool const with_inflow = side >= 1.0;
  auto classify = [&](Point const & a, Point const & b) {
    if (std::abs(a.x) < tol && std::abs(b.x) < tol)
    {
      if (with_inflow && a.y <= 1.0 + tol && b.y <= 1.0 + tol)
        return tags::inflow;
      return tags::left;
    }
    if (std::abs(a.y) < tol && std::abs(b.y) < tol)
      return tags::bottom;
    if (std::abs(a.x - side) < tol && std::abs(b.x - side) < tol)
      return tags::right;
    if (std::abs(a.y - side) < tol && std::abs(b.y - side) < tol)
      return tags::top;
    if (std::abs(a.x - mid) < tol && std::abs(b.x - mid) < tol)
      return tags::reentrant_vertical;
    return tags::reentrant_horizontal;
  };

  // boundary edges are the edges owned by exactly one triangle
  std::map<std::pair<Index, Index>, int> count;
  for (auto const & tri : triangles)
    for (int e = 0; e < 3; ++e)
    {
      Index a = tri[e];
      Index b = tri[(e + 1) % 3];
      ++count[{std::min(a, b), std::max(a, b)}];
    }
  std::vector<BoundaryEdge> boundary;
  for (auto const & tri : triangles)
    for (int e = 0; e < 3; ++e)
    {
      Index a = tri[e];
      Index b = tri[(e + 1) % 3];
      if (count[{std::min(a, b), std::max(a, b)}] == 1)
        boundary.push_back({{a, b}, classify(vertices[a], vertices[b])});
    }

  return Mesh(std::move(vertices), std::move(triangles), std::move(boundary));
}

int l_shape_resolution_for(double side, double target_h)
{
  if (!(target_h > 0.0))
    throw ConfigError("target mesh size must be positive");
  int n = static_cast<int>(std::ceil(std::sqrt(2.0) * side / target_h - 1e-12));
  n = std::max(n, 2);
  if (n % 2 != 0)
    ++n;
  return n;
}

MeshStats mesh_stats(Mesh const & mesh)
{
  MeshStats s;
  s.h_max = 0.0;
  s.h_min = std::numeric_limits<double>::max();
  for (Index t = 0; t < mesh.n_triangles(); ++t)
  {
    double const d = mesh.diameter(t);
    s.h_max = std::max(s.h_max, d);
    s.h_min = std::min(s.h_min, d);
  }
  s.quasi_uniformity_ratio = s.h_max / s.h_min;
  return s;
}

} // namespace pspde
