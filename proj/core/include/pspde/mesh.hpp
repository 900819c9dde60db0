#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace pspde
{

using Index = std::int32_t;

struct Point
{
  double x = 0.0;
  double y = 0.0;
};

using Triangle = std::array<Index, 3>;

struct BoundaryEdge
{
  std::array<Index, 2> v;
  int tag = 0;
};

/// Boundary tag registry used by the built-in generators.
namespace tags
{
inline constexpr int untagged = 0;
inline constexpr int left = 1;
inline constexpr int right = 2;
inline constexpr int bottom = 3;
inline constexpr int top = 4;
inline constexpr int reentrant_vertical = 5;   // x = L/2 segment of the L-shape
inline constexpr int reentrant_horizontal = 6; // y = L/2 segment of the L-shape
inline constexpr int inflow = 10;              // {0} x [0, 1] on the L-shape
} // namespace tags

struct Rect
{
  double x0 = 0.0;
  double y0 = 0.0;
  double x1 = 1.0;
  double y1 = 1.0;
};

struct MeshStats
{
  double h_max = 0.0;
  double h_min = 0.0;
  double quasi_uniformity_ratio = 1.0;
};

/// Conforming triangulation of a polygonal domain.
///
/// Immutable after construction. The constructor normalizes every triangle
/// to counterclockwise orientation, builds the unique edge list, and checks
/// that boundary edges are exactly the edges owned by a single triangle.
/// Boundary edges missing from the input are added with tags::untagged.
class Mesh
{
public:
  Mesh(std::vector<Point> vertices,
       std::vector<Triangle> triangles,
       std::vector<BoundaryEdge> boundary_edges);

  std::span<Point const> vertices() const { return vertices_; }
  std::span<Triangle const> triangles() const { return triangles_; }
  std::span<BoundaryEdge const> boundary_edges() const { return boundary_edges_; }

  Index n_vertices() const { return static_cast<Index>(vertices_.size()); }
  Index n_triangles() const { return static_cast<Index>(triangles_.size()); }
  Index n_edges() const { return static_cast<Index>(edges_.size()); }

  /// Unique edges, endpoints sorted ascending, numbered by first appearance.
  std::span<std::array<Index, 2> const> edges() const { return edges_; }

  /// Local edge e of triangle t joins local vertices e and (e + 1) % 3.
  std::array<Index, 3> const & triangle_edges(Index t) const { return triangle_edges_[t]; }

  /// Boundary tag of global edge e, or -1 for interior edges.
  int edge_tag(Index e) const { return edge_tag_[e]; }
  bool is_boundary_edge(Index e) const { return edge_tag_[e] >= 0; }

  double area(Index t) const;
  double total_area() const;
  double diameter(Index t) const;
  double h_max() const { return h_max_; }
  bool has_tag(int tag) const;
  Rect bounding_box() const;

private:
  std::vector<Point> vertices_;
  std::vector<Triangle> triangles_;
  std::vector<BoundaryEdge> boundary_edges_;
  std::vector<std::array<Index, 2>> edges_;
  std::vector<std::array<Index, 3>> triangle_edges_;
  std::vector<int> edge_tag_;
  double h_max_ = 0.0;
};

double signed_area(Point const & a, Point const & b, Point const & c);

/// Structured nx x ny grid, every cell split along its bottom-left to
/// top-right diagonal. Sides are tagged left=1, right=2, bottom=3, top=4.
Mesh generate_rect_mesh(int nx, int ny, Rect const & bounds = {});

/// [0, side]^2 minus the open upper-right quadrant on a structured grid of
/// spacing side / n. n must be even so the reentrant corner is a grid vertex.
/// When side >= 1 the left edges inside {0} x [0, 1] carry tags::inflow.
Mesh generate_l_shape(double side, int n);

/// Smallest even n such that generate_l_shape(side, n) has h_max <= target_h.
int l_shape_resolution_for(double side, double target_h);

MeshStats mesh_stats(Mesh const & mesh);

// I/O -----------------------------------------------------------------------

/// Reads the ASCII MSH 2.2 subset: 2-node lines (type 1) and 3-node
/// triangles (type 2). Point elements (type 15) are skipped. The first
/// element tag is taken as the physical group and becomes the edge tag.
Mesh load_msh(std::filesystem::path const & path);
void write_msh(Mesh const & mesh, std::filesystem::path const & path);

/// Line-oriented native dump: header, vertex count, "x y" lines, triangle
/// count, "i j k" lines, boundary edge count, "i j tag" lines.
void write_native_mesh(Mesh const & mesh, std::filesystem::path const & path);
Mesh read_native_mesh(std::filesystem::path const & path);

} // namespace pspde
