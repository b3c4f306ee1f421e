#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "derham/error.hpp"
#include "derham/poly.hpp"

namespace derham {

using TetVertices = std::array<int, 4>;
using FaceVertices = std::array<int, 3>;
using EdgeVertices = std::array<int, 2>;

/// Local edges and faces of a tetrahedron whose vertices are listed in increasing
/// global order. Both tables are lexicographically sorted, so local entity k of a
/// tet is the global entity with the same sorted vertex tuple.
inline constexpr std::array<std::array<int, 2>, 6> kTetEdges{{{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}}};
inline constexpr std::array<std::array<int, 3>, 4> kTetFaces{{{0, 1, 2}, {0, 1, 3}, {0, 2, 3}, {1, 2, 3}}};
/// kTetFaces[k] is opposite to local vertex kFaceOpposite[k].
inline constexpr std::array<int, 4> kFaceOpposite{3, 2, 1, 0};

/// Tetrahedral mesh with connectivity arrays. Entities are oriented by increasing
/// vertex index. Immutable once built.
class Mesh {
 public:
  /// Sorts each tet tuple, derives edges and faces and checks validity.
  /// Throws Error{degenerate_element | non_manifold | duplicate_element | invalid_argument}.
  static Mesh build(std::vector<Vec3> vertices, std::vector<TetVertices> tets);

  int num_vertices() const { return static_cast<int>(vertices_.size()); }
  int num_edges() const { return static_cast<int>(edges_.size()); }
  int num_faces() const { return static_cast<int>(faces_.size()); }
  int num_tets() const { return static_cast<int>(tets_.size()); }

  const std::vector<Vec3>& vertices() const { return vertices_; }
  const std::vector<TetVertices>& tets() const { return tets_; }
  const std::vector<EdgeVertices>& edges() const { return edges_; }
  const std::vector<FaceVertices>& faces() const { return faces_; }

  /// Connectivity arrays: global vertex of local slot n of edge/face/cell m.
  int jev(int m, int n) const { return edges_[m][n]; }
  int jfv(int m, int n) const { return faces_[m][n]; }
  int jcv(int m, int n) const { return tets_[m][n]; }

  const std::array<int, 6>& tet_edges(int t) const { return tet_edges_[t]; }
  const std::array<int, 4>& tet_faces(int t) const { return tet_faces_[t]; }
  /// The one or two tets containing face f; second entry is -1 on the boundary.
  const std::array<int, 2>& face_tets(int f) const { return face_tets_[f]; }
  std::span<const int> vertex_tets(int v) const;
  std::span<const int> edge_tets(int e) const;

  bool boundary_face(int f) const { return boundary_face_[f] != 0; }
  bool boundary_edge(int e) const { return boundary_edge_[e] != 0; }
  bool boundary_vertex(int v) const { return boundary_vertex_[v] != 0; }

  std::array<Vec3, 4> tet_points(int t) const;
  double volume(int t) const;
  /// Volume with the sign of det[x1-x0, x2-x0, x3-x0] for the sorted tuple.
  double signed_volume(int t) const;
  double face_area(int f) const;
  double edge_length(int e) const;
  /// Unit normal (x_b-x_a) x (x_c-x_a) / |.| of face (a<b<c).
  Vec3 face_normal(int f) const;
  /// Unit tangent (x_b-x_a)/|.| of edge (a<b).
  Vec3 edge_tangent(int e) const;

  int find_edge(int a, int b) const;
  int find_face(int a, int b, int c) const;

  int euler_characteristic() const { return num_vertices() - num_edges() + num_faces() - num_tets(); }

  /// Same connectivity, vertices mapped by x -> s * x.
  Mesh scaled(double s) const;
  /// Same connectivity, vertices replaced (must have the same count).
  Mesh with_vertices(std::vector<Vec3> vertices) const;

 private:
  std::vector<Vec3> vertices_;
  std::vector<TetVertices> tets_;
  std::vector<EdgeVertices> edges_;
  std::vector<FaceVertices> faces_;
  std::vector<std::array<int, 6>> tet_edges_;
  std::vector<std::array<int, 4>> tet_faces_;
  std::vector<std::array<int, 2>> face_tets_;
  std::vector<int> vertex_tet_offsets_, vertex_tet_list_;
  std::vector<int> edge_tet_offsets_, edge_tet_list_;
  std::vector<char> boundary_face_, boundary_edge_, boundary_vertex_;
};

struct GeometryReport {
  double h_omega = 0.0;
  std::vector<double> h_tau;
  std::vector<double> iota_tau;
  double rho = 0.0;
  double h_max = 0.0;
  double h_min = 0.0;
};

GeometryReport geometry(const Mesh& mesh);

enum class StarKind { vertex, edge, twice_extended_element };

struct StarSpec {
  StarKind kind = StarKind::vertex;
  int seed = 0;
  Mesh submesh;
  std::vector<int> parent_tet;     // submesh tet -> parent tet
  std::vector<int> parent_vertex;  // submesh vertex -> parent vertex
};

StarSpec extract_star(const Mesh& mesh, StarKind kind, int seed);

namespace generate {
Mesh reference_tet();
/// Unit cube split into n^3 subcubes, each cut into 6 Kuhn simplices along the (1,1,1) diagonal.
Mesh cube_freudenthal(int n);
/// cube_freudenthal(n) with the x axis scaled by `aspect`.
Mesh stretched_cube(int n, double aspect);
/// A star of k tets around the origin (k even, k >= 4).
Mesh vertex_star_synthetic(int k);
}  // namespace generate

/// Reads the text format: "nv nt", nv lines "x y z", nt lines "v0 v1 v2 v3".
/// Lines starting with '#' are comments. Throws Error{parse} with the line number.
Mesh read_mesh(std::istream& in);
Mesh read_mesh_file(const std::string& path);
void write_mesh(std::ostream& out, const Mesh& mesh);
void write_mesh_file(const std::string& path, const Mesh& mesh);

/// FNV-1a hash of vertex coordinates and tet tuples.
std::uint64_t content_hash(const Mesh& mesh);

/// Barycentric coordinates of point x with respect to tet t.
Bary barycentric(const Mesh& mesh, int t, const Vec3& x);

/// Betti numbers (b0, b1, b2, b3) of the simplicial complex, computed by exact
/// rank of the integer boundary matrices over a large prime field.
std::array<int, 4> betti_numbers(const Mesh& mesh);

}  // namespace derham
