#include "doctest.h"

#include <cmath>
#include <sstream>

#include "derham/mesh.hpp"

using namespace derham;

namespace {

int find_vertex(const Mesh& m, const Vec3& x) {
  for (int v = 0; v < m.num_vertices(); ++v)
    if ((m.vertices()[v] - x).norm() < 1e-12) return v;
  return -1;
}

// Tets of cube_freudenthal(n) whose centroid lies outside `hole`, rebuilt as a new mesh.
template <class Pred>
Mesh carve(int n, Pred hole) {
  const Mesh c = generate::cube_freudenthal(n);
  std::vector<TetVertices> keep;
  for (int t = 0; t < c.num_tets(); ++t) {
    Vec3 g = Vec3::Zero();
    for (int i = 0; i < 4; ++i) g += 0.25 * c.vertices()[c.jcv(t, i)];
    if (!hole(g * n)) keep.push_back(c.tets()[t]);
  }
  // Drop unused vertices.
  std::vector<int> map(c.num_vertices(), -1);
  std::vector<Vec3> verts;
  for (auto& t : keep)
    for (int& v : t) {
      if (map[v] < 0) {
        map[v] = static_cast<int>(verts.size());
        verts.push_back(c.vertices()[v]);
      }
      v = map[v];
    }
  return Mesh::build(verts, keep);
}

}  // namespace

TEST_CASE("single-cube Freudenthal mesh counts") {
  const Mesh m = generate::cube_freudenthal(1);
  CHECK(m.num_vertices() == 8);
  CHECK(m.num_edges() == 19);
  CHECK(m.num_faces() == 18);
  CHECK(m.num_tets() == 6);
  int boundary_faces = 0, interior_edges = 0;
  for (int f = 0; f < m.num_faces(); ++f) boundary_faces += m.boundary_face(f);
  for (int e = 0; e < m.num_edges(); ++e) interior_edges += !m.boundary_edge(e);
  CHECK(boundary_faces == 12);
  CHECK(m.num_faces() - boundary_faces == 6);
  CHECK(interior_edges == 1);
  double vol = 0.0;
  for (int t = 0; t < m.num_tets(); ++t) vol += m.volume(t);
  CHECK(vol == doctest::Approx(1.0));
}

TEST_CASE("Freudenthal counts for larger n") {
  for (int n = 1; n <= 4; ++n) {
    const Mesh m = generate::cube_freudenthal(n);
    // axis edges + one diagonal per square + one body diagonal per cube
    const int edges = 3 * n * (n + 1) * (n + 1) + 3 * n * n * (n + 1) + n * n * n;
    CHECK(m.num_vertices() == (n + 1) * (n + 1) * (n + 1));
    CHECK(m.num_tets() == 6 * n * n * n);
    CHECK(m.num_edges() == edges);
    CHECK(m.euler_characteristic() == 1);
  }
}

TEST_CASE("shape regularity") {
  // Regular tetrahedron: diameter over inscribed-ball diameter is sqrt(6).
  const Mesh reg = Mesh::build({Vec3(1, 1, 1), Vec3(1, -1, -1), Vec3(-1, 1, -1), Vec3(-1, -1, 1)}, {{0, 1, 2, 3}});
  CHECK(geometry(reg).rho == doctest::Approx(std::sqrt(6.0)).epsilon(1e-12));

  // Kuhn simplex: inradius 3V/S with faces of area 1/2, 1/2, sqrt2/2, sqrt2/2.
  const double kuhn = std::sqrt(3.0) / (2.0 * 3.0 * (1.0 / 6.0) / (1.0 + std::sqrt(2.0)));
  for (int n = 1; n <= 3; ++n) {
    const GeometryReport g = geometry(generate::cube_freudenthal(n));
    CHECK(g.rho == doctest::Approx(kuhn).epsilon(1e-12));
    CHECK(g.h_omega == doctest::Approx(std::sqrt(3.0)));
    CHECK(g.h_max == doctest::Approx(std::sqrt(3.0) / n));
  }
}

TEST_CASE("vertex stars") {
  const Mesh m = generate::cube_freudenthal(2);
  const int center = find_vertex(m, Vec3(0.5, 0.5, 0.5));
  REQUIRE(center >= 0);
  CHECK(extract_star(m, StarKind::vertex, center).submesh.num_tets() == 24);
  CHECK(m.vertex_tets(find_vertex(m, Vec3(0, 0, 0))).size() == 6);
  CHECK(m.vertex_tets(find_vertex(m, Vec3(1, 0, 0))).size() == 2);
  CHECK(!m.boundary_vertex(center));

  const StarSpec s = extract_star(m, StarKind::vertex, center);
  for (int t = 0; t < s.submesh.num_tets(); ++t) {
    const int parent = s.parent_tet[t];
    for (int i = 0; i < 4; ++i)
      CHECK((s.submesh.vertices()[s.submesh.jcv(t, i)] - m.vertices()[m.jcv(parent, i)]).norm() < 1e-14);
  }

  const Mesh star = generate::vertex_star_synthetic(8);
  CHECK(star.num_tets() == 8);
  CHECK(star.euler_characteristic() == 1);
  CHECK(!star.boundary_vertex(0));
}

TEST_CASE("betti numbers of carved cubes") {
  CHECK(betti_numbers(generate::cube_freudenthal(2)) == std::array<int, 4>{1, 0, 0, 0});
  // Hollow: remove the centre subcube of a 3x3x3 block.
  const Mesh hollow = carve(3, [](const Vec3& g) { return (g.array() > 1.0).all() && (g.array() < 2.0).all(); });
  CHECK(betti_numbers(hollow) == std::array<int, 4>{1, 0, 1, 0});
  // Solid torus: remove the central column.
  const Mesh torus = carve(3, [](const Vec3& g) { return g.x() > 1 && g.x() < 2 && g.y() > 1 && g.y() < 2; });
  CHECK(betti_numbers(torus) == std::array<int, 4>{1, 1, 0, 0});
  CHECK(torus.euler_characteristic() == 0);
}

TEST_CASE("invalid meshes are rejected") {
  const std::vector<Vec3> v{Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(1, 1, 0), Vec3(0, 0, 1),
                            Vec3(0, 0, -1), Vec3(0.2, 0.2, 0.5)};
  auto code = [&](std::vector<TetVertices> t) {
    try {
      Mesh::build(v, std::move(t));
    } catch (const Error& e) {
      return static_cast<int>(e.code());
    }
    return -1;
  };
  CHECK(code({{0, 1, 2, 3}}) == static_cast<int>(ErrorCode::degenerate_element));
  CHECK(code({{0, 1, 2, 4}, {2, 1, 0, 4}}) == static_cast<int>(ErrorCode::duplicate_element));
  CHECK(code({{0, 1, 2, 4}, {0, 1, 2, 5}, {0, 1, 2, 6}}) == static_cast<int>(ErrorCode::non_manifold));
  CHECK(code({{0, 1, 2, 9}}) == static_cast<int>(ErrorCode::invalid_argument));
}

TEST_CASE("text format round trip") {
  const Mesh m = generate::stretched_cube(2, 3.0);
  std::stringstream ss;
  write_mesh(ss, m);
  const Mesh r = read_mesh(ss);
  CHECK(r.tets() == m.tets());
  CHECK(r.edges() == m.edges());
  CHECK(r.faces() == m.faces());
  for (int i = 0; i < m.num_vertices(); ++i) CHECK(r.vertices()[i] == m.vertices()[i]);
  CHECK(content_hash(r) == content_hash(m));
  CHECK(content_hash(m.scaled(0.5)) != content_hash(m));
}

TEST_CASE("parse errors carry line numbers") {
  std::istringstream in("# header comment\n4 1\n0 0 0\n1 0 0\n0 1 zero\n");
  try {
    read_mesh(in);
    FAIL("expected a parse error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::parse);
    CHECK(std::string(e.what()).find("line 5") != std::string::npos);
  }
}

TEST_CASE("barycentric coordinates") {
  const Mesh m = generate::reference_tet();
  const Bary b = barycentric(m, 0, Vec3(0.1, 0.2, 0.3));
  CHECK(b[0] == doctest::Approx(0.4));
  CHECK(b[1] == doctest::Approx(0.1));
  CHECK(b[2] == doctest::Approx(0.2));
  CHECK(b[3] == doctest::Approx(0.3));
}
