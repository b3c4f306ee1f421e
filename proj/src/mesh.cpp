#include "derham/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <numbers>
#include <ostream>
#include <set>
#include <sstream>

namespace derham {

namespace {

double det3(const Vec3& a, const Vec3& b, const Vec3& c) { return a.dot(b.cross(c)); }

template <class Key>
int lookup(const std::vector<Key>& sorted, const Key& key) {
  auto it = std::lower_bound(sorted.begin(), sorted.end(), key);
  if (it == sorted.end() || *it != key) return -1;
  return static_cast<int>(it - sorted.begin());
}

void build_csr(int n, const std::vector<std::pair<int, int>>& pairs, std::vector<int>& offsets,
               std::vector<int>& list) {
  offsets.assign(n + 1, 0);
  for (const auto& [k, v] : pairs) ++offsets[k + 1];
  for (int i = 0; i < n; ++i) offsets[i + 1] += offsets[i];
  list.assign(pairs.size(), 0);
  std::vector<int> fill(offsets.begin(), offsets.end() - 1);
  for (const auto& [k, v] : pairs) list[fill[k]++] = v;
}

}  // namespace

Mesh Mesh::build(std::vector<Vec3> vertices, std::vector<TetVertices> tets) {
  Mesh m;
  const int nv = static_cast<int>(vertices.size());
  for (auto& t : tets) {
    for (int v : t)
      if (v < 0 || v >= nv) throw Error(ErrorCode::invalid_argument, "tet references a missing vertex");
    std::sort(t.begin(), t.end());
    if (std::adjacent_find(t.begin(), t.end()) != t.end())
      throw Error(ErrorCode::degenerate_element, "degenerate element (repeated vertex)");
  }
  {
    auto sorted = tets;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
      throw Error(ErrorCode::duplicate_element, "duplicate element");
  }
  m.vertices_ = std::move(vertices);
  m.tets_ = std::move(tets);

  for (int t = 0; t < m.num_tets(); ++t) {
    const auto x = m.tet_points(t);
    double scale = 0.0;
    for (const auto& e : kTetEdges) scale = std::max(scale, (x[e[1]] - x[e[0]]).norm());
    const double d = det3(x[1] - x[0], x[2] - x[0], x[3] - x[0]);
    if (!(std::abs(d) > 1e-12 * scale * scale * scale))
      throw Error(ErrorCode::degenerate_element, "degenerate element (zero volume) at tet " + std::to_string(t));
  }

  for (const auto& t : m.tets_) {
    for (const auto& e : kTetEdges) m.edges_.push_back({t[e[0]], t[e[1]]});
    for (const auto& f : kTetFaces) m.faces_.push_back({t[f[0]], t[f[1]], t[f[2]]});
  }
  std::sort(m.edges_.begin(), m.edges_.end());
  m.edges_.erase(std::unique(m.edges_.begin(), m.edges_.end()), m.edges_.end());
  std::sort(m.faces_.begin(), m.faces_.end());
  m.faces_.erase(std::unique(m.faces_.begin(), m.faces_.end()), m.faces_.end());

  m.tet_edges_.resize(m.num_tets());
  m.tet_faces_.resize(m.num_tets());
  m.face_tets_.assign(m.num_faces(), {-1, -1});
  std::vector<std::pair<int, int>> vertex_pairs, edge_pairs;
  for (int t = 0; t < m.num_tets(); ++t) {
    const auto& tv = m.tets_[t];
    for (int k = 0; k < 6; ++k) {
      const int e = lookup(m.edges_, EdgeVertices{tv[kTetEdges[k][0]], tv[kTetEdges[k][1]]});
      m.tet_edges_[t][k] = e;
      edge_pairs.emplace_back(e, t);
    }
    for (int k = 0; k < 4; ++k) {
      const int f = lookup(m.faces_, FaceVertices{tv[kTetFaces[k][0]], tv[kTetFaces[k][1]], tv[kTetFaces[k][2]]});
      m.tet_faces_[t][k] = f;
      auto& ft = m.face_tets_[f];
      if (ft[0] < 0)
        ft[0] = t;
      else if (ft[1] < 0)
        ft[1] = t;
      else
        throw Error(ErrorCode::non_manifold, "non-manifold face " + std::to_string(f));
    }
    for (int v : tv) vertex_pairs.emplace_back(v, t);
  }
  build_csr(m.num_vertices(), vertex_pairs, m.vertex_tet_offsets_, m.vertex_tet_list_);
  build_csr(m.num_edges(), edge_pairs, m.edge_tet_offsets_, m.edge_tet_list_);

  m.boundary_face_.assign(m.num_faces(), 0);
  m.boundary_edge_.assign(m.num_edges(), 0);
  m.boundary_vertex_.assign(m.num_vertices(), 0);
  for (int f = 0; f < m.num_faces(); ++f) {
    if (m.face_tets_[f][1] >= 0) continue;
    m.boundary_face_[f] = 1;
    const auto& fv = m.faces_[f];
    for (int v : fv) m.boundary_vertex_[v] = 1;
    for (const auto& [a, b] : {std::pair{0, 1}, std::pair{0, 2}, std::pair{1, 2}})
      m.boundary_edge_[m.find_edge(fv[a], fv[b])] = 1;
  }
  return m;
}

std::span<const int> Mesh::vertex_tets(int v) const {
  return {vertex_tet_list_.data() + vertex_tet_offsets_[v],
          static_cast<std::size_t>(vertex_tet_offsets_[v + 1] - vertex_tet_offsets_[v])};
}

std::span<const int> Mesh::edge_tets(int e) const {
  return {edge_tet_list_.data() + edge_tet_offsets_[e],
          static_cast<std::size_t>(edge_tet_offsets_[e + 1] - edge_tet_offsets_[e])};
}

std::array<Vec3, 4> Mesh::tet_points(int t) const {
  const auto& tv = tets_[t];
  return {vertices_[tv[0]], vertices_[tv[1]], vertices_[tv[2]], vertices_[tv[3]]};
}

double Mesh::signed_volume(int t) const {
  const auto x = tet_points(t);
  return det3(x[1] - x[0], x[2] - x[0], x[3] - x[0]) / 6.0;
}

double Mesh::volume(int t) const { return std::abs(signed_volume(t)); }

double Mesh::face_area(int f) const {
  const auto& fv = faces_[f];
  return 0.5 * (vertices_[fv[1]] - vertices_[fv[0]]).cross(vertices_[fv[2]] - vertices_[fv[0]]).norm();
}

double Mesh::edge_length(int e) const { return (vertices_[edges_[e][1]] - vertices_[edges_[e][0]]).norm(); }

Vec3 Mesh::face_normal(int f) const {
  const auto& fv = faces_[f];
  return (vertices_[fv[1]] - vertices_[fv[0]]).cross(vertices_[fv[2]] - vertices_[fv[0]]).normalized();
}

Vec3 Mesh::edge_tangent(int e) const {
  return (vertices_[edges_[e][1]] - vertices_[edges_[e][0]]).normalized();
}

int Mesh::find_edge(int a, int b) const {
  if (a > b) std::swap(a, b);
  return lookup(edges_, EdgeVertices{a, b});
}

int Mesh::find_face(int a, int b, int c) const {
  FaceVertices f{a, b, c};
  std::sort(f.begin(), f.end());
  return lookup(faces_, f);
}

Mesh Mesh::scaled(double s) const {
  auto v = vertices_;
  for (auto& x : v) x *= s;
  return with_vertices(std::move(v));
}

Mesh Mesh::with_vertices(std::vector<Vec3> vertices) const {
  if (vertices.size() != vertices_.size())
    throw Error(ErrorCode::invalid_argument, "vertex count mismatch");
  return build(std::move(vertices), tets_);
}

GeometryReport geometry(const Mesh& mesh) {
  GeometryReport g;
  const auto& x = mesh.vertices();
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = i + 1; j < x.size(); ++j) g.h_omega = std::max(g.h_omega, (x[i] - x[j]).norm());
  g.h_tau.resize(mesh.num_tets());
  g.iota_tau.resize(mesh.num_tets());
  g.h_min = std::numeric_limits<double>::infinity();
  for (int t = 0; t < mesh.num_tets(); ++t) {
    const auto p = mesh.tet_points(t);
    double h = 0.0;
    for (const auto& e : kTetEdges) h = std::max(h, (p[e[1]] - p[e[0]]).norm());
    double area = 0.0;
    for (const auto& f : kTetFaces) area += 0.5 * (p[f[1]] - p[f[0]]).cross(p[f[2]] - p[f[0]]).norm();
    const double inradius = 3.0 * mesh.volume(t) / area;
    g.h_tau[t] = h;
    g.iota_tau[t] = 2.0 * inradius;
    g.rho = std::max(g.rho, h / g.iota_tau[t]);
    g.h_max = std::max(g.h_max, h);
    g.h_min = std::min(g.h_min, h);
  }
  if (mesh.num_tets() == 0) g.h_min = 0.0;
  return g;
}

StarSpec extract_star(const Mesh& mesh, StarKind kind, int seed) {
  std::set<int> selected;
  switch (kind) {
    case StarKind::vertex:
      if (seed < 0 || seed >= mesh.num_vertices()) throw Error(ErrorCode::invalid_argument, "seed vertex out of range");
      for (int t : mesh.vertex_tets(seed)) selected.insert(t);
      break;
    case StarKind::edge:
      if (seed < 0 || seed >= mesh.num_edges()) throw Error(ErrorCode::invalid_argument, "seed edge out of range");
      for (int t : mesh.edge_tets(seed)) selected.insert(t);
      break;
    case StarKind::twice_extended_element: {
      if (seed < 0 || seed >= mesh.num_tets()) throw Error(ErrorCode::invalid_argument, "seed tet out of range");
      std::set<int> frontier{seed};
      selected.insert(seed);
      for (int hop = 0; hop < 2; ++hop) {
        std::set<int> next;
        for (int t : frontier)
          for (int v : mesh.tets()[t])
            for (int s : mesh.vertex_tets(v))
              if (selected.insert(s).second) next.insert(s);
        frontier = std::move(next);
      }
      break;
    }
  }
  StarSpec star;
  star.kind = kind;
  star.seed = seed;
  star.parent_tet.assign(selected.begin(), selected.end());
  std::set<int> verts;
  for (int t : star.parent_tet)
    for (int v : mesh.tets()[t]) verts.insert(v);
  star.parent_vertex.assign(verts.begin(), verts.end());
  // Parent vertices stay in increasing order, so every entity keeps its orientation.
  std::map<int, int> local;
  std::vector<Vec3> points;
  for (int v : star.parent_vertex) {
    local[v] = static_cast<int>(points.size());
    points.push_back(mesh.vertices()[v]);
  }
  std::vector<TetVertices> tets;
  for (int t : star.parent_tet) {
    const auto& tv = mesh.tets()[t];
    tets.push_back({local[tv[0]], local[tv[1]], local[tv[2]], local[tv[3]]});
  }
  star.submesh = Mesh::build(std::move(points), std::move(tets));
  return star;
}

namespace generate {

Mesh reference_tet() {
  return Mesh::build({Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1)}, {{0, 1, 2, 3}});
}

Mesh cube_freudenthal(int n) {
  if (n < 1) throw Error(ErrorCode::invalid_argument, "cube subdivision n must be >= 1");
  const int m = n + 1;
  auto id = [m](int i, int j, int k) { return i + m * (j + m * k); };
  std::vector<Vec3> vertices;
  vertices.reserve(m * m * m);
  for (int k = 0; k < m; ++k)
    for (int j = 0; j < m; ++j)
      for (int i = 0; i < m; ++i) vertices.emplace_back(double(i) / n, double(j) / n, double(k) / n);
  static constexpr std::array<std::array<int, 3>, 6> perms{
      {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}}};
  std::vector<TetVertices> tets;
  tets.reserve(6 * n * n * n);
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i)
        for (const auto& perm : perms) {
          std::array<int, 3> c{i, j, k};
          TetVertices t;
          t[0] = id(c[0], c[1], c[2]);
          for (int s = 0; s < 3; ++s) {
            c[perm[s]] += 1;
            t[s + 1] = id(c[0], c[1], c[2]);
          }
          tets.push_back(t);
        }
  return Mesh::build(std::move(vertices), std::move(tets));
}

Mesh stretched_cube(int n, double aspect) {
  if (!(aspect > 0.0)) throw Error(ErrorCode::invalid_argument, "aspect must be positive");
  const Mesh cube = cube_freudenthal(n);
  auto v = cube.vertices();
  for (auto& x : v) x[0] *= aspect;
  return cube.with_vertices(std::move(v));
}

Mesh vertex_star_synthetic(int k) {
  if (k < 4 || k % 2 != 0)
    throw Error(ErrorCode::invalid_argument, "vertex star size k must be even and >= 4");
  if (k == 4) {
    // Regular tetrahedron split at its barycenter.
    std::vector<Vec3> v{Vec3(0, 0, 0), Vec3(1, 1, 1), Vec3(1, -1, -1), Vec3(-1, 1, -1), Vec3(-1, -1, 1)};
    return Mesh::build(std::move(v), {{0, 1, 2, 3}, {0, 1, 2, 4}, {0, 1, 3, 4}, {0, 2, 3, 4}});
  }
  const int ring = k / 2;
  std::vector<Vec3> v{Vec3(0, 0, 0), Vec3(0, 0, 1), Vec3(0, 0, -1)};
  for (int i = 0; i < ring; ++i) {
    const double a = 2.0 * std::numbers::pi * i / ring;
    v.emplace_back(std::cos(a), std::sin(a), 0.0);
  }
  std::vector<TetVertices> tets;
  for (int i = 0; i < ring; ++i) {
    const int a = 3 + i, b = 3 + (i + 1) % ring;
    tets.push_back({0, a, b, 1});
    tets.push_back({0, a, b, 2});
  }
  return Mesh::build(std::move(v), std::move(tets));
}

}  // namespace generate

Mesh read_mesh(std::istream& in) {
  std::string line;
  int line_no = 0;
  auto next = [&](std::istringstream& ss) {
    while (std::getline(in, line)) {
      ++line_no;
      const auto first = line.find_first_not_of(" \t\r");
      if (first == std::string::npos || line[first] == '#') continue;
      ss.clear();
      ss.str(line);
      return true;
    }
    return false;
  };
  auto fail = [&](const std::string& what) {
    throw Error(ErrorCode::parse, "line " + std::to_string(line_no) + ": " + what);
  };
  auto expect_end = [&](std::istringstream& ss) {
    std::string rest;
    if (ss >> rest) fail("unexpected trailing token '" + rest + "'");
  };
  std::istringstream ss;
  if (!next(ss)) fail("missing header 'nv nt'");
  long nv = -1, nt = -1;
  if (!(ss >> nv >> nt) || nv < 0 || nt < 0) fail("invalid header, expected 'nv nt'");
  expect_end(ss);
  std::vector<Vec3> vertices;
  vertices.reserve(nv);
  for (long i = 0; i < nv; ++i) {
    if (!next(ss)) fail("unexpected end of file in vertex block");
    Vec3 x;
    if (!(ss >> x[0] >> x[1] >> x[2])) fail("invalid vertex coordinates");
    expect_end(ss);
    vertices.push_back(x);
  }
  std::vector<TetVertices> tets;
  tets.reserve(nt);
  for (long i = 0; i < nt; ++i) {
    if (!next(ss)) fail("unexpected end of file in tet block");
    TetVertices t;
    if (!(ss >> t[0] >> t[1] >> t[2] >> t[3])) fail("invalid tet indices");
    expect_end(ss);
    for (int v : t)
      if (v < 0 || v >= nv) fail("vertex index out of range");
    tets.push_back(t);
  }
  return Mesh::build(std::move(vertices), std::move(tets));
}

Mesh read_mesh_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot open mesh file '" + path + "'");
  return read_mesh(in);
}

void write_mesh(std::ostream& out, const Mesh& mesh) {
  out << mesh.num_vertices() << ' ' << mesh.num_tets() << '\n';
  char buf[128];
  for (const auto& x : mesh.vertices()) {
    std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g\n", x[0], x[1], x[2]);
    out << buf;
  }
  for (const auto& t : mesh.tets()) out << t[0] << ' ' << t[1] << ' ' << t[2] << ' ' << t[3] << '\n';
}

void write_mesh_file(const std::string& path, const Mesh& mesh) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io, "cannot write mesh file '" + path + "'");
  write_mesh(out, mesh);
  if (!out) throw Error(ErrorCode::io, "write failed for '" + path + "'");
}

std::uint64_t content_hash(const Mesh& mesh) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](const void* data, std::size_t n) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 1099511628211ULL;
    }
  };
  for (const auto& x : mesh.vertices()) mix(x.data(), 3 * sizeof(double));
  for (const auto& t : mesh.tets()) mix(t.data(), 4 * sizeof(int));
  return h;
}

Bary barycentric(const Mesh& mesh, int t, const Vec3& x) {
  const auto p = mesh.tet_points(t);
  Mat3 j;
  j << p[1] - p[0], p[2] - p[0], p[3] - p[0];
  const Vec3 l = j.partialPivLu().solve(x - p[0]);
  return {1.0 - l.sum(), l[0], l[1], l[2]};
}

namespace {

constexpr std::int64_t kPrime = 2147483647;  // 2^31 - 1

std::int64_t mod_pow(std::int64_t b, std::int64_t e) {
  std::int64_t r = 1;
  b %= kPrime;
  while (e > 0) {
    if (e & 1) r = r * b % kPrime;
    b = b * b % kPrime;
    e >>= 1;
  }
  return r;
}

/// Rank over GF(kPrime) of a rows x cols matrix given as (row, col, value) entries.
int modular_rank(int rows, int cols, const std::vector<std::array<int, 3>>& entries) {
  if (rows == 0 || cols == 0) return 0;
  std::vector<std::vector<std::int64_t>> a(rows, std::vector<std::int64_t>(cols, 0));
  for (const auto& [r, c, v] : entries) a[r][c] = ((a[r][c] + v) % kPrime + kPrime) % kPrime;
  int rank = 0;
  for (int c = 0; c < cols && rank < rows; ++c) {
    int pivot = -1;
    for (int r = rank; r < rows; ++r)
      if (a[r][c] != 0) {
        pivot = r;
        break;
      }
    if (pivot < 0) continue;
    std::swap(a[pivot], a[rank]);
    const std::int64_t inv = mod_pow(a[rank][c], kPrime - 2);
    for (int r = rank + 1; r < rows; ++r) {
      if (a[r][c] == 0) continue;
      const std::int64_t f = a[r][c] * inv % kPrime;
      for (int k = c; k < cols; ++k) a[r][k] = ((a[r][k] - f * a[rank][k]) % kPrime + kPrime) % kPrime;
    }
    ++rank;
  }
  return rank;
}

}  // namespace

std::array<int, 4> betti_numbers(const Mesh& mesh) {
  std::vector<std::array<int, 3>> d1, d2, d3;
  for (int e = 0; e < mesh.num_edges(); ++e) {
    d1.push_back({mesh.jev(e, 1), e, 1});
    d1.push_back({mesh.jev(e, 0), e, -1});
  }
  for (int f = 0; f < mesh.num_faces(); ++f) {
    const auto& v = mesh.faces()[f];
    d2.push_back({mesh.find_edge(v[1], v[2]), f, 1});
    d2.push_back({mesh.find_edge(v[0], v[2]), f, -1});
    d2.push_back({mesh.find_edge(v[0], v[1]), f, 1});
  }
  for (int t = 0; t < mesh.num_tets(); ++t)
    for (int k = 0; k < 4; ++k) {
      const int opposite = kFaceOpposite[k];
      d3.push_back({mesh.tet_faces(t)[k], t, opposite % 2 == 0 ? 1 : -1});
    }
  const int r1 = modular_rank(mesh.num_vertices(), mesh.num_edges(), d1);
  const int r2 = modular_rank(mesh.num_edges(), mesh.num_faces(), d2);
  const int r3 = modular_rank(mesh.num_faces(), mesh.num_tets(), d3);
  return {mesh.num_vertices() - r1, mesh.num_edges() - r1 - r2, mesh.num_faces() - r2 - r3, mesh.num_tets() - r3};
}

}  // namespace derham
