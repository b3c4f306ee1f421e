#include "derham/fespace.hpp"

#include <map>
#include <mutex>

namespace derham {

namespace {

constexpr int kMaxSpaceDegree = 4;

void check_level_degree(int level, int degree) {
  if (level < 0 || level > 3) throw Error(ErrorCode::invalid_argument, "level must be in 0..3");
  if (degree < 0 || degree > kMaxSpaceDegree)
    throw Error(ErrorCode::invalid_argument, "unsupported polynomial degree " + std::to_string(degree));
}

/// Exponent tuples of homogeneous monomials of degree m in n variables, descending lexicographic.
std::vector<std::vector<int>> entity_monomials(int n, int m) {
  std::vector<std::vector<int>> out;
  if (m < 0) return out;
  std::vector<int> a(n, 0);
  std::function<void(int, int)> rec = [&](int var, int left) {
    if (var == n - 1) {
      a[var] = left;
      out.push_back(a);
      return;
    }
    for (int e = left; e >= 0; --e) {
      a[var] = e;
      rec(var + 1, left - e);
    }
  };
  rec(0, m);
  return out;
}

int count_monomials(int n, int m) { return static_cast<int>(entity_monomials(n, m).size()); }

/// Weight degree for the moments on an entity of the given kind.
int weight_degree(int level, int degree, EntityKind kind) {
  switch (level) {
    case 0:
      return kind == EntityKind::edge ? degree - 1 : kind == EntityKind::face ? degree - 2 : degree - 3;
    case 1:
      return kind == EntityKind::edge ? degree : kind == EntityKind::face ? degree - 1 : degree - 2;
    case 2:
      return kind == EntityKind::face ? degree : degree - 1;
    default:
      return degree;
  }
}

/// Number of weight vectors (tangents/components) per weight monomial.
int multiplicity(int level, EntityKind kind) {
  if (level == 1 && kind == EntityKind::face) return 2;
  if ((level == 1 || level == 2) && kind == EntityKind::cell) return 3;
  return 1;
}

BaryPoly weight_polynomial(std::span<const int> local_vertices, const std::vector<int>& exponents) {
  MultiIndex a{0, 0, 0, 0};
  for (std::size_t i = 0; i < local_vertices.size(); ++i) a[local_vertices[i]] = exponents[i];
  return BaryPoly::monomial(a);
}

std::array<Vec3, 4> reference_points() { return {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1)}; }

std::mutex& cache_mutex() {
  static std::mutex m;
  return m;
}

std::vector<BaryVec> spanning_set(int level, int degree) {
  const auto ref = reference_points();
  BaryVec x;
  for (int c = 0; c < 3; ++c) x[c] = BaryPoly::affine({ref[0][c], ref[1][c], ref[2][c], ref[3][c]});
  const Vec3 centre(0.25, 0.25, 0.25);
  BaryVec xc = add(x, scaled(BaryPoly::constant(1.0), -centre));
  std::vector<BaryVec> span;
  auto scalar = [](const BaryPoly& p) { return BaryVec{p, BaryPoly(0), BaryPoly(0)}; };
  switch (level) {
    case 0:
      for (const auto& a : multi_indices(degree + 1)) span.push_back(scalar(BaryPoly::monomial(a)));
      break;
    case 3:
      for (const auto& a : multi_indices(degree)) span.push_back(scalar(BaryPoly::monomial(a)));
      break;
    case 1:
    case 2:
      for (const auto& a : multi_indices(degree)) {
        const BaryPoly m = BaryPoly::monomial(a);
        for (int c = 0; c < 3; ++c) {
          Vec3 e = Vec3::Zero();
          e[c] = 1.0;
          span.push_back(scaled(m, e));
          if (level == 1) span.push_back(cross(xc, scaled(m, e)));
        }
        if (level == 2) span.push_back(multiply(m, xc));
      }
      break;
  }
  return span;
}

}  // namespace

const char* to_string(Boundary bc) { return bc == Boundary::none ? "none" : "homogeneous"; }

Boundary parse_boundary(const std::string& s) {
  if (s == "none") return Boundary::none;
  if (s == "homogeneous" || s == "hom" || s == "dirichlet") return Boundary::homogeneous;
  throw Error(ErrorCode::invalid_argument, "unknown boundary condition '" + s + "'");
}

AffineMap AffineMap::between(const std::array<Vec3, 4>& source, const std::array<Vec3, 4>& target) {
  Mat3 s, t;
  s << source[1] - source[0], source[2] - source[0], source[3] - source[0];
  t << target[1] - target[0], target[2] - target[0], target[3] - target[0];
  AffineMap m;
  if (s.determinant() == 0.0) throw Error(ErrorCode::invalid_argument, "singular source element");
  m.jacobian = t * s.inverse();
  m.det = m.jacobian.determinant();
  m.shift = target[0] - m.jacobian * source[0];
  return m;
}

Vec3 piola(int level, const Mat3& j, const Vec3& v) {
  const double det = j.determinant();
  if (det == 0.0) throw Error(ErrorCode::invalid_argument, "singular Jacobian in Piola transform");
  switch (level) {
    case 0:
      return v;
    case 1:
      return j.transpose() * v;
    case 2:
      return det * j.inverse() * v;
    case 3:
      return det * v;
  }
  throw Error(ErrorCode::invalid_argument, "Piola level must be in 0..3");
}

Vec3 piola_inverse(int level, const Mat3& j, const Vec3& v) {
  const double det = j.determinant();
  if (det == 0.0) throw Error(ErrorCode::invalid_argument, "singular Jacobian in Piola transform");
  switch (level) {
    case 0:
      return v;
    case 1:
      return j.inverse().transpose() * v;
    case 2:
      return j * v / det;
    case 3:
      return v / det;
  }
  throw Error(ErrorCode::invalid_argument, "Piola level must be in 0..3");
}

BaryVec piola(int level, const Mat3& j, const BaryVec& v) {
  const double det = j.determinant();
  if (det == 0.0) throw Error(ErrorCode::invalid_argument, "singular Jacobian in Piola transform");
  switch (level) {
    case 0:
      return v;
    case 1:
      return derham::apply(Mat3(j.transpose()), v);
    case 2:
      return derham::apply(Mat3(det * j.inverse()), v);
    case 3:
      return scale(v, det);
  }
  throw Error(ErrorCode::invalid_argument, "Piola level must be in 0..3");
}

BaryVec piola_inverse(int level, const Mat3& j, const BaryVec& v) {
  const double det = j.determinant();
  if (det == 0.0) throw Error(ErrorCode::invalid_argument, "singular Jacobian in Piola transform");
  switch (level) {
    case 0:
      return v;
    case 1:
      return derham::apply(Mat3(j.inverse().transpose()), v);
    case 2:
      return derham::apply(Mat3(j / det), v);
    case 3:
      return scale(v, 1.0 / det);
  }
  throw Error(ErrorCode::invalid_argument, "Piola level must be in 0..3");
}

BaryVec exterior_derivative(int level, const BaryVec& v, const BaryGradients& grads) {
  switch (level) {
    case 0:
      return gradient(v[0], grads);
    case 1:
      return curl(v, grads);
    case 2:
      return {divergence(v, grads), BaryPoly(0), BaryPoly(0)};
  }
  throw Error(ErrorCode::invalid_argument, "exterior derivative defined for levels 0..2");
}

TetGeometry TetGeometry::of(const Mesh& mesh, int t) { return of(mesh.tet_points(t)); }

TetGeometry TetGeometry::of(const std::array<Vec3, 4>& points) {
  TetGeometry g;
  g.x = points;
  g.map = AffineMap::between(reference_points(), points);
  const Mat3 inv = g.map.jacobian.inverse();
  for (int i = 0; i < 3; ++i) g.grads.row(i + 1) = inv.row(i);
  g.grads.row(0) = -(inv.row(0) + inv.row(1) + inv.row(2));
  g.volume = std::abs(g.map.det) / 6.0;
  return g;
}

std::array<int, 4> dofs_per_entity(int level, int degree) {
  check_level_degree(level, degree);
  std::array<int, 4> n{0, 0, 0, 0};
  if (level == 0) n[0] = 1;
  if (level <= 1) n[1] = count_monomials(2, weight_degree(level, degree, EntityKind::edge));
  if (level <= 2)
    n[2] = multiplicity(level, EntityKind::face) * count_monomials(3, weight_degree(level, degree, EntityKind::face));
  n[3] = multiplicity(level, EntityKind::cell) * count_monomials(4, weight_degree(level, degree, EntityKind::cell));
  return n;
}

int local_dimension(int level, int degree) {
  const auto n = dofs_per_entity(level, degree);
  return 4 * n[0] + 6 * n[1] + 4 * n[2] + n[3];
}

const std::vector<LocalDof>& local_dofs(int level, int degree) {
  check_level_degree(level, degree);
  static std::map<std::pair<int, int>, std::unique_ptr<std::vector<LocalDof>>> cache;
  std::lock_guard lock(cache_mutex());
  auto& slot = cache[{level, degree}];
  if (!slot) {
    const auto n = dofs_per_entity(level, degree);
    auto list = std::make_unique<std::vector<LocalDof>>();
    for (int v = 0; v < 4; ++v)
      for (int i = 0; i < n[0]; ++i) list->push_back({EntityKind::vertex, v, i});
    for (int e = 0; e < 6; ++e)
      for (int i = 0; i < n[1]; ++i) list->push_back({EntityKind::edge, e, i});
    for (int f = 0; f < 4; ++f)
      for (int i = 0; i < n[2]; ++i) list->push_back({EntityKind::face, f, i});
    for (int i = 0; i < n[3]; ++i) list->push_back({EntityKind::cell, 0, i});
    slot = std::move(list);
  }
  return *slot;
}

double apply_dof(int level, int degree, const TetGeometry& geo, const LocalDof& dof, const BaryVec& field) {
  const auto& x = geo.x;
  switch (dof.kind) {
    case EntityKind::vertex: {
      const int v = dof.entity;
      return field[0].integrate(std::span<const int>(&v, 1), 1.0);
    }
    case EntityKind::edge: {
      const auto& ev = kTetEdges[dof.entity];
      const auto w = entity_monomials(2, weight_degree(level, degree, EntityKind::edge));
      const BaryPoly q = weight_polynomial(ev, w[dof.index]);
      const Vec3 d = x[ev[1]] - x[ev[0]];
      const BaryPoly integrand = (level == 0 ? field[0] : dot(field, Vec3(d.normalized()))) * q;
      return integrand.integrate(ev, d.norm());
    }
    case EntityKind::face: {
      const auto& fv = kTetFaces[dof.entity];
      const auto w = entity_monomials(3, weight_degree(level, degree, EntityKind::face));
      const int slot = dof.index / static_cast<int>(w.size());
      const BaryPoly q = weight_polynomial(fv, w[dof.index % w.size()]);
      const Vec3 t1 = x[fv[1]] - x[fv[0]], t2 = x[fv[2]] - x[fv[0]];
      const Vec3 n = t1.cross(t2);
      const double area = 0.5 * n.norm();
      BaryPoly integrand;
      if (level == 0)
        integrand = field[0] * q;
      else if (level == 1)
        integrand = dot(field, Vec3((slot == 0 ? t1 : t2).normalized())) * q;
      else
        integrand = dot(field, Vec3(n.normalized())) * q;
      return integrand.integrate(fv, area);
    }
    case EntityKind::cell: {
      static constexpr std::array<int, 4> all{0, 1, 2, 3};
      const auto w = entity_monomials(4, weight_degree(level, degree, EntityKind::cell));
      const int comp = dof.index / static_cast<int>(w.size());
      const BaryPoly q = weight_polynomial(all, w[dof.index % w.size()]);
      const BaryPoly integrand = (level == 1 || level == 2 ? field[comp] : field[0]) * q;
      return integrand.integrate(all, geo.volume);
    }
  }
  return 0.0;
}

Eigen::VectorXd apply_dofs(int level, int degree, const TetGeometry& geo, const BaryVec& field) {
  const auto& dofs = local_dofs(level, degree);
  Eigen::VectorXd out(dofs.size());
  for (std::size_t k = 0; k < dofs.size(); ++k) out[k] = apply_dof(level, degree, geo, dofs[k], field);
  return out;
}

const std::vector<BaryVec>& reference_basis(int level, int degree) {
  check_level_degree(level, degree);
  static std::map<std::pair<int, int>, std::unique_ptr<std::vector<BaryVec>>> cache;
  {
    std::lock_guard lock(cache_mutex());
    auto it = cache.find({level, degree});
    if (it != cache.end()) return *it->second;
  }
  const auto& dofs = local_dofs(level, degree);
  const auto span = spanning_set(level, degree);
  const TetGeometry geo = TetGeometry::of(reference_points());
  Eigen::MatrixXd a(dofs.size(), span.size());
  for (std::size_t j = 0; j < span.size(); ++j) a.col(j) = apply_dofs(level, degree, geo, span[j]);
  const Eigen::MatrixXd c = a.completeOrthogonalDecomposition().pseudoInverse();
  const double defect = (a * c - Eigen::MatrixXd::Identity(a.rows(), a.rows())).cwiseAbs().maxCoeff();
  if (defect > 1e-10) throw Error(ErrorCode::numerical, "moment functionals are not unisolvent on the local space");
  auto basis = std::make_unique<std::vector<BaryVec>>();
  for (int k = 0; k < a.rows(); ++k) {
    BaryVec phi{BaryPoly(0), BaryPoly(0), BaryPoly(0)};
    for (std::size_t j = 0; j < span.size(); ++j)
      if (c(j, k) != 0.0) phi = add(phi, scale(span[j], c(j, k)));
    basis->push_back(std::move(phi));
  }
  std::lock_guard lock(cache_mutex());
  auto& slot = cache[{level, degree}];
  if (!slot) slot = std::move(basis);
  return *slot;
}

SpaceHandle SpaceHandle::build(std::shared_ptr<const Mesh> mesh, int level, int degree, Boundary bc) {
  check_level_degree(level, degree);
  if (!mesh) throw Error(ErrorCode::invalid_argument, "null mesh");
  SpaceHandle s;
  s.mesh_ = std::move(mesh);
  s.level_ = level;
  s.degree_ = degree;
  s.bc_ = bc;
  s.per_entity_ = dofs_per_entity(level, degree);
  s.local_dofs_ = &local_dofs(level, degree);
  const Mesh& m = *s.mesh_;
  const std::array<int, 4> counts{m.num_vertices(), m.num_edges(), m.num_faces(), m.num_tets()};
  int offset = 0;
  for (int k = 0; k < 4; ++k) {
    s.offsets_[k] = offset;
    offset += counts[k] * s.per_entity_[k];
  }
  s.global_dim_ = offset;

  const int nloc = s.local_dim();
  s.dof_map_.resize(static_cast<std::size_t>(m.num_tets()) * nloc);
  for (int t = 0; t < m.num_tets(); ++t) {
    for (int k = 0; k < nloc; ++k) {
      const auto& d = (*s.local_dofs_)[k];
      int entity = 0, kind = 0;
      switch (d.kind) {
        case EntityKind::vertex:
          kind = 0;
          entity = m.jcv(t, d.entity);
          break;
        case EntityKind::edge:
          kind = 1;
          entity = m.tet_edges(t)[d.entity];
          break;
        case EntityKind::face:
          kind = 2;
          entity = m.tet_faces(t)[d.entity];
          break;
        case EntityKind::cell:
          kind = 3;
          entity = t;
          break;
      }
      s.dof_map_[static_cast<std::size_t>(t) * nloc + k] = s.offsets_[kind] + entity * s.per_entity_[kind] + d.index;
    }
  }

  s.free_mask_.assign(s.global_dim_, 1);
  if (bc == Boundary::homogeneous && level < 3) {
    for (int g = 0; g < s.global_dim_; ++g) {
      const auto [kind, entity] = s.dof_entity(g);
      const bool on_boundary = (kind == EntityKind::vertex && m.boundary_vertex(entity)) ||
                               (kind == EntityKind::edge && m.boundary_edge(entity)) ||
                               (kind == EntityKind::face && m.boundary_face(entity));
      if (on_boundary) s.free_mask_[g] = 0;
    }
  }
  s.free_index_.assign(s.global_dim_, -1);
  for (int g = 0; g < s.global_dim_; ++g)
    if (s.free_mask_[g]) {
      s.free_index_[g] = static_cast<int>(s.free_dofs_.size());
      s.free_dofs_.push_back(g);
    }

  const auto& ref = reference_basis(level, degree);
  s.basis_.resize(m.num_tets());
  s.geometry_.resize(m.num_tets());
  for (int t = 0; t < m.num_tets(); ++t) {
    const TetGeometry geo = TetGeometry::of(m, t);
    std::vector<BaryVec> pushed;
    pushed.reserve(nloc);
    for (const auto& phi : ref) pushed.push_back(piola_inverse(level, geo.map.jacobian, phi));
    Eigen::MatrixXd a(nloc, nloc);
    for (int j = 0; j < nloc; ++j) a.col(j) = apply_dofs(level, degree, geo, pushed[j]);
    const Eigen::MatrixXd inv = a.partialPivLu().inverse();
    auto& basis = s.basis_[t];
    basis.reserve(nloc);
    for (int k = 0; k < nloc; ++k) {
      BaryVec phi{BaryPoly(0), BaryPoly(0), BaryPoly(0)};
      for (int j = 0; j < nloc; ++j)
        if (inv(j, k) != 0.0) phi = add(phi, scale(pushed[j], inv(j, k)));
      basis.push_back(std::move(phi));
    }
    s.geometry_[t] = geo;
  }
  return s;
}

std::pair<EntityKind, int> SpaceHandle::dof_entity(int g) const {
  for (int k = 3; k >= 0; --k) {
    if (per_entity_[k] == 0 || g < offsets_[k]) continue;
    return {static_cast<EntityKind>(k), (g - offsets_[k]) / per_entity_[k]};
  }
  throw Error(ErrorCode::invalid_argument, "DOF index out of range");
}

BaryVec SpaceHandle::local_field(int t, const Eigen::VectorXd& coeffs) const {
  BaryVec u{BaryPoly(0), BaryPoly(0), BaryPoly(0)};
  const auto map = dof_map(t);
  for (int k = 0; k < local_dim(); ++k) {
    const double c = coeffs[map[k]];
    if (c != 0.0) u = add(u, scale(basis_[t][k], c));
  }
  return u;
}

Eigen::VectorXd SpaceHandle::expand(const Eigen::VectorXd& free_coeffs) const {
  Eigen::VectorXd full = Eigen::VectorXd::Zero(global_dim_);
  for (int i = 0; i < free_dim(); ++i) full[free_dofs_[i]] = free_coeffs[i];
  return full;
}

Eigen::VectorXd SpaceHandle::restrict_to_free(const Eigen::VectorXd& coeffs) const {
  Eigen::VectorXd out(free_dim());
  for (int i = 0; i < free_dim(); ++i) out[i] = coeffs[free_dofs_[i]];
  return out;
}

std::vector<Vec3> eval_basis(const SpaceHandle& space, int t, const Vec3& x) {
  const Bary lambda = barycentric(space.mesh(), t, x);
  for (double l : lambda)
    if (l < -1e-12) throw Error(ErrorCode::invalid_argument, "point outside element");
  std::vector<Vec3> values;
  for (const auto& phi : space.basis(t)) values.push_back(evaluate(phi, lambda));
  return values;
}

Eigen::VectorXd interpolate(const SpaceHandle& space, const std::function<BaryVec(int)>& field) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(space.global_dim());
  std::vector<char> assigned(space.global_dim(), 0);
  for (int t = 0; t < space.mesh().num_tets(); ++t) {
    const Eigen::VectorXd local = apply_dofs(space.level(), space.degree(), space.geometry(t), field(t));
    const auto map = space.dof_map(t);
    for (int k = 0; k < space.local_dim(); ++k)
      if (!assigned[map[k]]) {
        out[map[k]] = local[k];
        assigned[map[k]] = 1;
      }
  }
  return out;
}

double conformity_defect(const Mesh& mesh, int level, const std::function<BaryVec(int)>& field) {
  if (level == 3) return 0.0;
  constexpr double a = 0.445948490915965, b = 0.091576213509771;
  static const std::array<std::array<double, 3>, 6> points{{{a, a, 1 - 2 * a},
                                                            {a, 1 - 2 * a, a},
                                                            {1 - 2 * a, a, a},
                                                            {b, b, 1 - 2 * b},
                                                            {b, 1 - 2 * b, b},
                                                            {1 - 2 * b, b, b}}};
  double worst = 0.0;
  for (int f = 0; f < mesh.num_faces(); ++f) {
    const auto& ft = mesh.face_tets(f);
    if (ft[1] < 0) continue;
    const Vec3 n = mesh.face_normal(f);
    const BaryVec u0 = field(ft[0]), u1 = field(ft[1]);
    auto local_slots = [&](int t) {
      std::array<int, 3> slots{};
      for (int i = 0; i < 3; ++i)
        for (int k = 0; k < 4; ++k)
          if (mesh.jcv(t, k) == mesh.jfv(f, i)) slots[i] = k;
      return slots;
    };
    const auto s0 = local_slots(ft[0]), s1 = local_slots(ft[1]);
    for (const auto& p : points) {
      Bary l0{0, 0, 0, 0}, l1{0, 0, 0, 0};
      for (int i = 0; i < 3; ++i) {
        l0[s0[i]] = p[i];
        l1[s1[i]] = p[i];
      }
      const Vec3 jump = evaluate(u0, l0) - evaluate(u1, l1);
      double defect = 0.0;
      if (level == 0)
        defect = std::abs(jump[0]);
      else if (level == 1)
        defect = (jump - jump.dot(n) * n).norm();
      else
        defect = std::abs(jump.dot(n));
      worst = std::max(worst, defect);
    }
  }
  return worst;
}

}  // namespace derham
