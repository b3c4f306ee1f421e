#include "derham/equilibration.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

namespace derham {

namespace {

constexpr std::array<int, 4> kAll{0, 1, 2, 3};
constexpr int kMaxFieldDegree = 6;

int local_index(const Mesh& mesh, int t, int vertex) {
  for (int k = 0; k < 4; ++k)
    if (mesh.jcv(t, k) == vertex) return k;
  return -1;
}

BaryPoly combination(const std::vector<MultiIndex>& monomials, const Eigen::VectorXd& c) {
  BaryPoly p(monomials.empty() ? 0 : monomials[0][0] + monomials[0][1] + monomials[0][2] + monomials[0][3]);
  for (std::size_t m = 0; m < monomials.size(); ++m) p[static_cast<int>(m)] = c[static_cast<Eigen::Index>(m)];
  return p;
}

BaryVec combination(const std::vector<BaryVec>& basis, const Eigen::VectorXd& c) {
  BaryVec u{BaryPoly(0), BaryPoly(0), BaryPoly(0)};
  for (std::size_t k = 0; k < basis.size(); ++k)
    if (c[static_cast<Eigen::Index>(k)] != 0.0) u = add(u, scale(basis[k], c[static_cast<Eigen::Index>(k)]));
  return u;
}

double l2_norm(const SpaceHandle& space, const std::vector<BaryVec>& cells) {
  double s = 0.0;
  for (int t = 0; t < space.mesh().num_tets(); ++t)
    s += dot(cells[t], cells[t]).integrate(kAll, space.geometry(t).volume);
  return std::sqrt(std::max(0.0, s));
}

BaryVec elevated(const BaryVec& v, int q) { return {v[0].elevated(q), v[1].elevated(q), v[2].elevated(q)}; }

}  // namespace

BrokenField broken_from_space(const SpaceHandle& space, const Eigen::VectorXd& coeffs) {
  BrokenField f;
  f.level = space.level();
  f.degree = space.level() == 3 ? space.degree() : space.degree() + 1;
  f.cells.reserve(space.mesh().num_tets());
  for (int t = 0; t < space.mesh().num_tets(); ++t) f.cells.push_back(elevated(space.local_field(t, coeffs), f.degree));
  return f;
}

void write_broken_field(std::ostream& out, const BrokenField& field) {
  out << "level=" << field.level << " degree=" << field.degree << " ntets=" << field.cells.size() << '\n';
  char buf[40];
  for (const auto& cell : field.cells)
    for (int c = 0; c < field.components(); ++c) {
      const BaryPoly p = cell[c].elevated(field.degree);
      for (int i = 0; i < p.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g", p[i]);
        out << (i ? " " : "") << buf;
      }
      out << '\n';
    }
}

BrokenField read_broken_field(std::istream& in) {
  std::string line;
  int lineno = 0;
  auto next_line = [&]() -> bool {
    while (std::getline(in, line)) {
      ++lineno;
      if (!line.empty() && line[0] != '#' && line.find_first_not_of(" \t\r") != std::string::npos) return true;
    }
    return false;
  };
  auto fail = [&](const std::string& what) {
    throw Error(ErrorCode::parse, "line " + std::to_string(lineno) + ": " + what);
  };
  if (!next_line()) fail("missing header");
  BrokenField f;
  int ntets = -1;
  if (std::sscanf(line.c_str(), "level=%d degree=%d ntets=%d", &f.level, &f.degree, &ntets) != 3)
    fail("expected 'level=L degree=q ntets=T'");
  if (f.level < 0 || f.level > 3 || f.degree < 0 || f.degree > kMaxFieldDegree || ntets < 0)
    fail("header values out of range");
  const int n = num_monomials(f.degree);
  f.cells.resize(ntets);
  for (int t = 0; t < ntets; ++t) {
    f.cells[t] = {BaryPoly(f.degree), BaryPoly(f.degree), BaryPoly(f.degree)};
    for (int c = 0; c < f.components(); ++c) {
      if (!next_line()) fail("unexpected end of file");
      std::istringstream row(line);
      for (int i = 0; i < n; ++i)
        if (!(row >> f.cells[t][c][i])) fail("expected " + std::to_string(n) + " coefficients");
      std::string extra;
      if (row >> extra) fail("too many coefficients");
    }
  }
  return f;
}

double check_conformity(const Mesh& mesh, BrokenField& field, double tol) {
  if (static_cast<int>(field.cells.size()) != mesh.num_tets())
    throw Error(ErrorCode::invalid_argument, "field and mesh have different numbers of tets");
  double scale = 0.0;
  for (const auto& cell : field.cells)
    for (int c = 0; c < field.components(); ++c) scale = std::max(scale, cell[c].max_abs());
  const double defect =
      conformity_defect(mesh, field.level, [&](int t) { return field.cells[t]; }) / (scale > 0.0 ? scale : 1.0);
  field.conformity_checked = defect <= tol;
  return defect;
}

BrokenField l2_project_broken(const Mesh& mesh, const BrokenField& u, int degree) {
  if (u.degree > kMaxFieldDegree || degree < 0 || degree > kMaxFieldDegree)
    throw Error(ErrorCode::invalid_argument, "polynomial degree too large for exact projection");
  if (static_cast<int>(u.cells.size()) != mesh.num_tets())
    throw Error(ErrorCode::invalid_argument, "field and mesh have different numbers of tets");
  const auto& mono = multi_indices(degree);
  const int n = static_cast<int>(mono.size());
  Eigen::MatrixXd gram(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) gram(i, j) = (BaryPoly::monomial(mono[i]) * BaryPoly::monomial(mono[j])).integrate(kAll, 1.0);
  const Eigen::LDLT<Eigen::MatrixXd> g(gram);
  BrokenField out;
  out.level = u.level;
  out.degree = degree;
  out.cells.resize(u.cells.size());
  for (int t = 0; t < mesh.num_tets(); ++t) {
    out.cells[t] = {BaryPoly(degree), BaryPoly(degree), BaryPoly(degree)};
    for (int c = 0; c < u.components(); ++c) {
      Eigen::VectorXd b(n);
      for (int i = 0; i < n; ++i) b[i] = (u.cells[t][c] * BaryPoly::monomial(mono[i])).integrate(kAll, 1.0);
      out.cells[t][c] = combination(mono, g.solve(b));
    }
  }
  return out;
}

BrokenField elementwise_constrained(const SpaceHandle& rt, const BrokenField& u) {
  if (rt.level() != 2) throw Error(ErrorCode::invalid_argument, "elementwise minimizer needs the level-2 space");
  if (u.level != 2) throw Error(ErrorCode::invalid_argument, "input must be a flux field");
  const Mesh& mesh = rt.mesh();
  if (static_cast<int>(u.cells.size()) != mesh.num_tets())
    throw Error(ErrorCode::invalid_argument, "field and mesh have different numbers of tets");
  const int p = rt.degree();
  const auto& mono = multi_indices(p);
  const int nk = rt.local_dim(), nm = static_cast<int>(mono.size());
  BrokenField xi;
  xi.level = 2;
  xi.degree = p + 1;
  xi.cells.resize(mesh.num_tets());
  for (int t = 0; t < mesh.num_tets(); ++t) {
    const auto& geo = rt.geometry(t);
    const auto& basis = rt.basis(t);
    Eigen::MatrixXd a(nk, nk), b(nm, nk);
    Eigen::VectorXd f(nk), g(nm);
    const BaryPoly divu = divergence(u.cells[t], geo.grads);
    for (int k = 0; k < nk; ++k) {
      for (int j = k; j < nk; ++j) a(k, j) = a(j, k) = dot(basis[k], basis[j]).integrate(kAll, geo.volume);
      f[k] = dot(u.cells[t], basis[k]).integrate(kAll, geo.volume);
      const BaryPoly divphi = divergence(basis[k], geo.grads);
      for (int m = 0; m < nm; ++m) b(m, k) = (divphi * BaryPoly::monomial(mono[m])).integrate(kAll, geo.volume);
    }
    for (int m = 0; m < nm; ++m) g[m] = (divu * BaryPoly::monomial(mono[m])).integrate(kAll, geo.volume);
    SaddleSolution s;
    try {
      s = solve_saddle(a, b, f, g);
    } catch (const Error&) {
      throw Error(ErrorCode::numerical, "elementwise divergence constraint is not solvable on tet " + std::to_string(t));
    }
    xi.cells[t] = elevated(combination(basis, s.u), p + 1);
  }
  return xi;
}

StarResult star_equilibrate(const SpaceHandle& rt, const BrokenField& u, const BrokenField& xi, int vertex) {
  const Mesh& mesh = rt.mesh();
  if (vertex < 0 || vertex >= mesh.num_vertices()) throw Error(ErrorCode::invalid_argument, "vertex out of range");
  const int p = rt.degree();
  const auto& mono = multi_indices(p);
  const int nm = static_cast<int>(mono.size());
  const auto tets = mesh.vertex_tets(vertex);
  const int nt = static_cast<int>(tets.size());

  // Unknowns: RT DOFs of the star except those on faces opposite to the vertex.
  std::map<int, int> unknown;
  for (int t : tets) {
    const int a = local_index(mesh, t, vertex);
    const auto map = rt.dof_map(t);
    for (int k = 0; k < rt.local_dim(); ++k) {
      const auto& d = rt.dofs()[k];
      if (d.kind == EntityKind::face && kFaceOpposite[d.entity] == a) continue;
      unknown.emplace(map[k], 0);
    }
  }
  int idx = 0;
  for (auto& [g, i] : unknown) i = idx++;
  const int n = idx;

  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n), b = Eigen::MatrixXd::Zero(nm * nt, n);
  Eigen::VectorXd f = Eigen::VectorXd::Zero(n), g(nm * nt), w(nm * nt);
  double compat = 0.0, compat_scale = 0.0;
  for (int s = 0; s < nt; ++s) {
    const int t = tets[s];
    const int la = local_index(mesh, t, vertex);
    const auto& geo = rt.geometry(t);
    const auto& basis = rt.basis(t);
    const auto map = rt.dof_map(t);
    const BaryPoly psi = BaryPoly::coordinate(la);
    const Vec3 grad_psi = geo.grads.row(la).transpose();
    const BaryPoly divu = divergence(u.cells[t], geo.grads);
    const BaryPoly data = psi * divu + dot(xi.cells[t], grad_psi);
    const double part1 = (psi * divu).integrate(kAll, geo.volume);
    const double part2 = dot(xi.cells[t], grad_psi).integrate(kAll, geo.volume);
    compat += part1 + part2;
    compat_scale += std::abs(part1) + std::abs(part2);
    const BaryVec target = combination(basis, apply_dofs(2, p, geo, multiply(psi, xi.cells[t])));
    std::vector<int> cols(rt.local_dim(), -1);
    for (int k = 0; k < rt.local_dim(); ++k) {
      const auto it = unknown.find(map[k]);
      if (it != unknown.end()) cols[k] = it->second;
    }
    for (int k = 0; k < rt.local_dim(); ++k) {
      if (cols[k] < 0) continue;
      for (int j = 0; j < rt.local_dim(); ++j)
        if (cols[j] >= 0) a(cols[k], cols[j]) += dot(basis[k], basis[j]).integrate(kAll, geo.volume);
      f[cols[k]] += dot(target, basis[k]).integrate(kAll, geo.volume);
      const BaryPoly divphi = divergence(basis[k], geo.grads);
      for (int m = 0; m < nm; ++m)
        b(s * nm + m, cols[k]) = (divphi * BaryPoly::monomial(mono[m])).integrate(kAll, geo.volume);
    }
    for (int m = 0; m < nm; ++m) {
      g[s * nm + m] = (data * BaryPoly::monomial(mono[m])).integrate(kAll, geo.volume);
      w[s * nm + m] = BaryPoly::monomial(mono[m]).integrate(kAll, geo.volume);
    }
  }

  StarResult r;
  r.vertex = vertex;
  r.interior = !mesh.boundary_vertex(vertex);
  r.compatibility = std::abs(compat) / (compat_scale > 0.0 ? compat_scale : 1.0);
  if (r.interior && r.compatibility > 1e-9)
    throw Error(ErrorCode::compatibility_violation,
                "compatibility violation at vertex " + std::to_string(vertex) + " (is the input conforming?)");

  Eigen::MatrixXd bb = b;
  Eigen::VectorXd gg = g;
  if (r.interior) {
    // Mean-free multipliers.
    const Eigen::MatrixXd q = orthogonal_complement(w);
    bb = q.transpose() * b;
    gg = q.transpose() * g;
  }
  const SaddleSolution sol = solve_saddle(a, bb, f, gg);
  r.euler_residual = sol.primal_residual;
  const Eigen::VectorXd res = b * sol.u - g;
  r.divergence_residual = res.cwiseAbs().maxCoeff() / std::max(g.cwiseAbs().maxCoeff(), 1e-300);
  if (g.cwiseAbs().maxCoeff() == 0.0) r.divergence_residual = res.cwiseAbs().maxCoeff();
  r.coeffs = Eigen::VectorXd::Zero(rt.global_dim());
  for (const auto& [gdof, i] : unknown) r.coeffs[gdof] = sol.u[i];
  return r;
}

EquilibrationResult commuting_projection_hdiv(std::shared_ptr<const Mesh> mesh, int degree, const BrokenField& u,
                                              bool check_idempotency) {
  if (u.level != 2) throw Error(ErrorCode::invalid_argument, "input must be a flux field");
  if (u.degree < degree) throw Error(ErrorCode::invalid_argument, "input degree must be at least the target degree");
  if (u.degree > kMaxFieldDegree) throw Error(ErrorCode::invalid_argument, "input degree too large");
  const SpaceHandle rt = SpaceHandle::build(mesh, 2, degree, Boundary::none);
  const SpaceHandle dg = SpaceHandle::build(mesh, 3, degree, Boundary::none);
  const SpaceHandle hat = SpaceHandle::build(mesh, 0, 0, Boundary::none);
  const BrokenField xi = elementwise_constrained(rt, u);

  EquilibrationResult out;
  out.coeffs = Eigen::VectorXd::Zero(rt.global_dim());
  for (int a = 0; a < mesh->num_vertices(); ++a) {
    StarResult s = star_equilibrate(rt, u, xi, a);
    out.coeffs += s.coeffs;
    out.max_compatibility = std::max(out.max_compatibility, s.interior ? s.compatibility : 0.0);
    out.max_star_divergence = std::max(out.max_star_divergence, s.divergence_residual);
    s.coeffs.resize(0);
    out.stars.push_back(std::move(s));
  }

  // Partition of unity of the hat functions at interior and face points of every tet.
  static const std::array<Bary, 5> points{{{0.25, 0.25, 0.25, 0.25},
                                           {0.58541020, 0.13819660, 0.13819660, 0.13819660},
                                           {0.13819660, 0.58541020, 0.13819660, 0.13819660},
                                           {0.13819660, 0.13819660, 0.58541020, 0.13819660},
                                           {1.0 / 3, 1.0 / 3, 1.0 / 3, 0.0}}};
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(hat.global_dim());
  for (int t = 0; t < mesh->num_tets(); ++t) {
    const auto& basis = hat.basis(t);
    for (const auto& x : points) {
      double s = 0.0;
      for (int k = 0; k < 4; ++k) s += basis[k][0](x) * ones[hat.dof_map(t)[k]];
      out.partition_of_unity = std::max(out.partition_of_unity, std::abs(s - 1.0));
    }
  }

  // Both sides of the commuting identity, in level-3 DOFs.
  const Eigen::SparseMatrix<double> d = assemble_diff(rt, dg).matrix;
  const Eigen::VectorXd lhs = d * out.coeffs;
  Eigen::VectorXd rhs(dg.global_dim()), star_sum = Eigen::VectorXd::Zero(dg.global_dim());
  for (int t = 0; t < mesh->num_tets(); ++t) {
    const auto& geo = rt.geometry(t);
    const BaryPoly divu = divergence(u.cells[t], geo.grads);
    const Eigen::VectorXd m = apply_dofs(3, degree, geo, {divu, BaryPoly(0), BaryPoly(0)});
    Eigen::VectorXd parts = Eigen::VectorXd::Zero(m.size());
    for (int k = 0; k < 4; ++k) {
      const BaryPoly data = BaryPoly::coordinate(k) * divu + dot(xi.cells[t], Vec3(geo.grads.row(k).transpose()));
      parts += apply_dofs(3, degree, geo, {data, BaryPoly(0), BaryPoly(0)});
    }
    const auto map = dg.dof_map(t);
    for (int k = 0; k < dg.local_dim(); ++k) {
      rhs[map[k]] = m[k];
      star_sum[map[k]] = parts[k];
    }
  }
  const double scale = std::max(rhs.cwiseAbs().maxCoeff(), 1e-300);
  out.report.level = 2;
  out.report.input = "flux field of degree " + std::to_string(u.degree);
  out.report.norm_kind = "L2";
  out.report.commuting_residual = (lhs - rhs).cwiseAbs().maxCoeff() / scale;
  out.divergence_partition = (star_sum - rhs).cwiseAbs().maxCoeff() / scale;

  std::vector<BaryVec> projected(mesh->num_tets());
  for (int t = 0; t < mesh->num_tets(); ++t) projected[t] = rt.local_field(t, out.coeffs);
  double pscale = 0.0;
  for (const auto& c : projected)
    for (const auto& comp : c) pscale = std::max(pscale, comp.max_abs());
  out.conformity = conformity_defect(*mesh, 2, [&](int t) { return projected[t]; }) / (pscale > 0.0 ? pscale : 1.0);
  const double nu = l2_norm(rt, u.cells), np = l2_norm(rt, projected);
  out.report.stability_ratio = nu > 0.0 ? np / nu : 0.0;

  if (check_idempotency) {
    const BrokenField again = broken_from_space(rt, out.coeffs);
    BrokenField lifted = again;
    lifted.degree = std::max(again.degree, degree);
    const EquilibrationResult second = commuting_projection_hdiv(mesh, degree, lifted, false);
    const Eigen::SparseMatrix<double> mass = assemble_mass(rt).matrix;
    const Eigen::VectorXd diff = second.coeffs - out.coeffs;
    const double denom = std::sqrt(out.coeffs.dot(mass * out.coeffs));
    out.report.projection_residual = std::sqrt(diff.dot(mass * diff)) / (denom > 0.0 ? denom : 1.0);
  }
  return out;
}

}  // namespace derham
