#include "derham/poincare.hpp"

#include <algorithm>
#include <cmath>

#include "derham/transfer.hpp"

namespace derham {

namespace {

Eigen::MatrixXd dense(const Eigen::SparseMatrix<double>& a) { return Eigen::MatrixXd(a); }

double safe(double x) { return x > 0.0 ? x : 1.0; }

double inf_sup_from(const MinimumNorm& mn) {
  const LevelProblem& p = mn.problem();
  const Eigen::MatrixXd b = mn.range().transpose() * dense(p.next_mass * p.diff);
  const Eigen::LLT<Eigen::MatrixXd> m(dense(p.mass));
  const Eigen::MatrixXd s = b * m.solve(b.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (s + s.transpose()), Eigen::EigenvaluesOnly);
  return std::sqrt(std::max(0.0, es.eigenvalues()[0]));
}

double potential_norm_from(const MinimumNorm& mn) {
  const Eigen::MatrixXd phi = mn.potentials();
  const Eigen::MatrixXd g = phi.transpose() * (mn.problem().mass * phi);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (g + g.transpose()), Eigen::EigenvaluesOnly);
  return std::sqrt(std::max(0.0, es.eigenvalues()[es.eigenvalues().size() - 1]));
}

}  // namespace

std::uint64_t SplitMix64::next() {
  std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double SplitMix64::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-52 - 1.0; }

Eigen::VectorXd SplitMix64::vector(Eigen::Index n) {
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = uniform();
  return v;
}

LevelProblem LevelProblem::build(std::shared_ptr<const Mesh> mesh, int level, int degree, Boundary bc, int cap) {
  if (level < 0 || level > 2) throw Error(ErrorCode::invalid_argument, "level must be 0, 1 or 2");
  LevelProblem p;
  p.level = level;
  p.degree = degree;
  p.bc = bc;
  p.mesh = mesh;
  p.space = SpaceHandle::build(mesh, level, degree, bc);
  if (cap > 0 && p.space.free_dim() > cap)
    throw Error(ErrorCode::cap_exceeded, "dimension " + std::to_string(p.space.free_dim()) + " exceeds cap " +
                                             std::to_string(cap));
  if (p.space.free_dim() == 0) throw Error(ErrorCode::empty_space, "empty space");
  p.next = SpaceHandle::build(mesh, level + 1, degree, bc);
  p.mass = free_block(assemble_mass(p.space).matrix, p.space, p.space);
  p.next_mass = free_block(assemble_mass(p.next).matrix, p.next, p.next);
  p.diff = free_block(assemble_diff(p.space, p.next).matrix, p.next, p.space);
  p.h_omega = geometry(*mesh).h_omega;
  return p;
}

ConstantReport constant(const LevelProblem& p) {
  const Eigen::SparseMatrix<double> k = p.diff.transpose() * p.next_mass * p.diff;
  const EigenResult eig = sym_gen_eig(dense(k), dense(p.mass));
  const int n = p.dim();
  const double lmax = eig.values[n - 1];
  if (!(lmax > 0.0)) throw Error(ErrorCode::trivial_range, "trivial range");
  const double threshold = lmax * n * 1e-12;
  int kernel = 0;
  while (kernel < n && eig.values[kernel] < threshold) ++kernel;
  const int svd_kernel = n - svd_rank(dense(p.diff));
  if (kernel != svd_kernel)
    throw Error(ErrorCode::numerical, "eigenvalue threshold gives kernel dimension " + std::to_string(kernel) +
                                          " but SVD gives " + std::to_string(svd_kernel));
  ConstantReport r;
  r.level = p.level;
  r.degree = p.degree;
  r.bc = p.bc;
  r.h_omega = p.h_omega;
  r.lambda_min_pos = eig.values[kernel];
  r.constant = 1.0 / (p.h_omega * std::sqrt(r.lambda_min_pos));
  r.kernel_dim = kernel;
  r.dim = n;
  r.extremal = eig.vectors.col(kernel);
  return r;
}

MinimumNorm::MinimumNorm(const LevelProblem& p) : problem_(&p) {
  const Eigen::MatrixXd d = dense(p.diff);
  const Eigen::MatrixXd mp = dense(p.next_mass);
  range_ = range_basis(d, mp);
  if (range_.cols() == 0) throw Error(ErrorCode::trivial_range, "trivial range");
  weight_ = range_.transpose() * mp;
  solver_.emplace(dense(p.mass), weight_ * d);
}

Eigen::VectorXd MinimumNorm::solve(const Eigen::VectorXd& r) const {
  const LevelProblem& p = *problem_;
  if (r.size() != p.next.free_dim()) throw Error(ErrorCode::invalid_argument, "constraint has wrong size");
  const Eigen::VectorXd u = solver_->solve(Eigen::VectorXd::Zero(p.dim()), weight_ * r).u;
  const double defect = p.next_norm(p.diff * u - r);
  if (defect > 1e-7 * std::max(p.next_norm(r), 1e-300)) throw Error(ErrorCode::incompatible_constraint, "incompatible constraint");
  return u;
}

Eigen::MatrixXd MinimumNorm::potentials() const {
  const Eigen::Index r = range_.cols();
  return solver_->solve_primal(Eigen::MatrixXd::Zero(problem_->dim(), r), Eigen::MatrixXd::Identity(r, r));
}

Eigen::VectorXd constrained_min(const LevelProblem& problem, const Eigen::VectorXd& r) {
  if (r.size() == problem.next.free_dim() && r.squaredNorm() == 0.0) return Eigen::VectorXd::Zero(problem.dim());
  return MinimumNorm(problem).solve(r);
}

double stability_sup(const LevelProblem& p, int n_samples, std::uint64_t seed, const Eigen::VectorXd* extremal) {
  if (n_samples < 1 && extremal == nullptr) throw Error(ErrorCode::invalid_argument, "need at least one sample");
  if (n_samples < 0) throw Error(ErrorCode::invalid_argument, "negative sample count");
  const MinimumNorm mn(p);
  SplitMix64 rng(seed);
  double best = 0.0;
  auto ratio = [&](const Eigen::VectorXd& v) {
    const Eigen::VectorXd r = p.diff * v;
    const double rn = p.next_norm(r);
    if (rn == 0.0) return;
    best = std::max(best, p.norm(mn.solve(r)) / (p.h_omega * rn));
  };
  for (int i = 0; i < n_samples; ++i) ratio(rng.vector(p.dim()));
  if (extremal) ratio(*extremal);
  return best;
}

double inf_sup(const LevelProblem& problem) { return inf_sup_from(MinimumNorm(problem)); }

double potential_norm(const LevelProblem& problem) { return potential_norm_from(MinimumNorm(problem)); }

EquivalenceReport equivalence(const LevelProblem& p, int n_samples, std::uint64_t seed, double tol) {
  EquivalenceReport e;
  e.report = constant(p);
  e.report.seed = seed;
  const MinimumNorm mn(p);
  e.report.infsup = inf_sup_from(mn);
  e.report.potential_norm = potential_norm_from(mn);
  const double c = e.report.constant, ch = c * p.h_omega;
  {
    const Eigen::VectorXd r = p.diff * e.report.extremal;
    e.report.stability = p.norm(mn.solve(r)) / (p.h_omega * p.next_norm(r));
  }
  SplitMix64 rng(seed);
  for (int i = 0; i < n_samples; ++i) {
    const Eigen::VectorXd r = p.diff * rng.vector(p.dim());
    const double rn = p.next_norm(r);
    if (rn == 0.0) continue;
    e.stability_sampled = std::max(e.stability_sampled, p.norm(mn.solve(r)) / (p.h_omega * rn));
  }
  e.infsup_error = std::abs(e.report.infsup * ch - 1.0);
  e.potential_error = std::abs(e.report.potential_norm / ch - 1.0);
  e.stability_error = std::abs(e.report.stability - c);
  e.sampled_excess = std::max(0.0, e.stability_sampled - c);
  e.pass = e.infsup_error <= tol && e.potential_error <= tol && e.stability_error <= tol * std::max(1.0, c) &&
           e.sampled_excess <= tol * std::max(1.0, c);
  return e;
}

MinimizingProjection::MinimizingProjection(std::shared_ptr<const Mesh> coarse, int degree, Boundary bc,
                                           std::shared_ptr<const Mesh> rich, int rich_degree) {
  for (int l = 1; l < 4; ++l) {
    coarse_[l] = SpaceHandle::build(coarse, l, degree, bc);
    rich_[l] = SpaceHandle::build(rich, l, rich_degree, bc);
    coarse_mass_[l] = free_block(assemble_mass(coarse_[l]).matrix, coarse_[l], coarse_[l]);
    rich_mass_[l] = free_block(assemble_mass(rich_[l]).matrix, rich_[l], rich_[l]);
    embed_[l] = free_block(embedding(coarse_[l], rich_[l]), rich_[l], coarse_[l]);
  }
  for (int l = 1; l < 3; ++l) {
    coarse_diff_[l] = free_block(assemble_diff(coarse_[l], coarse_[l + 1]).matrix, coarse_[l + 1], coarse_[l]);
    rich_diff_[l] = free_block(assemble_diff(rich_[l], rich_[l + 1]).matrix, rich_[l + 1], rich_[l]);
    const Eigen::MatrixXd d = dense(coarse_diff_[l]);
    const Eigen::MatrixXd mp = dense(coarse_mass_[l + 1]);
    range_[l] = range_basis(d, mp);
    solver_[l].emplace(dense(coarse_mass_[l]), Eigen::MatrixXd(range_[l].transpose() * mp * d));
  }
  l2_.compute(dense(coarse_mass_[3]));
  h_omega_ = geometry(*coarse).h_omega;
}

Eigen::VectorXd MinimizingProjection::apply(int level, const Eigen::VectorXd& u) const {
  if (level < 1 || level > 3) throw Error(ErrorCode::invalid_argument, "projection defined for levels 1..3");
  if (u.size() != rich_dim(level)) throw Error(ErrorCode::invalid_argument, "rich field has wrong size");
  const Eigen::VectorXd f = embed_[level].transpose() * (rich_mass_[level] * u);
  if (level == 3) return l2_.solve(f);
  const Eigen::VectorXd du = rich_diff_[level] * u;
  const Eigen::VectorXd g = range_[level].transpose() * (embed_[level + 1].transpose() * (rich_mass_[level + 1] * du));
  return solver_[level]->solve(f, g).u;
}

Eigen::VectorXd MinimizingProjection::embed(int level, const Eigen::VectorXd& v) const { return embed_[level] * v; }

double MinimizingProjection::coarse_norm(int level, const Eigen::VectorXd& v) const {
  return std::sqrt(v.dot(coarse_mass_[level] * v));
}

double MinimizingProjection::rich_norm(int level, const Eigen::VectorXd& u) const {
  return std::sqrt(u.dot(rich_mass_[level] * u));
}

ProjectionReport MinimizingProjection::report(int level, const Eigen::VectorXd& u, double constant) const {
  ProjectionReport r;
  r.level = level;
  const Eigen::VectorXd pu = apply(level, u);
  const Eigen::VectorXd again = apply(level, embed(level, pu));
  r.projection_residual = coarse_norm(level, again - pu) / safe(coarse_norm(level, pu));
  if (level == 3) {
    r.norm_kind = "L2";
    r.stability_ratio = coarse_norm(3, pu) / safe(rich_norm(3, u));
    return r;
  }
  const Eigen::VectorXd du = rich_diff(level, u);
  const Eigen::VectorXd lhs = coarse_diff(level, pu);
  const Eigen::VectorXd rhs = apply(level + 1, du);
  r.commuting_residual = coarse_norm(level + 1, lhs - rhs) / safe(std::max(coarse_norm(level + 1, rhs), rich_norm(level + 1, du)));
  const double h2 = h_omega_ * h_omega_;
  const double num = std::sqrt(std::pow(coarse_norm(level, pu), 2) + h2 * std::pow(coarse_norm(level + 1, lhs), 2));
  const double den = std::sqrt(std::pow(rich_norm(level, u), 2) + h2 * std::pow(rich_norm(level + 1, du), 2));
  r.norm_kind = "graph";
  r.stability_ratio = num / safe(den);
  r.bound = std::sqrt(10.0 + 8.0 * constant * constant);
  return r;
}

Route1Report route1_min_ratio(std::shared_ptr<const Mesh> mesh, int level, int degree, Boundary bc,
                              const std::vector<OracleSpec>& oracles, int n_samples, std::uint64_t seed) {
  if (n_samples < 1) throw Error(ErrorCode::invalid_argument, "need at least one sample");
  const LevelProblem coarse = LevelProblem::build(mesh, level, degree, bc);
  const MinimumNorm mn(coarse);
  Route1Report rep;
  rep.seed = seed;
  for (const auto& o : oracles) {
    const LevelProblem rich = LevelProblem::build(o.mesh ? o.mesh : mesh, level, o.degree, bc);
    // Both levels must nest; embedding() throws otherwise.
    free_block(embedding(coarse.space, rich.space), rich.space, coarse.space);
    const Eigen::SparseMatrix<double> e = free_block(embedding(coarse.next, rich.next), rich.next, coarse.next);
    const MinimumNorm oracle(rich);
    SplitMix64 rng(seed);
    std::vector<double> ratios;
    for (int i = 0; i < n_samples; ++i) {
      const Eigen::VectorXd r = coarse.diff * rng.vector(coarse.dim());
      if (coarse.next_norm(r) == 0.0) continue;
      const double nc = coarse.norm(mn.solve(r));
      const double no = rich.norm(oracle.solve(e * r));
      ratios.push_back(nc / no);
    }
    rep.oracles.push_back(o.label);
    rep.ratios.push_back(ratios);
    rep.max_ratio.push_back(ratios.empty() ? kNaN : *std::max_element(ratios.begin(), ratios.end()));
    rep.min_ratio.push_back(ratios.empty() ? kNaN : *std::min_element(ratios.begin(), ratios.end()));
  }
  for (std::size_t k = 1; k < rep.max_ratio.size(); ++k)
    if (rep.max_ratio[k] < rep.max_ratio[k - 1] - 1e-12) rep.monotone = false;
  return rep;
}

Mesh normalized_reference(const Mesh& mesh) {
  const double h = geometry(mesh).h_omega;
  Vec3 c = Vec3::Zero();
  for (const auto& x : mesh.vertices()) c += x;
  c /= static_cast<double>(mesh.num_vertices());
  std::vector<Vec3> v;
  v.reserve(mesh.num_vertices());
  for (const auto& x : mesh.vertices()) v.push_back((x - c) / h);
  return mesh.with_vertices(std::move(v));
}

Eigen::SparseMatrix<double> piola_matrix(const SpaceHandle& physical, const SpaceHandle& reference) {
  const Mesh& m = physical.mesh();
  const Mesh& r = reference.mesh();
  if (m.num_vertices() != r.num_vertices() || m.tets() != r.tets())
    throw Error(ErrorCode::connectivity_mismatch, "meshes have different connectivity arrays");
  if (physical.level() != reference.level() || physical.degree() != reference.degree())
    throw Error(ErrorCode::invalid_argument, "spaces differ in level or degree");
  const int l = physical.level();
  std::vector<Eigen::Triplet<double>> t;
  for (int c = 0; c < m.num_tets(); ++c) {
    const Mat3 j = AffineMap::between(r.tet_points(c), m.tet_points(c)).jacobian;
    const auto rows = reference.dof_map(c), cols = physical.dof_map(c);
    for (int k = 0; k < physical.local_dim(); ++k) {
      const Eigen::VectorXd v =
          apply_dofs(l, physical.degree(), reference.geometry(c), piola(l, j, physical.basis(c)[k]));
      for (int i = 0; i < reference.local_dim(); ++i)
        if (std::abs(v[i]) > 1e-13 * std::max(1.0, v.cwiseAbs().maxCoeff())) t.emplace_back(rows[i], cols[k], v[i]);
    }
  }
  std::stable_sort(t.begin(), t.end(), [](const auto& a, const auto& b) {
    return a.row() != b.row() ? a.row() < b.row() : a.col() < b.col();
  });
  std::vector<Eigen::Triplet<double>> unique;
  for (const auto& x : t) {
    if (!unique.empty() && unique.back().row() == x.row() && unique.back().col() == x.col()) {
      if (std::abs(unique.back().value() - x.value()) > 1e-8 * (1.0 + std::abs(x.value())))
        throw Error(ErrorCode::connectivity_mismatch, "Piola transport is inconsistent across shared entities");
      continue;
    }
    unique.push_back(x);
  }
  Eigen::SparseMatrix<double> out(reference.global_dim(), physical.global_dim());
  out.setFromTriplets(unique.begin(), unique.end());
  return out;
}

Route3Report route3_transport(std::shared_ptr<const Mesh> mesh, int degree, Boundary bc,
                              std::shared_ptr<const Mesh> reference, std::uint64_t seed) {
  if (!reference) reference = std::make_shared<const Mesh>(normalized_reference(*mesh));
  if (mesh->num_vertices() != reference->num_vertices() || mesh->tets() != reference->tets())
    throw Error(ErrorCode::connectivity_mismatch, "meshes have different connectivity arrays");
  Route3Report rep;
  rep.h_omega = geometry(*mesh).h_omega;
  rep.h_ref = geometry(*reference).h_omega;
  std::array<SpaceHandle, 4> phys, ref;
  std::array<Eigen::SparseMatrix<double>, 4> psi;
  SplitMix64 rng(seed);
  for (int l = 0; l < 4; ++l) {
    phys[l] = SpaceHandle::build(mesh, l, degree, bc);
    ref[l] = SpaceHandle::build(reference, l, degree, bc);
    psi[l] = piola_matrix(phys[l], ref[l]);

    // Measured norms on the free DOFs.
    const Eigen::MatrixXd p = dense(free_block(psi[l], ref[l], phys[l]));
    if (p.cols() > 0) {
      const Eigen::MatrixXd m = dense(free_block(assemble_mass(phys[l]).matrix, phys[l], phys[l]));
      const Eigen::MatrixXd mr = dense(free_block(assemble_mass(ref[l]).matrix, ref[l], ref[l]));
      const Eigen::MatrixXd g = p.transpose() * mr * p;
      const auto eig = sym_gen_eig(0.5 * (g + g.transpose()), m);
      rep.norm[l] = std::sqrt(eig.values[eig.values.size() - 1]);
      rep.inverse_norm[l] = 1.0 / std::sqrt(eig.values[0]);
    } else {
      rep.norm[l] = rep.inverse_norm[l] = kNaN;
    }

    // Transport a random field tetwise and check conformity on the reference mesh.
    const Eigen::VectorXd v = phys[l].expand(rng.vector(phys[l].free_dim()));
    std::vector<BaryVec> moved(mesh->num_tets());
    double scale = 0.0;
    for (int c = 0; c < mesh->num_tets(); ++c) {
      const Mat3 j = AffineMap::between(reference->tet_points(c), mesh->tet_points(c)).jacobian;
      moved[c] = piola(l, j, phys[l].local_field(c, v));
      for (const auto& comp : moved[c]) scale = std::max(scale, comp.max_abs());
    }
    rep.conformity[l] = conformity_defect(*reference, l, [&](int c) { return moved[c]; }) / safe(scale);
  }
  for (int l = 0; l < 3; ++l) {
    const Eigen::SparseMatrix<double> d = assemble_diff(phys[l], phys[l + 1]).matrix;
    const Eigen::SparseMatrix<double> dr = assemble_diff(ref[l], ref[l + 1]).matrix;
    const Eigen::MatrixXd lhs = dense(psi[l + 1] * d), rhs = dense(dr * psi[l]);
    const double s = std::max(lhs.cwiseAbs().maxCoeff(), rhs.cwiseAbs().maxCoeff());
    rep.commuting[l] = (lhs - rhs).cwiseAbs().maxCoeff() / safe(s);
  }
  for (int l = 1; l <= 2; ++l) {
    try {
      const LevelProblem pd = LevelProblem::build(mesh, l, degree, bc);
      const LevelProblem pr = LevelProblem::build(reference, l, degree, bc);
      rep.constant_direct[l - 1] = constant(pd).constant;
      rep.constant_reference[l - 1] = constant(pr).constant;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::empty_space && e.code() != ErrorCode::trivial_range) throw;
      continue;
    }
    rep.transported_bound[l - 1] =
        rep.inverse_norm[l] * rep.norm[l + 1] * rep.constant_reference[l - 1] * rep.h_ref / rep.h_omega;
    if (!(rep.constant_direct[l - 1] <= rep.transported_bound[l - 1] * (1.0 + 1e-10))) rep.bound_holds = false;
  }
  return rep;
}

}  // namespace derham
