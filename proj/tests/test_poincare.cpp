#include "doctest.h"

#include <Eigen/Eigenvalues>

#include "derham/poincare.hpp"

using namespace derham;

namespace {

std::shared_ptr<const Mesh> share(Mesh m) { return std::make_shared<const Mesh>(std::move(m)); }

Eigen::MatrixXd dense(const Eigen::SparseMatrix<double>& a) { return Eigen::MatrixXd(a); }

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error raised");
  return ErrorCode::numerical;
}

}  // namespace

TEST_CASE("splitmix64 reference sequence") {
  SplitMix64 g(0);
  CHECK(g.next() == 0xe220a8397b1dcdafULL);
  CHECK(g.next() == 0x6e789e6aa1b965f4ULL);
  SplitMix64 u(42);
  for (int i = 0; i < 1000; ++i) {
    const double x = u.uniform();
    CHECK((x >= -1.0 && x < 1.0));
  }
  CHECK(SplitMix64(7).vector(5) == SplitMix64(7).vector(5));
}

TEST_CASE("constant for a surjective divergence via the Schur complement") {
  // With D onto, the minimal preimage is M^-1 D^T S^-1 r with S = D M^-1 D^T, so
  // (C h)^2 = max r^T S^-1 r / r^T M+ r, the top eigenvalue of the pair (S^-1, M+).
  for (int n = 1; n <= 2; ++n) {
    const LevelProblem prob = LevelProblem::build(share(generate::cube_freudenthal(n)), 2, 0, Boundary::none);
    const Eigen::MatrixXd m = dense(prob.mass), mp = dense(prob.next_mass), d = dense(prob.diff);
    const Eigen::MatrixXd s = d * m.inverse() * d.transpose();
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(s.inverse(), mp);
    const double oracle = std::sqrt(es.eigenvalues().maxCoeff()) / prob.h_omega;
    const ConstantReport r = constant(prob);
    CHECK(r.constant == doctest::Approx(oracle).epsilon(1e-10));
    CHECK(r.kernel_dim == prob.dim() - prob.next.free_dim());
  }
}

TEST_CASE("constants are invariant under scaling") {
  const Mesh m = generate::stretched_cube(1, 2.0);
  for (int l = 0; l <= 2; ++l) {
    const ConstantReport a = constant(LevelProblem::build(share(m), l, 0, Boundary::none));
    const ConstantReport b = constant(LevelProblem::build(share(m.scaled(0.37)), l, 0, Boundary::none));
    CHECK(b.constant == doctest::Approx(a.constant).epsilon(1e-10));
    CHECK(b.lambda_min_pos * 0.37 * 0.37 == doctest::Approx(a.lambda_min_pos).epsilon(1e-10));
  }
}

TEST_CASE("kernel dimension agrees with the complex") {
  const auto m = share(generate::cube_freudenthal(2));
  for (auto bc : {Boundary::none, Boundary::homogeneous}) {
    const ComplexReport c = complex_report(m, 1, bc);
    for (int l = 1; l <= 2; ++l) CHECK(constant(LevelProblem::build(m, l, 1, bc)).kernel_dim == c.kernel_dims[l]);
  }
}

TEST_CASE("four characterizations agree") {
  const LevelProblem prob = LevelProblem::build(share(generate::vertex_star_synthetic(8)), 1, 0, Boundary::homogeneous);
  const EquivalenceReport e = equivalence(prob, 25, 3);
  CHECK(e.pass);
  CHECK(e.infsup_error < 1e-8);
  CHECK(e.potential_error < 1e-8);
  CHECK(e.stability_error < 1e-8);
  CHECK(e.sampled_excess == 0.0);
  CHECK(e.report.seed == 3);
}

TEST_CASE("minimum-norm preimages") {
  const LevelProblem prob = LevelProblem::build(share(generate::cube_freudenthal(1)), 1, 0, Boundary::none);
  const MinimumNorm mn(prob);
  SplitMix64 rng(5);
  const Eigen::VectorXd v = rng.vector(prob.dim());
  const Eigen::VectorXd r = prob.diff * v;
  const Eigen::VectorXd u = mn.solve(r);
  CHECK((prob.diff * u - r).norm() < 1e-10 * r.norm());
  // Orthogonal to the kernel (the gradients).
  const LevelProblem grad = LevelProblem::build(prob.mesh, 0, 0, Boundary::none);
  const Eigen::MatrixXd g = dense(grad.diff);
  CHECK((g.transpose() * (prob.mass * u)).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(prob.norm(u) <= prob.norm(v) + 1e-12);
  // A divergence-carrying target is not a curl.
  const CartVec x{CartPoly::monomial(1, 0, 0), CartPoly::monomial(0, 1, 0), CartPoly::monomial(0, 0, 1)};
  const Eigen::VectorXd bad = interpolate(prob.next, [&](int t) { return to_bary(x, prob.mesh->tet_points(t)); });
  CHECK(code_of([&] { mn.solve(bad); }) == ErrorCode::incompatible_constraint);
}

TEST_CASE("level problem errors") {
  CHECK(code_of([] { LevelProblem::build(share(generate::cube_freudenthal(2)), 1, 1, Boundary::none, 10); }) ==
        ErrorCode::cap_exceeded);
  CHECK(code_of([] { LevelProblem::build(share(generate::cube_freudenthal(1)), 0, 0, Boundary::homogeneous); }) ==
        ErrorCode::empty_space);
  CHECK(code_of([] { LevelProblem::build(share(generate::cube_freudenthal(1)), 3, 0, Boundary::none); }) ==
        ErrorCode::invalid_argument);
}

TEST_CASE("minimizing projection is a commuting projection") {
  const auto coarse = share(generate::cube_freudenthal(1));
  const auto fine = share(generate::cube_freudenthal(2));
  const MinimizingProjection proj(coarse, 0, Boundary::none, fine, 1);
  SplitMix64 rng(9);
  for (int l = 1; l <= 3; ++l) {
    const Eigen::VectorXd v = rng.vector(proj.coarse_dim(l));
    CHECK((proj.apply(l, proj.embed(l, v)) - v).norm() < 1e-10 * v.norm());
    if (l == 3) continue;
    const Eigen::VectorXd u = rng.vector(proj.rich_dim(l));
    const Eigen::VectorXd lhs = proj.coarse_diff(l, proj.apply(l, u));
    const Eigen::VectorXd rhs = proj.apply(l + 1, proj.rich_diff(l, u));
    CHECK((lhs - rhs).norm() < 1e-10 * (1.0 + rhs.norm()));
    // The embedding preserves norms.
    CHECK(proj.rich_norm(l, proj.embed(l, v)) == doctest::Approx(proj.coarse_norm(l, v)).epsilon(1e-11));
  }
  CHECK(code_of([&] { MinimizingProjection(fine, 0, Boundary::none, coarse, 0); }) == ErrorCode::non_nested);
}

TEST_CASE("rich-oracle ratios") {
  const auto m = share(generate::cube_freudenthal(1));
  const Route1Report same = route1_min_ratio(m, 2, 0, Boundary::none, {{m, 0, "same"}}, 5, 1);
  CHECK(same.min_ratio[0] == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(same.max_ratio[0] == doctest::Approx(1.0).epsilon(1e-10));
  // A richer space admits preimages of smaller norm.
  const Route1Report rich = route1_min_ratio(m, 2, 0, Boundary::none, {{m, 1, "p+1"}, {m, 2, "p+2"}}, 5, 1);
  CHECK(rich.all_nested);
  CHECK(rich.min_ratio[0] >= 1.0 - 1e-12);
  CHECK(rich.monotone);
}

TEST_CASE("Piola transport to a reference mesh") {
  const auto m = share(generate::cube_freudenthal(1));
  const Route3Report self = route3_transport(m, 0, Boundary::none, m);
  for (int l = 0; l < 4; ++l) {
    CHECK(self.norm[l] == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(self.inverse_norm[l] == doctest::Approx(1.0).epsilon(1e-10));
  }
  CHECK(self.bound_holds);
  for (int k = 0; k < 2; ++k) CHECK(self.transported_bound[k] == doctest::Approx(self.constant_direct[k]).epsilon(1e-9));

  const Route3Report r = route3_transport(share(generate::stretched_cube(1, 4.0)), 1, Boundary::none,
                                          share(normalized_reference(generate::cube_freudenthal(1))));
  for (double c : r.commuting) CHECK(c < 1e-10);
  for (double c : r.conformity) CHECK(c < 1e-10);
  CHECK(r.bound_holds);

  CHECK(code_of([&] { route3_transport(m, 0, Boundary::none, share(generate::cube_freudenthal(2))); }) ==
        ErrorCode::connectivity_mismatch);
}
