#include "doctest.h"

#include <Eigen/SVD>
#include <sstream>

#include "derham/derham.hpp"

using namespace derham;

namespace {

std::shared_ptr<const Mesh> cube(int n) { return std::make_shared<const Mesh>(generate::cube_freudenthal(n)); }

// Independent rank oracle: Jacobi SVD with a loose relative threshold.
int rank_of(const Eigen::MatrixXd& a) {
  if (a.size() == 0) return 0;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
  const auto& s = svd.singularValues();
  int r = 0;
  for (int i = 0; i < s.size(); ++i) r += s[i] > 1e-9 * s[0];
  return r;
}

std::vector<std::array<int, 3>> monomials_upto(int k) {
  std::vector<std::array<int, 3>> out;
  for (int a = 0; a <= k; ++a)
    for (int b = 0; a + b <= k; ++b)
      for (int c = 0; a + b + c <= k; ++c) out.push_back({a, b, c});
  return out;
}

}  // namespace

TEST_CASE("lowest-order differentials are signed incidence matrices") {
  const auto m = cube(2);
  const Complex c = build_complex(m, 0, Boundary::none);
  for (int l = 0; l < 3; ++l) {
    const Eigen::MatrixXd d = c.diff[l].dense();
    for (int i = 0; i < d.rows(); ++i)
      for (int j = 0; j < d.cols(); ++j) CHECK((d(i, j) == 0.0 || d(i, j) == 1.0 || d(i, j) == -1.0));
  }
  // Each edge has one -1 and one +1.
  const Eigen::MatrixXd g = c.diff[0].dense();
  for (int e = 0; e < g.rows(); ++e) {
    CHECK(g.row(e).sum() == 0.0);
    CHECK(g.row(e).cwiseAbs().sum() == 2.0);
  }
  // Compositions vanish exactly.
  CHECK((c.diff[1].dense() * c.diff[0].dense()).cwiseAbs().maxCoeff() == 0.0);
  CHECK((c.diff[2].dense() * c.diff[1].dense()).cwiseAbs().maxCoeff() == 0.0);
  // Same matrices from moment assembly.
  for (int l = 0; l < 3; ++l)
    CHECK((assemble_diff_by_moments(c.spaces[l], c.spaces[l + 1]).dense() - c.diff[l].dense()).cwiseAbs().maxCoeff() <
          1e-12);
}

TEST_CASE("kernel dimensions on the single cube") {
  const auto m = cube(1);
  const Complex c = build_complex(m, 0, Boundary::none);
  const ComplexReport r = complex_report(m, 0, Boundary::none);
  for (int l = 0; l < 3; ++l) {
    const Eigen::MatrixXd d = restrict_free(c.diff[l], c.spaces[l + 1], c.spaces[l]);
    CHECK(r.ranks[l] == rank_of(d));
    CHECK(r.kernel_dims[l] == r.dims[l] - rank_of(d));
  }
  CHECK(r.kernel_dims[0] == 1);
  CHECK(r.kernel_dims[1] == 7);
  CHECK(r.kernel_dims[2] == 12);
  CHECK(r.ranks[2] == 6);
  CHECK(r.cohomology == std::array<int, 4>{1, 0, 0, 0});
}

TEST_CASE("cohomology matches simplicial homology") {
  for (int p = 0; p <= 1; ++p) {
    const ComplexReport none = complex_report(cube(2), p, Boundary::none);
    CHECK(none.cohomology == std::array<int, 4>{1, 0, 0, 0});
    const ComplexReport hom = complex_report(cube(2), p, Boundary::homogeneous);
    CHECK(hom.cohomology == std::array<int, 4>{0, 0, 0, 0});
    CHECK(none.composition_residual < 1e-12);
    CHECK(hom.composition_residual < 1e-12);
  }
  // A cube with a cavity: b2 = 1.
  const Mesh c3 = generate::cube_freudenthal(3);
  std::vector<TetVertices> keep;
  for (int t = 0; t < c3.num_tets(); ++t) {
    Vec3 g = Vec3::Zero();
    for (int i = 0; i < 4; ++i) g += 0.25 * 3.0 * c3.vertices()[c3.jcv(t, i)];
    if (!((g.array() > 1.0).all() && (g.array() < 2.0).all())) keep.push_back(c3.tets()[t]);
  }
  const auto hollow = std::make_shared<const Mesh>(Mesh::build(c3.vertices(), keep));
  const ComplexReport r = complex_report(hollow, 0, Boundary::none);
  CHECK(r.betti == std::array<int, 4>{1, 0, 1, 0});
  CHECK(r.cohomology == std::array<int, 4>{1, 0, 1, 0});
}

TEST_CASE("interpolation commutes with the gradient") {
  const auto m = std::make_shared<const Mesh>(generate::stretched_cube(1, 2.0));
  for (int p = 0; p <= 2; ++p) {
    CartPoly f;
    for (const auto& a : monomials_upto(p + 1)) f.add(a[0], a[1], a[2], 0.3 + a[0] - 0.7 * a[1] + 0.2 * a[2] * a[2]);
    const CartVec g = cart_gradient(f);
    const SpaceHandle v0 = SpaceHandle::build(m, 0, p, Boundary::none);
    const SpaceHandle v1 = SpaceHandle::build(m, 1, p, Boundary::none);
    const Eigen::VectorXd u0 = interpolate(v0, [&](int t) { return BaryVec{f.to_bary(m->tet_points(t)), {}, {}}; });
    const Eigen::VectorXd u1 = interpolate(v1, [&](int t) { return to_bary(g, m->tet_points(t)); });
    CHECK((assemble_diff(v0, v1).matrix * u0 - u1).cwiseAbs().maxCoeff() < 1e-11);
  }
}

TEST_CASE("mass matrices") {
  const auto m = cube(2);
  const Operator m3 = assemble_mass(SpaceHandle::build(m, 3, 0, Boundary::none));
  const Eigen::MatrixXd d3 = m3.dense();
  for (int t = 0; t < m->num_tets(); ++t) CHECK(d3(t, t) == doctest::Approx(1.0 / m->volume(t)));
  CHECK((d3 - Eigen::MatrixXd(d3.diagonal().asDiagonal())).cwiseAbs().maxCoeff() == 0.0);

  // The constant 1 has squared norm equal to the volume.
  const SpaceHandle v0 = SpaceHandle::build(m, 0, 1, Boundary::none);
  const Eigen::VectorXd one = interpolate(v0, [](int) { return BaryVec{BaryPoly::constant(1.0), {}, {}}; });
  CHECK(one.dot(assemble_mass(v0).matrix * one) == doctest::Approx(1.0).epsilon(1e-12));

  for (int l = 0; l <= 3; ++l) {
    const Eigen::MatrixXd a = assemble_mass(SpaceHandle::build(m, l, 1, Boundary::none)).dense();
    CHECK((a - a.transpose()).cwiseAbs().maxCoeff() < 1e-13);
    CHECK(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(a).eigenvalues().minCoeff() > 0.0);
  }
}

TEST_CASE("kernel projector") {
  const auto m = cube(1);
  const Complex c = build_complex(m, 0, Boundary::none);
  const Eigen::MatrixXd mass = restrict_free(assemble_mass(c.spaces[1]), c.spaces[1], c.spaces[1]);
  const Eigen::MatrixXd d = restrict_free(c.diff[1], c.spaces[2], c.spaces[1]);
  const Eigen::MatrixXd p = kernel_orthogonal_projector(mass, d);
  CHECK((p * p - p).cwiseAbs().maxCoeff() < 1e-10);
  // Kernel fields are removed, so D is unchanged by P.
  CHECK((d * p - d).cwiseAbs().maxCoeff() < 1e-10);
  const Eigen::MatrixXd g = restrict_free(c.diff[0], c.spaces[1], c.spaces[0]);
  CHECK((p * g).cwiseAbs().maxCoeff() < 1e-10);
  // M-self-adjoint.
  CHECK((mass * p - (mass * p).transpose()).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(rank_of(p) == 19 - 7);
}

TEST_CASE("MatrixMarket output") {
  const Operator op = assemble_diff(SpaceHandle::build(cube(1), 0, 0, Boundary::none),
                                    SpaceHandle::build(cube(1), 1, 0, Boundary::none));
  std::ostringstream out;
  write_matrix_market(out, op);
  std::istringstream in(out.str());
  std::string banner;
  std::getline(in, banner);
  CHECK(banner.rfind("%%MatrixMarket matrix coordinate real general", 0) == 0);
  std::string line;
  while (std::getline(in, line) && line[0] == '%') {
  }
  std::istringstream dims(line);
  int r = 0, c = 0, nnz = 0;
  dims >> r >> c >> nnz;
  CHECK(r == 19);
  CHECK(c == 8);
  CHECK(nnz == 38);
}
