#include "doctest.h"

#include <sstream>

#include "derham/derham.hpp"
#include "derham/equilibration.hpp"
#include "derham/poincare.hpp"

using namespace derham;

namespace {

std::shared_ptr<const Mesh> share(Mesh m) { return std::make_shared<const Mesh>(std::move(m)); }

constexpr std::array<int, 4> kAll{0, 1, 2, 3};

BrokenField random_conforming(const std::shared_ptr<const Mesh>& m, int degree, std::uint64_t seed) {
  const SpaceHandle s = SpaceHandle::build(m, 2, degree, Boundary::none);
  SplitMix64 rng(seed);
  return broken_from_space(s, rng.vector(s.global_dim()));
}

int find_vertex(const Mesh& m, const Vec3& x) {
  for (int v = 0; v < m.num_vertices(); ++v)
    if ((m.vertices()[v] - x).norm() < 1e-12) return v;
  return -1;
}

// Hat function of global vertex a restricted to tet t.
BaryPoly hat(const Mesh& m, int t, int a) {
  for (int i = 0; i < 4; ++i)
    if (m.jcv(t, i) == a) return BaryPoly::coordinate(i);
  return BaryPoly::constant(0.0).elevated(1);
}

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

TEST_CASE("broken field text format round trip") {
  const auto m = share(generate::cube_freudenthal(1));
  const BrokenField u = random_conforming(m, 1, 4);
  std::stringstream ss;
  write_broken_field(ss, u);
  std::string header;
  std::getline(std::istringstream(ss.str()) >> std::ws, header);
  CHECK(header == "level=2 degree=2 ntets=6");
  const BrokenField r = read_broken_field(ss);
  REQUIRE(r.cells.size() == u.cells.size());
  CHECK(r.degree == u.degree);
  for (std::size_t t = 0; t < u.cells.size(); ++t)
    for (int c = 0; c < 3; ++c)
      for (int i = 0; i < u.cells[t][c].size(); ++i) CHECK(r.cells[t][c][i] == u.cells[t][c][i]);
}

TEST_CASE("broken field parse errors") {
  std::istringstream bad_header("level=2 degree=x ntets=1\n");
  CHECK(code_of([&] { read_broken_field(bad_header); }) == ErrorCode::parse);
  std::istringstream short_row("level=2 degree=0 ntets=1\n1\n2 3\n");
  try {
    read_broken_field(short_row);
    FAIL("expected parse error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::parse);
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
}

TEST_CASE("elementwise L2 projection") {
  const auto m = share(generate::reference_tet());
  BrokenField u;
  u.level = 3;
  u.degree = 1;
  u.cells = {BaryVec{BaryPoly::coordinate(0), {}, {}}};
  const BrokenField mean = l2_project_broken(*m, u, 0);
  CHECK(mean.cells[0][0](Bary{0.1, 0.2, 0.3, 0.4}) == doctest::Approx(0.25));

  // Orthogonality against every degree-1 monomial for random cubic data.
  const auto c = share(generate::stretched_cube(1, 2.0));
  BrokenField v;
  v.level = 2;
  v.degree = 3;
  SplitMix64 rng(2);
  for (int t = 0; t < c->num_tets(); ++t) {
    BaryVec f{BaryPoly(3), BaryPoly(3), BaryPoly(3)};
    for (auto& comp : f)
      for (int i = 0; i < comp.size(); ++i) comp[i] = rng.uniform();
    v.cells.push_back(f);
  }
  const BrokenField pv = l2_project_broken(*c, v, 1);
  double worst = 0.0;
  for (int t = 0; t < c->num_tets(); ++t)
    for (int comp = 0; comp < 3; ++comp)
      for (const auto& a : multi_indices(1)) {
        const BaryPoly r = (v.cells[t][comp] - pv.cells[t][comp].elevated(3)) * BaryPoly::monomial(a);
        worst = std::max(worst, std::abs(r.integrate(kAll, c->volume(t))));
      }
  CHECK(worst < 1e-11);
  CHECK(code_of([&] { l2_project_broken(*c, v, 40); }) == ErrorCode::invalid_argument);
}

TEST_CASE("elementwise constrained minimizer") {
  const auto m = share(generate::cube_freudenthal(1));
  for (int p = 0; p <= 1; ++p) {
    const SpaceHandle rt = SpaceHandle::build(m, 2, p, Boundary::none);
    // Already in RT_p: unchanged.
    const BrokenField w = random_conforming(m, p, 8);
    const BrokenField xw = elementwise_constrained(rt, w);
    for (int t = 0; t < m->num_tets(); ++t)
      for (int c = 0; c < 3; ++c)
        CHECK((xw.cells[t][c].elevated(w.degree) - w.cells[t][c]).max_abs() < 1e-10);

    // Degree p+1: divergence moments of order p and constant moments match.
    const BrokenField u = random_conforming(m, p + 1, 9);
    const BrokenField xi = elementwise_constrained(rt, u);
    double div_err = 0.0, mean_err = 0.0;
    for (int t = 0; t < m->num_tets(); ++t) {
      const TetGeometry g = TetGeometry::of(*m, t);
      const BaryPoly dd = divergence(u.cells[t], g.grads) - divergence(xi.cells[t], g.grads).elevated(p);
      for (const auto& a : multi_indices(p))
        div_err = std::max(div_err, std::abs((dd * BaryPoly::monomial(a)).integrate(kAll, g.volume)));
      for (int c = 0; c < 3; ++c) {
        const BaryPoly diff = u.cells[t][c] - xi.cells[t][c].elevated(u.degree);
        mean_err = std::max(mean_err, std::abs(diff.integrate(kAll, g.volume)));
      }
    }
    CHECK(div_err < 1e-10);
    CHECK(mean_err < 1e-10);
  }
}

TEST_CASE("star problems reproduce RT interpolants of hat-weighted RT fields") {
  const auto m = share(generate::cube_freudenthal(2));
  const int center = find_vertex(*m, Vec3(0.5, 0.5, 0.5));
  const int corner = find_vertex(*m, Vec3(0, 0, 0));
  for (int p = 0; p <= 1; ++p) {
    const SpaceHandle rt = SpaceHandle::build(m, 2, p, Boundary::none);
    const BrokenField u = random_conforming(m, p, 3);
    const BrokenField xi = elementwise_constrained(rt, u);
    for (int a : {center, corner}) {
      const StarResult s = star_equilibrate(rt, u, xi, a);
      const Eigen::VectorXd target = interpolate(rt, [&](int t) { return multiply(hat(*m, t, a), u.cells[t]); });
      CHECK((s.coeffs - target).cwiseAbs().maxCoeff() < 1e-9 * (1.0 + target.cwiseAbs().maxCoeff()));
      CHECK(s.interior == (a == center));
    }
  }
  // Boundary stars are always solvable.
  const SpaceHandle rt = SpaceHandle::build(m, 2, 0, Boundary::none);
  const BrokenField u = random_conforming(m, 1, 17);
  const StarResult s = star_equilibrate(rt, u, elementwise_constrained(rt, u), corner);
  CHECK(s.divergence_residual < 1e-9);
}

TEST_CASE("non-conforming data is detected at interior stars") {
  const auto m = share(generate::cube_freudenthal(2));
  const int center = find_vertex(*m, Vec3(0.5, 0.5, 0.5));
  const SpaceHandle rt = SpaceHandle::build(m, 2, 0, Boundary::none);
  BrokenField u = random_conforming(m, 1, 21);
  const int t = m->vertex_tets(center)[0];
  // Shift the field along the hat gradient in one tet of the star.
  const Vec3 dir = evaluate(gradient(hat(*m, t, center), TetGeometry::of(*m, t).grads), Bary{0.25, 0.25, 0.25, 0.25});
  for (int c = 0; c < 3; ++c) u.cells[t][c] += BaryPoly::constant(dir[c]).elevated(u.degree);
  CHECK(check_conformity(*m, u) > 1e-3);
  CHECK(!u.conformity_checked);
  const BrokenField xi = elementwise_constrained(rt, u);
  try {
    star_equilibrate(rt, u, xi, center);
    FAIL("expected a compatibility violation");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::compatibility_violation);
    CHECK(std::string(e.what()).find(std::to_string(center)) != std::string::npos);
  }
}

TEST_CASE("commuting projection") {
  const auto m = share(generate::cube_freudenthal(2));
  // Projection property.
  for (int p = 0; p <= 1; ++p) {
    const SpaceHandle rt = SpaceHandle::build(m, 2, p, Boundary::none);
    SplitMix64 rng(31);
    const Eigen::VectorXd c = rng.vector(rt.global_dim());
    const EquilibrationResult r = commuting_projection_hdiv(m, p, broken_from_space(rt, c));
    CHECK((r.coeffs - c).cwiseAbs().maxCoeff() < 1e-10 * c.cwiseAbs().maxCoeff());
    CHECK(r.partition_of_unity < 1e-13);
  }
  // u = grad(x^2 + y^2 + z^2): constant divergence 6 is reproduced exactly for p = 0.
  const CartVec g{CartPoly::monomial(1, 0, 0, 2.0), CartPoly::monomial(0, 1, 0, 2.0), CartPoly::monomial(0, 0, 1, 2.0)};
  BrokenField u;
  u.degree = 1;
  for (int t = 0; t < m->num_tets(); ++t) u.cells.push_back(to_bary(g, m->tet_points(t)));
  const EquilibrationResult r = commuting_projection_hdiv(m, 0, u);
  const SpaceHandle rt = SpaceHandle::build(m, 2, 0, Boundary::none);
  double err = 0.0;
  for (int t = 0; t < m->num_tets(); ++t)
    err = std::max(err, std::abs(divergence(rt.local_field(t, r.coeffs), rt.geometry(t).grads)[0] - 6.0));
  CHECK(err < 1e-10);
  CHECK(r.report.commuting_residual < 1e-9);
}

TEST_CASE("stability ratios do not grow with refinement") {
  std::array<double, 3> worst{};
  for (int n = 1; n <= 3; ++n) {
    const auto m = share(generate::cube_freudenthal(n));
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      const EquilibrationResult r = commuting_projection_hdiv(m, 0, random_conforming(m, 1, seed), false);
      CHECK(std::isfinite(r.report.stability_ratio));
      worst[n - 1] = std::max(worst[n - 1], r.report.stability_ratio);
    }
  }
  MESSAGE("stability ratios n=1,2,3: " << worst[0] << " " << worst[1] << " " << worst[2]);
  CHECK(worst[1] <= 1.5 * worst[0]);
  CHECK(worst[2] <= 1.5 * worst[0]);
}
