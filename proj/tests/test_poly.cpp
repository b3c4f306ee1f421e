#include "doctest.h"

#include <cmath>

#include "derham/poly.hpp"

using namespace derham;

namespace {

double factorial(int n) { return n <= 1 ? 1.0 : n * factorial(n - 1); }

// Vertices of the unit reference tet.
const std::array<Vec3, 4> kRef{Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1)};
constexpr std::array<int, 4> kAll{0, 1, 2, 3};

}  // namespace

TEST_CASE("cartesian monomials integrate to a!b!c!/(a+b+c+3)! on the reference tet") {
  for (int a = 0; a <= 3; ++a)
    for (int b = 0; b <= 3 - a; ++b)
      for (int c = 0; c <= 3 - a - b; ++c) {
        const BaryPoly p = CartPoly::monomial(a, b, c).to_bary(kRef);
        const double exact = factorial(a) * factorial(b) * factorial(c) / factorial(a + b + c + 3);
        CHECK(p.integrate(kAll, 1.0 / 6.0) == doctest::Approx(exact).epsilon(1e-13));
      }
}

TEST_CASE("edge and face integrals of barycentric monomials") {
  // int_edge l0^2 l1 over an edge of length L is L * 2! 1! / 4!.
  const BaryPoly p = BaryPoly::monomial({2, 1, 0, 0});
  const std::array<int, 2> edge{0, 1};
  CHECK(p.integrate(edge, 3.0) == doctest::Approx(3.0 * 2.0 / 24.0));
  // The same monomial vanishes on the face opposite vertex 0.
  const std::array<int, 3> face{1, 2, 3};
  CHECK(p.integrate(face, 1.0) == doctest::Approx(0.0));
  const std::array<int, 1> vertex{0};
  CHECK(BaryPoly::coordinate(0).integrate(vertex, 0.0) == doctest::Approx(1.0));
}

TEST_CASE("elevation keeps point values") {
  const BaryPoly p = BaryPoly::monomial({1, 0, 2, 0}, 2.5) + BaryPoly::monomial({0, 1, 1, 1}, -1.0);
  const BaryPoly q = p.elevated(5);
  const Bary pt{0.1, 0.2, 0.3, 0.4};
  CHECK(q.degree() == 5);
  CHECK(q(pt) == doctest::Approx(p(pt)).epsilon(1e-14));
}

TEST_CASE("gradient, curl and divergence agree with cartesian differentiation") {
  const std::array<Vec3, 4> tet{Vec3(0.1, 0.0, 0.2), Vec3(1.3, 0.1, 0.0), Vec3(0.2, 0.9, 0.1), Vec3(0.3, 0.2, 1.1)};
  Eigen::Matrix4d t;
  for (int i = 0; i < 4; ++i) t.col(i) << 1.0, tet[i];
  const Eigen::Matrix4d inv = t.inverse();
  BaryGradients g;
  for (int i = 0; i < 4; ++i) g.row(i) = inv.block<1, 3>(i, 1);

  CartPoly f;
  f.add(2, 1, 0, 1.5).add(0, 0, 3, -0.5).add(1, 0, 0, 2.0);
  CartVec v{CartPoly::monomial(0, 2, 1), CartPoly::monomial(1, 1, 0, -2.0), CartPoly::monomial(1, 0, 1, 3.0)};

  const Bary pt{0.15, 0.25, 0.35, 0.25};
  Vec3 x = Vec3::Zero();
  for (int i = 0; i < 4; ++i) x += pt[i] * tet[i];

  const Vec3 grad = evaluate(gradient(f.to_bary(tet), g), pt);
  const CartVec gf = cart_gradient(f);
  for (int c = 0; c < 3; ++c) CHECK(grad[c] == doctest::Approx(gf[c](x)).epsilon(1e-12));

  const Vec3 rot = evaluate(curl(to_bary(v, tet), g), pt);
  const CartVec cv = cart_curl(v);
  for (int c = 0; c < 3; ++c) CHECK(rot[c] == doctest::Approx(cv[c](x)).epsilon(1e-12));

  CHECK(divergence(to_bary(v, tet), g)(pt) == doctest::Approx(cart_divergence(v)(x)).epsilon(1e-12));
}

TEST_CASE("substitution restricts to a sub-tetrahedron") {
  // Child tet with vertices given in parent barycentric coordinates (rows of a are children's vertices).
  Eigen::Matrix4d a;
  a << 1, 0, 0, 0, 0.5, 0.5, 0, 0, 0.5, 0, 0.5, 0, 0.5, 0, 0, 0.5;
  const BaryPoly p = BaryPoly::monomial({0, 2, 1, 0}) + BaryPoly::monomial({1, 1, 0, 1}, 0.7);
  const BaryPoly q = p.substitute(a.transpose());
  const Bary m{0.1, 0.2, 0.3, 0.4};
  Bary parent{};
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) parent[i] += a(j, i) * m[j];
  CHECK(q(m) == doctest::Approx(p(parent)).epsilon(1e-13));
}

TEST_CASE("multi-index tables") {
  CHECK(num_monomials(0) == 1);
  CHECK(num_monomials(2) == 10);
  const auto& idx = multi_indices(3);
  CHECK(static_cast<int>(idx.size()) == 20);
  for (int i = 0; i < static_cast<int>(idx.size()); ++i) CHECK(multi_index_position(idx[i]) == i);
  CHECK(idx.front() == MultiIndex{3, 0, 0, 0});
  CHECK(idx.back() == MultiIndex{0, 0, 0, 3});
}
