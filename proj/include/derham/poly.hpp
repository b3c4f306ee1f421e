#pragma once

// Polynomials on a tetrahedron written in its barycentric coordinates.
//
// A BaryPoly of degree k is a homogeneous polynomial of degree k in the four
// barycentric coordinates (l0, l1, l2, l3). Since l0 + l1 + l2 + l3 = 1 on the
// element, homogeneous degree-k polynomials span the full space P_k, and
// products, derivatives and integrals over any sub-simplex have closed forms.
// Barycentric coordinates are invariant under affine maps that keep the vertex
// order, which makes pull-backs to a reference element free.

#include <array>
#include <map>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace derham {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using MultiIndex = std::array<int, 4>;
using Bary = std::array<double, 4>;

inline constexpr int kMaxPolyDegree = 12;

/// Number of homogeneous monomials of degree k in four variables.
constexpr int num_monomials(int k) { return k < 0 ? 0 : (k + 1) * (k + 2) * (k + 3) / 6; }

/// Multi-indices of total degree k, in descending lexicographic order.
const std::vector<MultiIndex>& multi_indices(int k);

/// Position of a multi-index inside multi_indices(|a|).
int multi_index_position(const MultiIndex& a);

class BaryPoly {
 public:
  BaryPoly() : BaryPoly(0) {}
  explicit BaryPoly(int degree);

  static BaryPoly constant(double c);
  /// The barycentric coordinate l_i.
  static BaryPoly coordinate(int i);
  static BaryPoly monomial(const MultiIndex& a, double c = 1.0);
  /// Affine function taking value values[i] at vertex i.
  static BaryPoly affine(const Bary& values);

  int degree() const { return degree_; }
  int size() const { return static_cast<int>(coeffs_.size()); }
  std::span<const double> coefficients() const { return coeffs_; }
  std::span<double> coefficients() { return coeffs_; }
  double operator[](int i) const { return coeffs_[i]; }
  double& operator[](int i) { return coeffs_[i]; }

  double operator()(const Bary& lambda) const;

  /// Same polynomial rewritten with degree k >= degree() (multiplies by (sum l)^(k-degree)).
  BaryPoly elevated(int k) const;

  BaryPoly& operator+=(const BaryPoly& other);
  BaryPoly& operator-=(const BaryPoly& other);
  BaryPoly& operator*=(double s);
  BaryPoly operator-() const;

  /// Formal partial derivative with respect to l_i.
  BaryPoly derivative(int i) const;

  /// Integral over the sub-simplex spanned by the given local vertices, whose
  /// (length/area/volume) measure is `measure`. A single vertex gives the value there.
  double integrate(std::span<const int> vertices, double measure) const;

  /// Substitutes l_i = sum_j a(i, j) m_j, returning a polynomial in m.
  BaryPoly substitute(const Eigen::Matrix4d& a) const;

  double max_abs() const;

 private:
  int degree_ = 0;
  std::vector<double> coeffs_;
};

BaryPoly operator+(BaryPoly a, const BaryPoly& b);
BaryPoly operator-(BaryPoly a, const BaryPoly& b);
BaryPoly operator*(BaryPoly a, double s);
BaryPoly operator*(double s, BaryPoly a);
BaryPoly operator*(const BaryPoly& a, const BaryPoly& b);

using BaryVec = std::array<BaryPoly, 3>;

/// Gradients of the four barycentric coordinates of a tetrahedron (rows).
using BaryGradients = Eigen::Matrix<double, 4, 3>;

BaryVec make_vec(const BaryPoly& x, const BaryPoly& y, const BaryPoly& z);
BaryVec scaled(const BaryPoly& p, const Vec3& direction);
BaryVec add(const BaryVec& a, const BaryVec& b);
BaryVec scale(const BaryVec& a, double s);
BaryVec apply(const Mat3& m, const BaryVec& v);
BaryPoly dot(const BaryVec& a, const Vec3& b);
BaryPoly dot(const BaryVec& a, const BaryVec& b);
BaryVec cross(const BaryVec& a, const BaryVec& b);
BaryVec multiply(const BaryPoly& s, const BaryVec& v);
Vec3 evaluate(const BaryVec& v, const Bary& lambda);
int degree(const BaryVec& v);

BaryPoly partial(const BaryPoly& p, int axis, const BaryGradients& grads);
BaryVec gradient(const BaryPoly& p, const BaryGradients& grads);
BaryVec curl(const BaryVec& v, const BaryGradients& grads);
BaryPoly divergence(const BaryVec& v, const BaryGradients& grads);

/// Polynomial in Cartesian coordinates, x^a y^b z^c -> coefficient.
class CartPoly {
 public:
  CartPoly() = default;
  static CartPoly constant(double c);
  static CartPoly monomial(int a, int b, int c, double coeff = 1.0);

  double operator()(const Vec3& x) const;
  CartPoly partial(int axis) const;
  int degree() const;
  /// Restriction to the tetrahedron with the given vertices, in its barycentric coordinates.
  BaryPoly to_bary(const std::array<Vec3, 4>& vertices) const;

  CartPoly& add(int a, int b, int c, double coeff);
  CartPoly& operator+=(const CartPoly& o);
  CartPoly& operator*=(double s);
  friend CartPoly operator*(const CartPoly& p, const CartPoly& q);

  const std::map<std::array<int, 3>, double>& terms() const { return terms_; }

 private:
  std::map<std::array<int, 3>, double> terms_;
};

using CartVec = std::array<CartPoly, 3>;

BaryVec to_bary(const CartVec& v, const std::array<Vec3, 4>& vertices);
CartVec cart_gradient(const CartPoly& p);
CartVec cart_curl(const CartVec& v);
CartPoly cart_divergence(const CartVec& v);

}  // namespace derham
