#include "derham/poly.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace derham {

namespace {

struct MultiIndexTables {
  std::vector<std::vector<MultiIndex>> lists;
  // position[k][(a1 * (k + 1) + a2) * (k + 1) + a3]
  std::vector<std::vector<int>> position;

  MultiIndexTables() {
    lists.resize(kMaxPolyDegree + 1);
    position.resize(kMaxPolyDegree + 1);
    for (int k = 0; k <= kMaxPolyDegree; ++k) {
      auto& list = lists[k];
      auto& pos = position[k];
      pos.assign((k + 1) * (k + 1) * (k + 1), -1);
      for (int a0 = k; a0 >= 0; --a0)
        for (int a1 = k - a0; a1 >= 0; --a1)
          for (int a2 = k - a0 - a1; a2 >= 0; --a2) {
            const int a3 = k - a0 - a1 - a2;
            pos[(a1 * (k + 1) + a2) * (k + 1) + a3] = static_cast<int>(list.size());
            list.push_back({a0, a1, a2, a3});
          }
    }
  }
};

const MultiIndexTables& tables() {
  static const MultiIndexTables t;
  return t;
}

double factorial(int n) {
  double f = 1.0;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

void check_degree(int k) {
  if (k < 0 || k > kMaxPolyDegree)
    throw std::out_of_range("polynomial degree out of supported range");
}

}  // namespace

const std::vector<MultiIndex>& multi_indices(int k) {
  check_degree(k);
  return tables().lists[k];
}

int multi_index_position(const MultiIndex& a) {
  const int k = a[0] + a[1] + a[2] + a[3];
  check_degree(k);
  return tables().position[k][(a[1] * (k + 1) + a[2]) * (k + 1) + a[3]];
}

BaryPoly::BaryPoly(int degree) : degree_(degree) {
  check_degree(degree);
  coeffs_.assign(num_monomials(degree), 0.0);
}

BaryPoly BaryPoly::constant(double c) {
  BaryPoly p(0);
  p.coeffs_[0] = c;
  return p;
}

BaryPoly BaryPoly::coordinate(int i) {
  MultiIndex a{0, 0, 0, 0};
  a[i] = 1;
  return monomial(a);
}

BaryPoly BaryPoly::monomial(const MultiIndex& a, double c) {
  BaryPoly p(a[0] + a[1] + a[2] + a[3]);
  p.coeffs_[multi_index_position(a)] = c;
  return p;
}

BaryPoly BaryPoly::affine(const Bary& values) {
  BaryPoly p(1);
  for (int i = 0; i < 4; ++i) p.coeffs_[multi_index_position(MultiIndex{i == 0, i == 1, i == 2, i == 3})] = values[i];
  return p;
}

double BaryPoly::operator()(const Bary& lambda) const {
  std::array<std::array<double, kMaxPolyDegree + 1>, 4> powers{};
  for (int i = 0; i < 4; ++i) {
    powers[i][0] = 1.0;
    for (int e = 1; e <= degree_; ++e) powers[i][e] = powers[i][e - 1] * lambda[i];
  }
  const auto& list = multi_indices(degree_);
  double sum = 0.0;
  for (std::size_t m = 0; m < list.size(); ++m) {
    if (coeffs_[m] == 0.0) continue;
    const auto& a = list[m];
    sum += coeffs_[m] * powers[0][a[0]] * powers[1][a[1]] * powers[2][a[2]] * powers[3][a[3]];
  }
  return sum;
}

BaryPoly BaryPoly::elevated(int k) const {
  if (k < degree_) throw std::invalid_argument("cannot lower polynomial degree by elevation");
  BaryPoly result = *this;
  const BaryPoly one = affine({1.0, 1.0, 1.0, 1.0});
  while (result.degree_ < k) result = result * one;
  return result;
}

BaryPoly& BaryPoly::operator+=(const BaryPoly& other) {
  if (other.degree_ > degree_) *this = elevated(other.degree_);
  if (other.degree_ < degree_) return *this += other.elevated(degree_);
  for (std::size_t i = 0; i < coeffs_.size(); ++i) coeffs_[i] += other.coeffs_[i];
  return *this;
}

BaryPoly& BaryPoly::operator-=(const BaryPoly& other) { return *this += -other; }

BaryPoly& BaryPoly::operator*=(double s) {
  for (double& c : coeffs_) c *= s;
  return *this;
}

BaryPoly BaryPoly::operator-() const {
  BaryPoly r = *this;
  r *= -1.0;
  return r;
}

BaryPoly BaryPoly::derivative(int i) const {
  if (degree_ == 0) return BaryPoly(0);
  BaryPoly r(degree_ - 1);
  const auto& list = multi_indices(degree_);
  for (std::size_t m = 0; m < list.size(); ++m) {
    if (coeffs_[m] == 0.0 || list[m][i] == 0) continue;
    MultiIndex a = list[m];
    const double e = a[i];
    a[i] -= 1;
    r.coeffs_[multi_index_position(a)] += e * coeffs_[m];
  }
  return r;
}

double BaryPoly::integrate(std::span<const int> vertices, double measure) const {
  const int d = static_cast<int>(vertices.size()) - 1;
  if (d < 0 || d > 3) throw std::invalid_argument("sub-simplex must have 1 to 4 vertices");
  if (d == 0) {
    MultiIndex a{0, 0, 0, 0};
    a[vertices[0]] = degree_;
    return coeffs_[multi_index_position(a)];
  }
  bool inside[4] = {false, false, false, false};
  for (int v : vertices) inside[v] = true;
  const auto& list = multi_indices(degree_);
  const double scale = measure * factorial(d) / factorial(degree_ + d);
  double sum = 0.0;
  for (std::size_t m = 0; m < list.size(); ++m) {
    if (coeffs_[m] == 0.0) continue;
    const auto& a = list[m];
    double w = 1.0;
    bool supported = true;
    for (int i = 0; i < 4; ++i) {
      if (a[i] == 0) continue;
      if (!inside[i]) {
        supported = false;
        break;
      }
      w *= factorial(a[i]);
    }
    if (supported) sum += coeffs_[m] * w;
  }
  return sum * scale;
}

BaryPoly BaryPoly::substitute(const Eigen::Matrix4d& a) const {
  std::array<std::vector<BaryPoly>, 4> powers;
  for (int i = 0; i < 4; ++i) {
    const BaryPoly li = affine({a(i, 0), a(i, 1), a(i, 2), a(i, 3)});
    powers[i].push_back(constant(1.0));
    for (int e = 1; e <= degree_; ++e) powers[i].push_back(powers[i].back() * li);
  }
  BaryPoly result(degree_);
  const auto& list = multi_indices(degree_);
  for (std::size_t m = 0; m < list.size(); ++m) {
    if (coeffs_[m] == 0.0) continue;
    const auto& e = list[m];
    BaryPoly term = powers[0][e[0]] * powers[1][e[1]] * powers[2][e[2]] * powers[3][e[3]];
    term *= coeffs_[m];
    result += term;
  }
  return result;
}

double BaryPoly::max_abs() const {
  double m = 0.0;
  for (double c : coeffs_) m = std::max(m, std::abs(c));
  return m;
}

BaryPoly operator+(BaryPoly a, const BaryPoly& b) { return a += b; }
BaryPoly operator-(BaryPoly a, const BaryPoly& b) { return a -= b; }
BaryPoly operator*(BaryPoly a, double s) { return a *= s; }
BaryPoly operator*(double s, BaryPoly a) { return a *= s; }

BaryPoly operator*(const BaryPoly& a, const BaryPoly& b) {
  BaryPoly r(a.degree() + b.degree());
  const auto& la = multi_indices(a.degree());
  const auto& lb = multi_indices(b.degree());
  for (std::size_t i = 0; i < la.size(); ++i) {
    if (a[i] == 0.0) continue;
    for (std::size_t j = 0; j < lb.size(); ++j) {
      if (b[j] == 0.0) continue;
      const MultiIndex s{la[i][0] + lb[j][0], la[i][1] + lb[j][1], la[i][2] + lb[j][2], la[i][3] + lb[j][3]};
      r[multi_index_position(s)] += a[i] * b[j];
    }
  }
  return r;
}

BaryVec make_vec(const BaryPoly& x, const BaryPoly& y, const BaryPoly& z) { return {x, y, z}; }

BaryVec scaled(const BaryPoly& p, const Vec3& direction) {
  return {p * direction[0], p * direction[1], p * direction[2]};
}

BaryVec add(const BaryVec& a, const BaryVec& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }

BaryVec scale(const BaryVec& a, double s) { return {a[0] * s, a[1] * s, a[2] * s}; }

BaryVec apply(const Mat3& m, const BaryVec& v) {
  BaryVec r;
  for (int i = 0; i < 3; ++i) r[i] = v[0] * m(i, 0) + v[1] * m(i, 1) + v[2] * m(i, 2);
  return r;
}

BaryPoly dot(const BaryVec& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }

BaryPoly dot(const BaryVec& a, const BaryVec& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }

BaryVec cross(const BaryVec& a, const BaryVec& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

BaryVec multiply(const BaryPoly& s, const BaryVec& v) { return {s * v[0], s * v[1], s * v[2]}; }

Vec3 evaluate(const BaryVec& v, const Bary& lambda) { return {v[0](lambda), v[1](lambda), v[2](lambda)}; }

int degree(const BaryVec& v) { return std::max({v[0].degree(), v[1].degree(), v[2].degree()}); }

BaryPoly partial(const BaryPoly& p, int axis, const BaryGradients& grads) {
  if (p.degree() == 0) return BaryPoly(0);
  BaryPoly r(p.degree() - 1);
  for (int i = 0; i < 4; ++i) r += p.derivative(i) * grads(i, axis);
  return r;
}

BaryVec gradient(const BaryPoly& p, const BaryGradients& grads) {
  return {partial(p, 0, grads), partial(p, 1, grads), partial(p, 2, grads)};
}

BaryVec curl(const BaryVec& v, const BaryGradients& g) {
  return {partial(v[2], 1, g) - partial(v[1], 2, g), partial(v[0], 2, g) - partial(v[2], 0, g),
          partial(v[1], 0, g) - partial(v[0], 1, g)};
}

BaryPoly divergence(const BaryVec& v, const BaryGradients& g) {
  return partial(v[0], 0, g) + partial(v[1], 1, g) + partial(v[2], 2, g);
}

CartPoly CartPoly::constant(double c) { return monomial(0, 0, 0, c); }

CartPoly CartPoly::monomial(int a, int b, int c, double coeff) {
  CartPoly p;
  p.add(a, b, c, coeff);
  return p;
}

CartPoly& CartPoly::add(int a, int b, int c, double coeff) {
  terms_[{a, b, c}] += coeff;
  return *this;
}

CartPoly& CartPoly::operator+=(const CartPoly& o) {
  for (const auto& [e, c] : o.terms_) terms_[e] += c;
  return *this;
}

CartPoly& CartPoly::operator*=(double s) {
  for (auto& [e, c] : terms_) c *= s;
  return *this;
}

CartPoly operator*(const CartPoly& p, const CartPoly& q) {
  CartPoly r;
  for (const auto& [e, c] : p.terms_)
    for (const auto& [f, d] : q.terms_) r.add(e[0] + f[0], e[1] + f[1], e[2] + f[2], c * d);
  return r;
}

double CartPoly::operator()(const Vec3& x) const {
  double s = 0.0;
  for (const auto& [e, c] : terms_) s += c * std::pow(x[0], e[0]) * std::pow(x[1], e[1]) * std::pow(x[2], e[2]);
  return s;
}

CartPoly CartPoly::partial(int axis) const {
  CartPoly r;
  for (const auto& [e, c] : terms_) {
    if (e[axis] == 0) continue;
    auto f = e;
    f[axis] -= 1;
    r.add(f[0], f[1], f[2], c * e[axis]);
  }
  return r;
}

int CartPoly::degree() const {
  int d = 0;
  for (const auto& [e, c] : terms_)
    if (c != 0.0) d = std::max(d, e[0] + e[1] + e[2]);
  return d;
}

BaryPoly CartPoly::to_bary(const std::array<Vec3, 4>& vertices) const {
  std::array<std::vector<BaryPoly>, 3> powers;
  const int k = degree();
  for (int axis = 0; axis < 3; ++axis) {
    const BaryPoly x =
        BaryPoly::affine({vertices[0][axis], vertices[1][axis], vertices[2][axis], vertices[3][axis]});
    powers[axis].push_back(BaryPoly::constant(1.0));
    for (int e = 1; e <= k; ++e) powers[axis].push_back(powers[axis].back() * x);
  }
  BaryPoly r(k);
  for (const auto& [e, c] : terms_) {
    if (c == 0.0) continue;
    r += powers[0][e[0]] * powers[1][e[1]] * powers[2][e[2]] * c;
  }
  return r;
}

BaryVec to_bary(const CartVec& v, const std::array<Vec3, 4>& vertices) {
  return {v[0].to_bary(vertices), v[1].to_bary(vertices), v[2].to_bary(vertices)};
}

CartVec cart_gradient(const CartPoly& p) { return {p.partial(0), p.partial(1), p.partial(2)}; }

CartVec cart_curl(const CartVec& v) {
  CartVec r;
  r[0] = v[2].partial(1);
  r[0] += v[1].partial(2) *= -1.0;
  r[1] = v[0].partial(2);
  r[1] += v[2].partial(0) *= -1.0;
  r[2] = v[1].partial(0);
  r[2] += v[0].partial(1) *= -1.0;
  return r;
}

CartPoly cart_divergence(const CartVec& v) {
  CartPoly r = v[0].partial(0);
  r += v[1].partial(1);
  r += v[2].partial(2);
  return r;
}

}  // namespace derham
