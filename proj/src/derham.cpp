#include "derham/derham.hpp"

#include <algorithm>
#include <cstdio>
#include <ostream>

#include "derham/solvers.hpp"

namespace derham {

namespace {

void check_pair(const SpaceHandle& from, const SpaceHandle& to) {
  if (from.mesh_ptr() != to.mesh_ptr() && content_hash(from.mesh()) != content_hash(to.mesh()))
    throw Error(ErrorCode::invalid_argument, "spaces live on different meshes");
  if (to.level() != from.level() + 1 || from.level() > 2)
    throw Error(ErrorCode::invalid_argument, "differential needs consecutive levels");
  if (from.degree() != to.degree()) throw Error(ErrorCode::invalid_argument, "spaces have different degrees");
  if (from.bc() != to.bc()) throw Error(ErrorCode::invalid_argument, "spaces have different boundary conditions");
}

/// Collapses duplicate (row, col) entries keeping the first: shared DOFs see the same value from every tet.
Eigen::SparseMatrix<double> from_set_triplets(int rows, int cols, std::vector<Eigen::Triplet<double>> t) {
  std::stable_sort(t.begin(), t.end(), [](const auto& a, const auto& b) {
    return a.row() != b.row() ? a.row() < b.row() : a.col() < b.col();
  });
  std::vector<Eigen::Triplet<double>> unique;
  unique.reserve(t.size());
  for (const auto& x : t)
    if (unique.empty() || unique.back().row() != x.row() || unique.back().col() != x.col()) unique.push_back(x);
  Eigen::SparseMatrix<double> m(rows, cols);
  m.setFromTriplets(unique.begin(), unique.end());
  m.prune(0.0);
  return m;
}

Operator incidence(const SpaceHandle& from, const SpaceHandle& to) {
  const Mesh& m = from.mesh();
  std::vector<Eigen::Triplet<double>> t;
  switch (from.level()) {
    case 0:
      for (int e = 0; e < m.num_edges(); ++e) {
        t.emplace_back(e, m.jev(e, 0), -1.0);
        t.emplace_back(e, m.jev(e, 1), 1.0);
      }
      break;
    case 1:
      for (int f = 0; f < m.num_faces(); ++f) {
        const int a = m.jfv(f, 0), b = m.jfv(f, 1), c = m.jfv(f, 2);
        t.emplace_back(f, m.find_edge(a, b), 1.0);
        t.emplace_back(f, m.find_edge(b, c), 1.0);
        t.emplace_back(f, m.find_edge(a, c), -1.0);
      }
      break;
    case 2:
      for (int c = 0; c < m.num_tets(); ++c) {
        const auto x = m.tet_points(c);
        for (int k = 0; k < 4; ++k) {
          const int f = m.tet_faces(c)[k];
          const Vec3 outward = x[kTetFaces[k][0]] - x[kFaceOpposite[k]];
          t.emplace_back(c, f, m.face_normal(f).dot(outward) > 0.0 ? 1.0 : -1.0);
        }
      }
      break;
  }
  Operator op;
  op.rows = to.global_dim();
  op.cols = from.global_dim();
  op.matrix.resize(op.rows, op.cols);
  op.matrix.setFromTriplets(t.begin(), t.end());
  op.tag = OperatorTag::diff;
  op.level = from.level();
  return op;
}

}  // namespace

Operator assemble_mass(const SpaceHandle& space) {
  static constexpr std::array<int, 4> all{0, 1, 2, 3};
  const int n = space.local_dim();
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(static_cast<std::size_t>(space.mesh().num_tets()) * n * n);
  for (int c = 0; c < space.mesh().num_tets(); ++c) {
    const auto& basis = space.basis(c);
    const double vol = space.geometry(c).volume;
    const auto map = space.dof_map(c);
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) {
        const double v = dot(basis[i], basis[j]).integrate(all, vol);
        t.emplace_back(map[i], map[j], v);
        if (i != j) t.emplace_back(map[j], map[i], v);
      }
  }
  Operator op;
  op.rows = op.cols = space.global_dim();
  op.matrix.resize(op.rows, op.cols);
  op.matrix.setFromTriplets(t.begin(), t.end());
  op.tag = OperatorTag::mass;
  op.level = space.level();
  return op;
}

Operator assemble_diff_by_moments(const SpaceHandle& from, const SpaceHandle& to) {
  check_pair(from, to);
  std::vector<Eigen::Triplet<double>> t;
  for (int c = 0; c < from.mesh().num_tets(); ++c) {
    const auto& geo = from.geometry(c);
    const auto rows = to.dof_map(c), cols = from.dof_map(c);
    for (int j = 0; j < from.local_dim(); ++j) {
      const BaryVec dphi = exterior_derivative(from.level(), from.basis(c)[j], geo.grads);
      const Eigen::VectorXd local = apply_dofs(to.level(), to.degree(), geo, dphi);
      for (int i = 0; i < to.local_dim(); ++i) {
        const double v = std::abs(local[i]) < 1e-13 ? 0.0 : local[i];
        t.emplace_back(rows[i], cols[j], v);
      }
    }
  }
  Operator op;
  op.rows = to.global_dim();
  op.cols = from.global_dim();
  op.matrix = from_set_triplets(op.rows, op.cols, std::move(t));
  op.tag = OperatorTag::diff;
  op.level = from.level();
  return op;
}

Operator assemble_diff(const SpaceHandle& from, const SpaceHandle& to) {
  check_pair(from, to);
  if (from.degree() == 0) return incidence(from, to);
  return assemble_diff_by_moments(from, to);
}

Eigen::MatrixXd restrict_free(const Operator& op, const SpaceHandle& row_space, const SpaceHandle& col_space) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(row_space.free_dim(), col_space.free_dim());
  for (int k = 0; k < op.matrix.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(op.matrix, k); it; ++it) {
      const int r = row_space.free_index(static_cast<int>(it.row()));
      const int c = col_space.free_index(static_cast<int>(it.col()));
      if (r >= 0 && c >= 0) out(r, c) = it.value();
    }
  return out;
}

Complex build_complex(std::shared_ptr<const Mesh> mesh, int degree, Boundary bc) {
  Complex cx;
  for (int l = 0; l < 4; ++l) cx.spaces[l] = SpaceHandle::build(mesh, l, degree, bc);
  for (int l = 0; l < 3; ++l) cx.diff[l] = assemble_diff(cx.spaces[l], cx.spaces[l + 1]);
  return cx;
}

ComplexReport complex_report(std::shared_ptr<const Mesh> mesh, int degree, Boundary bc) {
  const Complex cx = build_complex(mesh, degree, bc);
  ComplexReport r;
  r.degree = degree;
  r.bc = bc;
  r.betti = betti_numbers(*mesh);
  std::array<Eigen::MatrixXd, 3> d;
  for (int l = 0; l < 4; ++l) r.dims[l] = cx.spaces[l].free_dim();
  for (int l = 0; l < 3; ++l) {
    d[l] = restrict_free(cx.diff[l], cx.spaces[l + 1], cx.spaces[l]);
    r.ranks[l] = svd_rank(d[l]);
    r.kernel_dims[l] = r.dims[l] - r.ranks[l];
  }
  // Level 3: no further differential, or the mean functional when boundary conditions are imposed.
  r.kernel_dims[3] = r.dims[3] - (bc == Boundary::homogeneous && r.dims[3] > 0 ? 1 : 0);
  for (int l = 0; l < 4; ++l) r.cohomology[l] = r.kernel_dims[l] - (l > 0 ? r.ranks[l - 1] : 0);
  for (int l = 0; l < 2; ++l) {
    const Eigen::SparseMatrix<double> dd = cx.diff[l + 1].matrix * cx.diff[l].matrix;
    for (int k = 0; k < dd.outerSize(); ++k)
      for (Eigen::SparseMatrix<double>::InnerIterator it(dd, k); it; ++it)
        r.composition_residual = std::max(r.composition_residual, std::abs(it.value()));
  }
  return r;
}

Eigen::MatrixXd kernel_orthogonal_projector(const Eigen::MatrixXd& mass, const Eigen::MatrixXd& diff) {
  const Eigen::Index n = mass.rows();
  const Eigen::MatrixXd z = null_space(diff);
  if (z.cols() == 0) return Eigen::MatrixXd::Identity(n, n);
  const Eigen::MatrixXd mz = mass * z;
  const Eigen::MatrixXd gram = z.transpose() * mz;
  return Eigen::MatrixXd::Identity(n, n) - z * gram.ldlt().solve(mz.transpose());
}

void write_matrix_market(std::ostream& out, const Operator& op) {
  out << "%%MatrixMarket matrix coordinate real general\n";
  out << op.rows << ' ' << op.cols << ' ' << op.matrix.nonZeros() << '\n';
  char buf[64];
  for (int k = 0; k < op.matrix.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(op.matrix, k); it; ++it) {
      std::snprintf(buf, sizeof buf, "%.17g", it.value());
      out << it.row() + 1 << ' ' << it.col() + 1 << ' ' << buf << '\n';
    }
}

}  // namespace derham
