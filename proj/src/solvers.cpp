#include "derham/solvers.hpp"

#include <algorithm>
#include <cmath>

namespace derham {

namespace {

Eigen::LLT<Eigen::MatrixXd> cholesky(const Eigen::MatrixXd& m) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) throw Error(ErrorCode::not_spd, "matrix is not symmetric positive definite");
  return llt;
}

double norm_or_one(double x) { return x > 0.0 ? x : 1.0; }

}  // namespace

EigenResult sym_gen_eig(const Eigen::MatrixXd& k, const Eigen::MatrixXd& m) {
  if (k.rows() != k.cols() || m.rows() != m.cols() || k.rows() != m.rows())
    throw Error(ErrorCode::invalid_argument, "eigenproblem matrices must be square and of equal size");
  EigenResult r;
  const Eigen::Index n = k.rows();
  if (n == 0) return r;
  const auto llt = cholesky(m);
  const Eigen::MatrixXd l = llt.matrixL();
  Eigen::MatrixXd c = l.triangularView<Eigen::Lower>().solve(k);
  c = l.triangularView<Eigen::Lower>().solve(c.transpose()).transpose();
  c = 0.5 * (c + c.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c);
  if (es.info() != Eigen::Success) throw Error(ErrorCode::numerical, "symmetric eigensolver did not converge");
  r.values = es.eigenvalues();
  r.vectors = l.transpose().triangularView<Eigen::Upper>().solve(es.eigenvectors());
  r.residuals.resize(n);
  const Eigen::MatrixXd kx = k * r.vectors, mx = m * r.vectors;
  for (Eigen::Index j = 0; j < n; ++j) r.residuals[j] = (kx.col(j) - r.values[j] * mx.col(j)).norm();
  return r;
}

SaddleSolver::SaddleSolver(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) : a_(a), b_(b) {
  if (a.rows() != a.cols()) throw Error(ErrorCode::invalid_argument, "saddle block A must be square");
  if (b.rows() > 0 && b.cols() != a.cols()) throw Error(ErrorCode::invalid_argument, "saddle block B has wrong width");
  const Eigen::Index n = a.rows(), m = b.rows();
  Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(n + m, n + m);
  kkt.topLeftCorner(n, n) = a;
  if (m > 0) {
    kkt.bottomLeftCorner(m, n) = b;
    kkt.topRightCorner(n, m) = b.transpose();
  }
  if (n + m > 0) {
    lu_.compute(kkt);
    const double scale = kkt.cwiseAbs().maxCoeff();
    const auto& u = lu_.matrixLU();
    const double pivot = u.diagonal().cwiseAbs().minCoeff();
    singular_ = !(pivot > 1e-14 * norm_or_one(scale));
  }
}

SaddleSolution SaddleSolver::finish(Eigen::VectorXd x, const Eigen::VectorXd& f, const Eigen::VectorXd& g) const {
  const Eigen::Index n = a_.rows(), m = b_.rows();
  SaddleSolution sol;
  sol.u = x.head(n);
  sol.s = x.tail(m);
  const Eigen::VectorXd r1 = a_ * sol.u + (m > 0 ? Eigen::VectorXd(b_.transpose() * sol.s) : Eigen::VectorXd::Zero(n)) - f;
  const double sa = a_.size() ? a_.norm() : 0.0, sb = b_.size() ? b_.norm() : 0.0;
  sol.primal_residual = r1.norm() / norm_or_one(sa * sol.u.norm() + sb * sol.s.norm() + f.norm());
  if (m > 0) {
    const Eigen::VectorXd r2 = b_ * sol.u - g;
    sol.constraint_residual = r2.norm() / norm_or_one(sb * sol.u.norm() + g.norm());
  }
  return sol;
}

SaddleSolution SaddleSolver::solve(const Eigen::VectorXd& f, const Eigen::VectorXd& g) const {
  const Eigen::Index n = a_.rows(), m = b_.rows();
  if (f.size() != n || g.size() != m) throw Error(ErrorCode::invalid_argument, "saddle right-hand side has wrong size");
  Eigen::VectorXd rhs(n + m);
  rhs << f, g;
  SaddleSolution sol;
  bool ok = false;
  if (!singular_ && n + m > 0) {
    sol = finish(lu_.solve(rhs), f, g);
    ok = std::isfinite(sol.u.norm()) && sol.primal_residual <= 1e-7 && sol.constraint_residual <= 1e-7;
  }
  if (!ok && n + m > 0) {
    // Rank-deficient constraint block: minimum-norm least-squares solution.
    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(n + m, n + m);
    kkt.topLeftCorner(n, n) = a_;
    if (m > 0) {
      kkt.bottomLeftCorner(m, n) = b_;
      kkt.topRightCorner(n, m) = b_.transpose();
    }
    sol = finish(kkt.completeOrthogonalDecomposition().solve(rhs), f, g);
  }
  if (n + m == 0) return sol;
  if (!(sol.constraint_residual <= 1e-7)) throw Error(ErrorCode::incompatible_constraint, "incompatible constraint");
  if (!(sol.primal_residual <= 1e-7)) throw Error(ErrorCode::numerical, "saddle point system is singular");
  return sol;
}

Eigen::MatrixXd SaddleSolver::solve_primal(const Eigen::MatrixXd& f, const Eigen::MatrixXd& g) const {
  const Eigen::Index n = a_.rows(), m = b_.rows();
  if (singular_) throw Error(ErrorCode::numerical, "saddle point system is singular");
  Eigen::MatrixXd rhs(n + m, f.cols());
  rhs.topRows(n) = f;
  rhs.bottomRows(m) = g;
  return lu_.solve(rhs).topRows(n);
}

SaddleSolution solve_saddle(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const Eigen::VectorXd& f,
                            const Eigen::VectorXd& g) {
  return SaddleSolver(a, b).solve(f, g);
}

int svd_rank(const Eigen::MatrixXd& a, double rel) {
  if (a.size() == 0) return 0;
  Eigen::BDCSVD<Eigen::MatrixXd> svd(a);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s[0] == 0.0) return 0;
  const double tol = s[0] * static_cast<double>(std::max(a.rows(), a.cols())) * rel;
  int r = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s[i] > tol) ++r;
  return r;
}

Eigen::MatrixXd null_space(const Eigen::MatrixXd& a, double rel) {
  const Eigen::Index n = a.cols();
  if (a.rows() == 0) return Eigen::MatrixXd::Identity(n, n);
  Eigen::BDCSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const int r = svd_rank(a, rel);
  return svd.matrixV().rightCols(n - r);
}

Eigen::MatrixXd range_basis(const Eigen::MatrixXd& a, const Eigen::MatrixXd& m, double rel) {
  if (a.size() == 0) return Eigen::MatrixXd(a.rows(), 0);
  Eigen::BDCSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU);
  const int r = svd_rank(a, rel);
  const Eigen::MatrixXd u = svd.matrixU().leftCols(r);
  const Eigen::MatrixXd gram = u.transpose() * m * u;
  const auto llt = cholesky(0.5 * (gram + gram.transpose()));
  // R = U L^{-T}
  return llt.matrixU().solve<Eigen::OnTheRight>(u);
}

Eigen::MatrixXd orthogonal_complement(const Eigen::VectorXd& w) {
  const Eigen::Index n = w.size();
  if (n == 0) return Eigen::MatrixXd(0, 0);
  const Eigen::MatrixXd wm = w;
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(wm);
  const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, n);
  return q.rightCols(n - 1);
}

double min_gen_eigenvalue(const Eigen::MatrixXd& k, const Eigen::MatrixXd& m) {
  const auto r = sym_gen_eig(k, m);
  if (r.values.size() == 0) throw Error(ErrorCode::empty_space, "empty space");
  return r.values[0];
}

double max_gen_eigenvalue(const Eigen::MatrixXd& k, const Eigen::MatrixXd& m) {
  const auto r = sym_gen_eig(k, m);
  if (r.values.size() == 0) throw Error(ErrorCode::empty_space, "empty space");
  return r.values[r.values.size() - 1];
}

}  // namespace derham
