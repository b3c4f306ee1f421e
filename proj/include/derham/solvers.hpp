#pragma once

// Dense linear algebra kernels shared by the analysis modules.

#include <Eigen/Dense>

#include "derham/error.hpp"

namespace derham {

struct EigenResult {
  Eigen::VectorXd values;   // ascending
  Eigen::MatrixXd vectors;  // M-orthonormal columns
  Eigen::VectorXd residuals;
};

/// All eigenpairs of K x = lambda M x. Throws Error{not_spd} if M is not SPD.
EigenResult sym_gen_eig(const Eigen::MatrixXd& k, const Eigen::MatrixXd& m);

struct SaddleSolution {
  Eigen::VectorXd u;
  Eigen::VectorXd s;
  double primal_residual = 0.0;      // relative |A u + B^T s - f|
  double constraint_residual = 0.0;  // relative |B u - g|
};

/// Factored [A B^T; B 0] for repeated right-hand sides.
class SaddleSolver {
 public:
  SaddleSolver(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

  /// Throws Error{incompatible_constraint} when the post-solve residual exceeds 1e-7.
  SaddleSolution solve(const Eigen::VectorXd& f, const Eigen::VectorXd& g) const;
  /// Primal parts of the solutions for the columns of F and G (no residual checks).
  Eigen::MatrixXd solve_primal(const Eigen::MatrixXd& f, const Eigen::MatrixXd& g) const;

 private:
  SaddleSolution finish(Eigen::VectorXd x, const Eigen::VectorXd& f, const Eigen::VectorXd& g) const;

  Eigen::MatrixXd a_, b_;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
  bool singular_ = false;
};

SaddleSolution solve_saddle(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const Eigen::VectorXd& f,
                            const Eigen::VectorXd& g);

/// Numerical rank with threshold sigma_max * max(rows, cols) * rel.
int svd_rank(const Eigen::MatrixXd& a, double rel = 1e-12);

/// Orthonormal basis of the null space of A (Euclidean), from a full SVD.
Eigen::MatrixXd null_space(const Eigen::MatrixXd& a, double rel = 1e-12);

/// Basis R of range(A) with R^T M R = I: leading left singular vectors, then
/// M-orthonormalized by a Cholesky factor of their Gram matrix.
Eigen::MatrixXd range_basis(const Eigen::MatrixXd& a, const Eigen::MatrixXd& m, double rel = 1e-12);

/// Columns spanning {c : w^T c = 0}, orthonormal, from a Householder QR of w.
Eigen::MatrixXd orthogonal_complement(const Eigen::VectorXd& w);

/// Extreme eigenvalues of K x = lambda M x.
double min_gen_eigenvalue(const Eigen::MatrixXd& k, const Eigen::MatrixXd& m);
double max_gen_eigenvalue(const Eigen::MatrixXd& k, const Eigen::MatrixXd& m);

}  // namespace derham
