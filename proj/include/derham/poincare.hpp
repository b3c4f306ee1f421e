#pragma once

// Best discrete Poincare constants of d^l and the equivalent characterizations:
// Rayleigh quotient, stability of the minimum-norm preimage, inf-sup, and the
// norm of the minimal potential operator. Also the graph-stable minimizing
// projection and the rich-oracle / Piola-transport studies.

#include <cstdint>
#include <limits>
#include <optional>

#include <Eigen/Sparse>

#include "derham/derham.hpp"
#include "derham/solvers.hpp"

namespace derham {

/// splitmix64 generator; uniform() is in [-1, 1).
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next();
  double uniform();
  Eigen::VectorXd vector(Eigen::Index n);

 private:
  std::uint64_t state_;
};

/// d^l : V^l -> V^{l+1} with both mass matrices, on free DOFs.
struct LevelProblem {
  int level = 0;
  int degree = 0;
  Boundary bc = Boundary::none;
  std::shared_ptr<const Mesh> mesh;
  SpaceHandle space, next;
  Eigen::SparseMatrix<double> mass, next_mass, diff;
  double h_omega = 0.0;

  /// Throws Error{cap_exceeded} if cap > 0 and dim V^l exceeds it, Error{empty_space} if V^l is trivial.
  static LevelProblem build(std::shared_ptr<const Mesh> mesh, int level, int degree, Boundary bc, int cap = 0);
  int dim() const { return space.free_dim(); }
  double norm(const Eigen::VectorXd& u) const { return std::sqrt(u.dot(mass * u)); }
  double next_norm(const Eigen::VectorXd& r) const { return std::sqrt(r.dot(next_mass * r)); }
};

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct ConstantReport {
  int level = 0;
  int degree = 0;
  Boundary bc = Boundary::none;
  double h_omega = 0.0;
  double lambda_min_pos = 0.0;
  double constant = 0.0;
  int kernel_dim = 0;
  int dim = 0;
  double infsup = kNaN;
  double potential_norm = kNaN;
  double stability = kNaN;  // extremal stability ratio
  std::uint64_t seed = 0;
  Eigen::VectorXd extremal;  // eigenvector of lambda_min_pos
};

/// Generalized eigenproblem D^T M+ D x = lambda M x. Throws Error{trivial_range} if d^l vanishes,
/// Error{numerical} if the eigenvalue threshold disagrees with the SVD kernel dimension.
ConstantReport constant(const LevelProblem& problem);

/// Minimum-norm preimages u* = argmin |u| subject to D u = r, via the mixed
/// formulation with multipliers in an M+-orthonormal basis of range(D).
class MinimumNorm {
 public:
  explicit MinimumNorm(const LevelProblem& problem);
  /// Throws Error{incompatible_constraint} if r is not in range(D).
  Eigen::VectorXd solve(const Eigen::VectorXd& r) const;
  const Eigen::MatrixXd& range() const { return range_; }
  const LevelProblem& problem() const { return *problem_; }
  /// Preimages of all range basis vectors (columns).
  Eigen::MatrixXd potentials() const;

 private:
  const LevelProblem* problem_;
  Eigen::MatrixXd range_;   // next free dim x rank
  Eigen::MatrixXd weight_;  // R^T M+
  std::optional<SaddleSolver> solver_;
};

Eigen::VectorXd constrained_min(const LevelProblem& problem, const Eigen::VectorXd& r);

/// Largest |u*| / (h |r|) over r = D v for n_samples random v; optionally also r = D x_extremal.
double stability_sup(const LevelProblem& problem, int n_samples, std::uint64_t seed,
                     const Eigen::VectorXd* extremal = nullptr);

/// inf over range(D) of sup over V^l, from the Schur operator D M^{-1} D^T in the M+ inner product.
double inf_sup(const LevelProblem& problem);

/// Operator norm of the minimal potential operator range(D) -> V^l.
double potential_norm(const LevelProblem& problem);

struct EquivalenceReport {
  ConstantReport report;
  double stability_sampled = 0.0;
  double infsup_error = 0.0;      // |infsup C h - 1|
  double potential_error = 0.0;   // |potential / (C h) - 1|
  double stability_error = 0.0;   // |extremal ratio - C|
  double sampled_excess = 0.0;    // max(0, sampled sup - C)
  bool pass = false;
};

EquivalenceReport equivalence(const LevelProblem& problem, int n_samples, std::uint64_t seed, double tol = 1e-8);

struct ProjectionReport {
  int level = 0;
  std::string input;
  double commuting_residual = 0.0;
  double projection_residual = 0.0;
  double stability_ratio = 0.0;
  std::string norm_kind;  // "L2" or "graph"
  double bound = kNaN;
};

/// Graph-stable commuting projections Pi^l (l = 1, 2, 3) from a rich space onto V_p:
/// Pi^3 is the L2 projection and Pi^l, l = 1, 2, minimizes |u - v| subject to
/// d v = Pi^{l+1} d u. Fields are free-DOF vectors of the spaces involved.
class MinimizingProjection {
 public:
  MinimizingProjection(std::shared_ptr<const Mesh> coarse, int degree, Boundary bc, std::shared_ptr<const Mesh> rich,
                       int rich_degree);

  Eigen::VectorXd apply(int level, const Eigen::VectorXd& u_rich) const;
  /// Coarse field re-expressed in the rich space.
  Eigen::VectorXd embed(int level, const Eigen::VectorXd& v) const;
  Eigen::VectorXd rich_diff(int level, const Eigen::VectorXd& u) const { return rich_diff_[level] * u; }
  Eigen::VectorXd coarse_diff(int level, const Eigen::VectorXd& v) const { return coarse_diff_[level] * v; }
  double coarse_norm(int level, const Eigen::VectorXd& v) const;
  double rich_norm(int level, const Eigen::VectorXd& u) const;
  int coarse_dim(int level) const { return coarse_[level].free_dim(); }
  int rich_dim(int level) const { return rich_[level].free_dim(); }
  const SpaceHandle& coarse_space(int level) const { return coarse_[level]; }
  const SpaceHandle& rich_space(int level) const { return rich_[level]; }
  double h_omega() const { return h_omega_; }

  /// Commuting residual, projection residual (on the embedded projection of u) and graph-norm ratio.
  ProjectionReport report(int level, const Eigen::VectorXd& u_rich, double constant) const;

 private:
  std::array<SpaceHandle, 4> coarse_, rich_;
  std::array<Eigen::SparseMatrix<double>, 4> coarse_mass_, rich_mass_, embed_;
  std::array<Eigen::SparseMatrix<double>, 3> coarse_diff_, rich_diff_;
  std::array<Eigen::MatrixXd, 3> range_;
  std::array<std::optional<SaddleSolver>, 3> solver_;
  Eigen::LLT<Eigen::MatrixXd> l2_;
  double h_omega_ = 0.0;
};

struct OracleSpec {
  std::shared_ptr<const Mesh> mesh;  // nested refinement of the coarse mesh, or the coarse mesh itself
  int degree = 0;
  std::string label;
};

struct Route1Report {
  std::vector<std::string> oracles;
  std::vector<double> max_ratio;  // per oracle, over samples
  std::vector<double> min_ratio;
  std::vector<std::vector<double>> ratios;
  bool all_nested = true;
  bool monotone = true;  // max ratio nondecreasing under enrichment
  std::uint64_t seed = 0;
};

/// |u*_coarse| / |u*_oracle| for sampled r = D v in the coarse range.
Route1Report route1_min_ratio(std::shared_ptr<const Mesh> mesh, int level, int degree, Boundary bc,
                              const std::vector<OracleSpec>& oracles, int n_samples, std::uint64_t seed);

/// Companion reference mesh: same connectivity, vertices recentered and scaled by 1/h_omega.
Mesh normalized_reference(const Mesh& mesh);

/// Matrix of the piecewise Piola pull-back psi^l : V^l(mesh) -> V^l(reference) on global DOFs.
Eigen::SparseMatrix<double> piola_matrix(const SpaceHandle& physical, const SpaceHandle& reference);

struct Route3Report {
  double h_omega = 0.0;
  double h_ref = 0.0;
  std::array<double, 4> norm{};          // measured |psi^l|
  std::array<double, 4> inverse_norm{};  // measured |psi^{-l}|
  std::array<double, 3> commuting{};     // |Psi^{l+1} D - D_ref Psi^l|, relative
  std::array<double, 4> conformity{};    // jump defect of transported random fields
  std::array<double, 2> constant_direct{kNaN, kNaN};  // l = 1, 2
  std::array<double, 2> constant_reference{kNaN, kNaN};
  std::array<double, 2> transported_bound{kNaN, kNaN};  // |psi^-l||psi^{l+1}| C_ref h_ref / h_omega
  bool bound_holds = true;
};

/// Throws Error{connectivity_mismatch} if the reference mesh has different connectivity.
Route3Report route3_transport(std::shared_ptr<const Mesh> mesh, int degree, Boundary bc,
                              std::shared_ptr<const Mesh> reference = nullptr, std::uint64_t seed = 1);

}  // namespace derham
