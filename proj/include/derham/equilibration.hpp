#pragma once

// Commuting H(div) projection by flux equilibration on vertex stars:
//   xi        elementwise RT_p minimizer with div xi = Pi^3 div u,
//   fr^a      star minimizer close to the RT interpolant of psi_a xi with
//             div fr^a = Pi^3(psi_a div u + grad psi_a . xi) and zero flux on
//             the faces of the star not touching a,
//   Pi^2 u    sum of fr^a over all vertices.
// Only the case without boundary conditions is covered.

#include <iosfwd>

#include "derham/poincare.hpp"

namespace derham {

/// Per-tet polynomial field of one degree, no continuity implied.
struct BrokenField {
  int level = 2;
  int degree = 0;
  std::vector<BaryVec> cells;
  bool conformity_checked = false;

  int components() const { return level == 0 || level == 3 ? 1 : 3; }
};

/// Tetwise fields of a discrete space, all elevated to the space's polynomial degree.
BrokenField broken_from_space(const SpaceHandle& space, const Eigen::VectorXd& coeffs);

/// Text format: header "level=L degree=q ntets=T", then per tet one row per component
/// holding the barycentric monomial coefficients in descending lexicographic order.
void write_broken_field(std::ostream& out, const BrokenField& field);
BrokenField read_broken_field(std::istream& in);

/// Largest interior-face jump of the level-appropriate trace, relative to the field size.
/// Sets field.conformity_checked when it is below tol.
double check_conformity(const Mesh& mesh, BrokenField& field, double tol = 1e-10);

/// Elementwise L2 projection onto P_p (each component). Throws Error{invalid_argument} for degree overflow.
BrokenField l2_project_broken(const Mesh& mesh, const BrokenField& u, int degree);

/// Elementwise constrained minimizer xi in RT_p(tau); `rt` is the level-2 degree-p space.
BrokenField elementwise_constrained(const SpaceHandle& rt, const BrokenField& u);

struct StarResult {
  int vertex = 0;
  bool interior = false;
  double compatibility = 0.0;        // relative |int (psi_a div u + grad psi_a . xi)|
  double divergence_residual = 0.0;  // relative, all P_p moments on the star
  double euler_residual = 0.0;       // relative primal residual of the mixed system
  Eigen::VectorXd coeffs;            // global RT_p coefficients of fr^a (zero outside the star)
};

/// Throws Error{compatibility_violation} naming the vertex if an interior star is incompatible.
StarResult star_equilibrate(const SpaceHandle& rt, const BrokenField& u, const BrokenField& xi, int vertex);

struct EquilibrationResult {
  Eigen::VectorXd coeffs;  // global RT_p coefficients of Pi^2 u
  ProjectionReport report;
  double partition_of_unity = 0.0;     // max |sum_a psi_a - 1| at sample points
  double divergence_partition = 0.0;   // |sum_a star data - Pi^3 div u| (moments), relative
  double max_compatibility = 0.0;
  double max_star_divergence = 0.0;
  double conformity = 0.0;
  std::vector<StarResult> stars;
};

/// Pi^2 u with diagnostics. The projection residual is |Pi(Pi u) - Pi u| / |Pi u|.
EquilibrationResult commuting_projection_hdiv(std::shared_ptr<const Mesh> mesh, int degree, const BrokenField& u,
                                              bool check_idempotency = true);

}  // namespace derham
