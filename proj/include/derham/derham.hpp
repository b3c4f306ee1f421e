#pragma once

// Mass matrices, differential operators and exactness diagnostics of the
// discrete complex  V^0 -grad-> V^1 -curl-> V^2 -div-> V^3.

#include <iosfwd>

#include <Eigen/Sparse>

#include "derham/fespace.hpp"

namespace derham {

enum class OperatorTag { diff, mass, other };

struct Operator {
  int rows = 0;
  int cols = 0;
  Eigen::SparseMatrix<double> matrix;
  OperatorTag tag = OperatorTag::other;
  int level = 0;

  Eigen::MatrixXd dense() const { return Eigen::MatrixXd(matrix); }
};

/// Global L2 mass matrix of a space (all DOFs, boundary conditions ignored).
Operator assemble_mass(const SpaceHandle& space);

/// Matrix of d^l : V^l -> V^{l+1} on global DOFs. For degree 0 this is the signed
/// incidence matrix built from the mesh alone; otherwise DOFs of d phi are taken
/// elementwise. Throws Error{invalid_argument} on a mismatched pair.
Operator assemble_diff(const SpaceHandle& from, const SpaceHandle& to);

/// Same matrix through elementwise DOF application for every degree.
Operator assemble_diff_by_moments(const SpaceHandle& from, const SpaceHandle& to);

/// Dense block of an operator restricted to free DOFs of the row and column spaces.
Eigen::MatrixXd restrict_free(const Operator& op, const SpaceHandle& row_space, const SpaceHandle& col_space);

/// The four spaces and three differential matrices of one (mesh, p, bc).
struct Complex {
  std::array<SpaceHandle, 4> spaces;
  std::array<Operator, 3> diff;
};

Complex build_complex(std::shared_ptr<const Mesh> mesh, int degree, Boundary bc);

struct ComplexReport {
  int degree = 0;
  Boundary bc = Boundary::none;
  std::array<int, 4> dims{};         // free dimensions
  std::array<int, 3> ranks{};        // rank of D^l restricted to free DOFs
  std::array<int, 4> kernel_dims{};  // kernel of D^l; level 3 uses the mean functional for bc=homogeneous
  std::array<int, 4> cohomology{};
  double composition_residual = 0.0;  // max |D^{l+1} D^l|
  std::array<int, 4> betti{};        // simplicial homology of the mesh
};

ComplexReport complex_report(std::shared_ptr<const Mesh> mesh, int degree, Boundary bc);

/// M-orthogonal projector onto the M-orthogonal complement of ker D, on free DOFs.
Eigen::MatrixXd kernel_orthogonal_projector(const Eigen::MatrixXd& mass, const Eigen::MatrixXd& diff);

/// Coordinate MatrixMarket text ("%%MatrixMarket matrix coordinate real general").
void write_matrix_market(std::ostream& out, const Operator& op);

}  // namespace derham
