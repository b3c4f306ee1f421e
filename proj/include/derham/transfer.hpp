#pragma once

// Transfer between nested discrete spaces: a coarse space V_p on mesh T_c and a
// richer space of the same level (degree q >= p) on T_c itself or on a refinement.

#include <Eigen/Sparse>

#include "derham/fespace.hpp"

namespace derham {

struct Nesting {
  std::vector<int> parent;                // fine tet -> coarse tet containing it
  std::vector<Eigen::Matrix4d> bary;      // (i, j) = coarse lambda_i at fine vertex j
};

/// Locates every fine tet inside a coarse tet. Throws Error{non_nested}.
Nesting find_nesting(const Mesh& coarse, const Mesh& fine);

/// A coarse-tet polynomial rewritten in the barycentric coordinates of a nested fine tet.
BaryVec restrict_to_child(const BaryVec& field, const Eigen::Matrix4d& bary);

/// Matrix E (rich global dim x coarse global dim) with phi^coarse_j = sum_i E(i, j) phi^rich_i.
/// Throws Error{non_nested} if the spaces are not nested.
Eigen::SparseMatrix<double> embedding(const SpaceHandle& coarse, const SpaceHandle& rich);

/// Rows/columns of a global sparse matrix restricted to free DOFs.
Eigen::SparseMatrix<double> free_block(const Eigen::SparseMatrix<double>& a, const SpaceHandle& rows,
                                       const SpaceHandle& cols);

}  // namespace derham
