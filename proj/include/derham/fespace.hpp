#pragma once

// Conforming finite element spaces of the discrete de Rham complex:
//   level 0: Lagrange P_{p+1}, level 1: Nedelec Ne_p, level 2: Raviart-Thomas RT_p,
//   level 3: discontinuous P_p.
//
// Degrees of freedom are unscaled integral moments attached to mesh entities,
// oriented by increasing global vertex index:
//   vertex values; edge moments  int_e (u.t) q;  face moments int_f (u.n) q or
//   int_f (u.t_s) q;  cell moments int_tau u.e_c q,
// with weights q homogeneous barycentric monomials of the entity's own vertices.
// Every tet sees the same functional for a shared entity, so the global space is
// conforming with all DOF signs equal to +1.
//
// Fields of every level are stored as BaryVec; scalar levels (0 and 3) use
// component 0 only.

#include <functional>
#include <memory>
#include <vector>

#include "derham/mesh.hpp"
#include "derham/poly.hpp"

namespace derham {

enum class Boundary { none, homogeneous };

const char* to_string(Boundary bc);
Boundary parse_boundary(const std::string& s);

enum class EntityKind { vertex, edge, face, cell };

struct LocalDof {
  EntityKind kind;
  int entity;  // local vertex / edge / face index, 0 for the cell
  int index;   // moment index within the entity
};

/// Affine map x = b + J xhat from a source tet onto a target tet, vertex i to vertex i.
struct AffineMap {
  Mat3 jacobian = Mat3::Identity();
  Vec3 shift = Vec3::Zero();
  double det = 1.0;

  static AffineMap between(const std::array<Vec3, 4>& source, const std::array<Vec3, 4>& target);
  Vec3 operator()(const Vec3& x) const { return shift + jacobian * x; }
};

/// Piola transform psi^l pulling a field on the target tet back to the source tet:
/// psi^0 v = v o F, psi^1 v = J^T (v o F), psi^2 v = det(J) J^{-1} (v o F), psi^3 v = det(J) (v o F).
/// Values are those of v at F(xhat); scalar levels use component 0.
Vec3 piola(int level, const Mat3& jacobian, const Vec3& value);
Vec3 piola_inverse(int level, const Mat3& jacobian, const Vec3& value);
/// Polynomial versions; barycentric coordinates are shared by source and target tets.
BaryVec piola(int level, const Mat3& jacobian, const BaryVec& field);
BaryVec piola_inverse(int level, const Mat3& jacobian, const BaryVec& field);

/// d^l of a level-l field on a tet: grad (l=0), curl (l=1), div (l=2).
BaryVec exterior_derivative(int level, const BaryVec& field, const BaryGradients& grads);

/// Per-tet geometric data used for assembly.
struct TetGeometry {
  std::array<Vec3, 4> x;
  AffineMap map;  // reference tet -> this tet
  BaryGradients grads;
  double volume = 0.0;

  static TetGeometry of(const Mesh& mesh, int t);
  static TetGeometry of(const std::array<Vec3, 4>& points);
};

/// Number of DOFs per vertex, edge, face and cell.
std::array<int, 4> dofs_per_entity(int level, int degree);
int local_dimension(int level, int degree);

/// The level-l moment functionals of one tetrahedron.
const std::vector<LocalDof>& local_dofs(int level, int degree);

/// Applies local DOF functional `dof` of a tet with the given geometry to a field.
double apply_dof(int level, int degree, const TetGeometry& geo, const LocalDof& dof, const BaryVec& field);
Eigen::VectorXd apply_dofs(int level, int degree, const TetGeometry& geo, const BaryVec& field);

/// Basis of the level-l space on the reference tet, dual to its DOFs.
const std::vector<BaryVec>& reference_basis(int level, int degree);

class SpaceHandle {
 public:
  SpaceHandle() = default;
  /// Throws Error{invalid_argument} on unsupported (level, degree).
  static SpaceHandle build(std::shared_ptr<const Mesh> mesh, int level, int degree, Boundary bc);

  int level() const { return level_; }
  int degree() const { return degree_; }
  Boundary bc() const { return bc_; }
  const Mesh& mesh() const { return *mesh_; }
  const std::shared_ptr<const Mesh>& mesh_ptr() const { return mesh_; }

  /// Dimension of the space without boundary conditions.
  int global_dim() const { return global_dim_; }
  /// Dimension after deleting boundary DOFs (equals global_dim for bc = none or level 3).
  int free_dim() const { return static_cast<int>(free_dofs_.size()); }
  int local_dim() const { return static_cast<int>(local_dofs_->size()); }

  std::span<const int> dof_map(int t) const {
    return {dof_map_.data() + static_cast<std::size_t>(t) * local_dim(), static_cast<std::size_t>(local_dim())};
  }
  int dof_sign(int, int) const { return 1; }
  const std::vector<LocalDof>& dofs() const { return *local_dofs_; }
  const std::vector<char>& free_mask() const { return free_mask_; }
  const std::vector<int>& free_dofs() const { return free_dofs_; }
  /// Position of a global DOF among the free DOFs, -1 if deleted.
  int free_index(int global) const { return free_index_[global]; }
  /// Entity kind and global entity index owning a global DOF.
  std::pair<EntityKind, int> dof_entity(int global) const;

  const std::vector<BaryVec>& basis(int t) const { return basis_[t]; }
  const TetGeometry& geometry(int t) const { return geometry_[t]; }

  /// Local field sum_k coeffs[dof_map(t)[k]] phi_k on tet t (coeffs over all global DOFs).
  BaryVec local_field(int t, const Eigen::VectorXd& coeffs) const;
  /// Expands a free-DOF vector to the global numbering (deleted DOFs set to 0).
  Eigen::VectorXd expand(const Eigen::VectorXd& free_coeffs) const;
  Eigen::VectorXd restrict_to_free(const Eigen::VectorXd& coeffs) const;

 private:
  std::shared_ptr<const Mesh> mesh_;
  int level_ = 0;
  int degree_ = 0;
  Boundary bc_ = Boundary::none;
  int global_dim_ = 0;
  std::array<int, 4> per_entity_{};
  std::array<int, 4> offsets_{};
  const std::vector<LocalDof>* local_dofs_ = nullptr;
  std::vector<int> dof_map_;
  std::vector<char> free_mask_;
  std::vector<int> free_dofs_;
  std::vector<int> free_index_;
  std::vector<std::vector<BaryVec>> basis_;
  std::vector<TetGeometry> geometry_;
};

/// Physical values of all local basis functions of tet t at point x.
/// Throws Error{invalid_argument} if x lies outside the tet.
std::vector<Vec3> eval_basis(const SpaceHandle& space, int t, const Vec3& x);

/// Global DOF vector of a field given tetwise (the field must be conforming for the
/// result to represent it). Shared DOFs take the value seen from the first tet.
Eigen::VectorXd interpolate(const SpaceHandle& space, const std::function<BaryVec(int)>& field);

/// Largest jump over interior faces, at six points per face, of the trace (l=0),
/// tangential component (l=1) or normal component (l=2) of a tetwise field.
double conformity_defect(const Mesh& mesh, int level, const std::function<BaryVec(int)>& field);

}  // namespace derham
