#include "derham/transfer.hpp"

#include <algorithm>
#include <cmath>

namespace derham {

Nesting find_nesting(const Mesh& coarse, const Mesh& fine) {
  Nesting n;
  n.parent.resize(fine.num_tets());
  n.bary.resize(fine.num_tets());
  const bool same = coarse.num_tets() == fine.num_tets() && content_hash(coarse) == content_hash(fine);
  for (int t = 0; t < fine.num_tets(); ++t) {
    const auto x = fine.tet_points(t);
    const auto candidate = [&](int c) {
      Eigen::Matrix4d a;
      for (int j = 0; j < 4; ++j) {
        const Bary l = barycentric(coarse, c, x[j]);
        for (int i = 0; i < 4; ++i) {
          if (l[i] < -1e-10) return false;
          a(i, j) = std::abs(l[i]) < 1e-14 ? 0.0 : l[i];
        }
      }
      n.parent[t] = c;
      n.bary[t] = a;
      return true;
    };
    bool found = same && candidate(t);
    for (int c = 0; c < coarse.num_tets() && !found; ++c) found = candidate(c);
    if (!found) throw Error(ErrorCode::non_nested, "fine tet " + std::to_string(t) + " lies in no coarse tet");
  }
  return n;
}

BaryVec restrict_to_child(const BaryVec& field, const Eigen::Matrix4d& bary) {
  return {field[0].substitute(bary), field[1].substitute(bary), field[2].substitute(bary)};
}

Eigen::SparseMatrix<double> embedding(const SpaceHandle& coarse, const SpaceHandle& rich) {
  if (coarse.level() != rich.level()) throw Error(ErrorCode::non_nested, "embedding needs equal levels");
  if (rich.degree() < coarse.degree()) throw Error(ErrorCode::non_nested, "rich space has lower degree");
  if (coarse.bc() == Boundary::homogeneous && rich.bc() != Boundary::homogeneous && coarse.level() < 3)
    throw Error(ErrorCode::non_nested, "boundary conditions do not nest");
  const Nesting nest = find_nesting(coarse.mesh(), rich.mesh());
  std::vector<Eigen::Triplet<double>> t;
  for (int f = 0; f < rich.mesh().num_tets(); ++f) {
    const int c = nest.parent[f];
    const auto rows = rich.dof_map(f), cols = coarse.dof_map(c);
    for (int j = 0; j < coarse.local_dim(); ++j) {
      const BaryVec child = restrict_to_child(coarse.basis(c)[j], nest.bary[f]);
      const Eigen::VectorXd v = apply_dofs(rich.level(), rich.degree(), rich.geometry(f), child);
      for (int i = 0; i < rich.local_dim(); ++i) t.emplace_back(rows[i], cols[j], std::abs(v[i]) < 1e-13 ? 0.0 : v[i]);
    }
  }
  std::stable_sort(t.begin(), t.end(), [](const auto& a, const auto& b) {
    return a.row() != b.row() ? a.row() < b.row() : a.col() < b.col();
  });
  std::vector<Eigen::Triplet<double>> unique;
  for (const auto& x : t) {
    if (!unique.empty() && unique.back().row() == x.row() && unique.back().col() == x.col()) {
      if (std::abs(unique.back().value() - x.value()) > 1e-8 * (1.0 + std::abs(x.value())))
        throw Error(ErrorCode::non_nested, "coarse space is not contained in the rich space");
      continue;
    }
    unique.push_back(x);
  }
  Eigen::SparseMatrix<double> e(rich.global_dim(), coarse.global_dim());
  e.setFromTriplets(unique.begin(), unique.end());
  e.prune(0.0);
  return e;
}

Eigen::SparseMatrix<double> free_block(const Eigen::SparseMatrix<double>& a, const SpaceHandle& rows,
                                       const SpaceHandle& cols) {
  std::vector<Eigen::Triplet<double>> t;
  for (int k = 0; k < a.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(a, k); it; ++it) {
      const int r = rows.free_index(static_cast<int>(it.row()));
      const int c = cols.free_index(static_cast<int>(it.col()));
      if (r >= 0 && c >= 0) t.emplace_back(r, c, it.value());
    }
  Eigen::SparseMatrix<double> out(rows.free_dim(), cols.free_dim());
  out.setFromTriplets(t.begin(), t.end());
  return out;
}

}  // namespace derham
