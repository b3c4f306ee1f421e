#include "derham_c.h"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <new>
#include <string>

#include "derham/derham.hpp"
#include "derham/equilibration.hpp"
#include "derham/poincare.hpp"
#include "derham/transfer.hpp"

#ifndef DERHAM_VERSION
#define DERHAM_VERSION "0.0.0"
#endif

struct dp_mesh {
  std::shared_ptr<const derham::Mesh> mesh;
};

namespace {

using namespace derham;

thread_local std::string last_error;

dp_status to_status(ErrorCode c) {
  switch (c) {
    case ErrorCode::invalid_argument: return DP_ERR_INVALID_ARGUMENT;
    case ErrorCode::degenerate_element: return DP_ERR_DEGENERATE_ELEMENT;
    case ErrorCode::non_manifold: return DP_ERR_NON_MANIFOLD;
    case ErrorCode::duplicate_element: return DP_ERR_DUPLICATE_ELEMENT;
    case ErrorCode::io: return DP_ERR_IO;
    case ErrorCode::parse: return DP_ERR_PARSE;
    case ErrorCode::cap_exceeded: return DP_ERR_CAP_EXCEEDED;
    case ErrorCode::incompatible_constraint: return DP_ERR_INCOMPATIBLE_CONSTRAINT;
    case ErrorCode::empty_space: return DP_ERR_EMPTY_SPACE;
    case ErrorCode::trivial_range: return DP_ERR_TRIVIAL_RANGE;
    case ErrorCode::non_nested: return DP_ERR_NON_NESTED;
    case ErrorCode::connectivity_mismatch: return DP_ERR_CONNECTIVITY_MISMATCH;
    case ErrorCode::not_spd: return DP_ERR_NOT_SPD;
    case ErrorCode::compatibility_violation: return DP_ERR_COMPATIBILITY_VIOLATION;
    case ErrorCode::numerical: return DP_ERR_NUMERICAL;
  }
  return DP_ERR_INTERNAL;
}

template <class F>
dp_status guard(F&& f) {
  try {
    f();
    last_error.clear();
    return DP_OK;
  } catch (const Error& e) {
    last_error = e.what();
    return to_status(e.code());
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
    return DP_ERR_INTERNAL;
  } catch (const std::exception& e) {
    last_error = e.what();
    return DP_ERR_INTERNAL;
  }
}

void require(bool ok, const char* what) {
  if (!ok) throw Error(ErrorCode::invalid_argument, what);
}

Boundary to_bc(dp_bc bc) {
  require(bc == DP_BC_NONE || bc == DP_BC_HOMOGENEOUS, "unknown boundary condition");
  return bc == DP_BC_NONE ? Boundary::none : Boundary::homogeneous;
}

Mesh generate_from(const std::string& token) {
  int n = 0, used = 0;
  double aspect = 0.0;
  const char* s = token.c_str();
  if (token == "reftet") return generate::reference_tet();
  if (std::sscanf(s, "cube%d%n", &n, &used) == 1 && used == static_cast<int>(token.size())) {
    require(n >= 1, "cube needs n >= 1");
    return generate::cube_freudenthal(n);
  }
  if (std::sscanf(s, "star%d%n", &n, &used) == 1 && used == static_cast<int>(token.size()))
    return generate::vertex_star_synthetic(n);
  if (std::sscanf(s, "stretched%d:%lf%n", &n, &aspect, &used) == 2 && used == static_cast<int>(token.size())) {
    require(n >= 1 && aspect > 0.0, "stretched needs n >= 1 and aspect > 0");
    return generate::stretched_cube(n, aspect);
  }
  throw Error(ErrorCode::invalid_argument, "unknown mesh token '" + token + "'");
}

dp_mesh* wrap(Mesh m) { return new dp_mesh{std::make_shared<const Mesh>(std::move(m))}; }

void fill(dp_constant_report* out, const ConstantReport& r) {
  out->l = r.level;
  out->p = r.degree;
  out->bc = r.bc == Boundary::none ? DP_BC_NONE : DP_BC_HOMOGENEOUS;
  out->h_omega = r.h_omega;
  out->lambda_min_pos = r.lambda_min_pos;
  out->constant = r.constant;
  out->kernel_dim = r.kernel_dim;
  out->dim = r.dim;
  out->infsup = r.infsup;
  out->potential_norm = r.potential_norm;
  out->stability = r.stability;
  out->seed = r.seed;
}

void reset(dp_projection_report* out, int level) {
  *out = dp_projection_report{};
  out->level = level;
  out->bound = kNaN;
}

void accumulate(dp_projection_report* out, const EquilibrationResult& r) {
  out->samples += 1;
  out->commuting_residual = std::max(out->commuting_residual, r.report.commuting_residual);
  out->projection_residual = std::max(out->projection_residual, r.report.projection_residual);
  out->stability_ratio = std::max(out->stability_ratio, r.report.stability_ratio);
  out->partition_of_unity = std::max(out->partition_of_unity, r.partition_of_unity);
  out->max_compatibility = std::max(out->max_compatibility, r.max_compatibility);
  out->conformity = std::max(out->conformity, r.conformity);
  out->divergence_partition = std::max(out->divergence_partition, r.divergence_partition);
}

}  // namespace

extern "C" {

const char* dp_version(void) { return DERHAM_VERSION; }

const char* dp_last_error(void) { return last_error.c_str(); }

const char* dp_status_name(dp_status status) {
  switch (status) {
    case DP_OK: return "ok";
    case DP_ERR_INVALID_ARGUMENT: return "invalid argument";
    case DP_ERR_DEGENERATE_ELEMENT: return "degenerate element";
    case DP_ERR_NON_MANIFOLD: return "non-manifold";
    case DP_ERR_DUPLICATE_ELEMENT: return "duplicate element";
    case DP_ERR_IO: return "io error";
    case DP_ERR_PARSE: return "parse error";
    case DP_ERR_CAP_EXCEEDED: return "dimension cap exceeded";
    case DP_ERR_INCOMPATIBLE_CONSTRAINT: return "incompatible constraint";
    case DP_ERR_EMPTY_SPACE: return "empty space";
    case DP_ERR_TRIVIAL_RANGE: return "trivial range";
    case DP_ERR_NON_NESTED: return "non-nested spaces";
    case DP_ERR_CONNECTIVITY_MISMATCH: return "connectivity mismatch";
    case DP_ERR_NOT_SPD: return "matrix not SPD";
    case DP_ERR_COMPATIBILITY_VIOLATION: return "compatibility violation";
    case DP_ERR_NUMERICAL: return "numerical failure";
    case DP_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

dp_status dp_mesh_generate(const char* token, dp_mesh** out) {
  return guard([&] {
    require(token && out, "null argument");
    *out = wrap(generate_from(token));
  });
}

dp_status dp_mesh_load(const char* path, dp_mesh** out) {
  return guard([&] {
    require(path && out, "null argument");
    *out = wrap(read_mesh_file(path));
  });
}

dp_status dp_mesh_create(const double* xyz, int nv, const int* tets, int nt, dp_mesh** out) {
  return guard([&] {
    require(xyz && tets && out && nv >= 0 && nt >= 0, "invalid mesh arrays");
    std::vector<Vec3> v(nv);
    for (int i = 0; i < nv; ++i) v[i] = Vec3(xyz[3 * i], xyz[3 * i + 1], xyz[3 * i + 2]);
    std::vector<TetVertices> t(nt);
    for (int i = 0; i < nt; ++i) t[i] = {tets[4 * i], tets[4 * i + 1], tets[4 * i + 2], tets[4 * i + 3]};
    *out = wrap(Mesh::build(std::move(v), std::move(t)));
  });
}

dp_status dp_mesh_save(const dp_mesh* mesh, const char* path) {
  return guard([&] {
    require(mesh && path, "null argument");
    write_mesh_file(path, *mesh->mesh);
  });
}

dp_status dp_mesh_scale(const dp_mesh* mesh, double s, dp_mesh** out) {
  return guard([&] {
    require(mesh && out, "null argument");
    require(s > 0.0 && std::isfinite(s), "scale factor must be positive");
    *out = wrap(mesh->mesh->scaled(s));
  });
}

void dp_mesh_free(dp_mesh* mesh) { delete mesh; }

uint64_t dp_mesh_hash(const dp_mesh* mesh) { return mesh ? content_hash(*mesh->mesh) : 0; }

dp_status dp_mesh_info_get(const dp_mesh* mesh, dp_mesh_info* info) {
  return guard([&] {
    require(mesh && info, "null argument");
    const Mesh& m = *mesh->mesh;
    const GeometryReport g = geometry(m);
    info->vertices = m.num_vertices();
    info->edges = m.num_edges();
    info->faces = m.num_faces();
    info->tets = m.num_tets();
    info->boundary_faces = 0;
    for (int f = 0; f < m.num_faces(); ++f) info->boundary_faces += m.boundary_face(f) ? 1 : 0;
    info->euler = m.euler_characteristic();
    info->h_omega = g.h_omega;
    info->rho = g.rho;
    info->h_min = g.h_min;
    info->h_max = g.h_max;
  });
}

dp_status dp_mesh_vertex_star(const dp_mesh* mesh, int v, int* ntets) {
  return guard([&] {
    require(mesh && ntets, "null argument");
    *ntets = extract_star(*mesh->mesh, StarKind::vertex, v).submesh.num_tets();
  });
}

dp_status dp_complex(const dp_mesh* mesh, int p, dp_bc bc, dp_complex_report* out) {
  return guard([&] {
    require(mesh && out, "null argument");
    const ComplexReport r = complex_report(mesh->mesh, p, to_bc(bc));
    out->p = p;
    out->bc = bc;
    for (int l = 0; l < 4; ++l) {
      out->dims[l] = r.dims[l];
      out->kernel_dims[l] = r.kernel_dims[l];
      out->cohomology[l] = r.cohomology[l];
      out->betti[l] = r.betti[l];
    }
    for (int l = 0; l < 3; ++l) out->ranks[l] = r.ranks[l];
    out->composition_residual = r.composition_residual;
  });
}

dp_status dp_export_operator(const dp_mesh* mesh, char kind, int l, int p, dp_bc bc, const char* path) {
  return guard([&] {
    require(mesh && path, "null argument");
    require(kind == 'm' || kind == 'd', "operator kind must be 'm' or 'd'");
    const SpaceHandle v = SpaceHandle::build(mesh->mesh, l, p, to_bc(bc));
    Operator op;
    if (kind == 'm') {
      op = assemble_mass(v);
    } else {
      require(l <= 2, "differential defined for levels 0..2");
      op = assemble_diff(v, SpaceHandle::build(mesh->mesh, l + 1, p, to_bc(bc)));
    }
    std::ofstream f(path);
    if (!f) throw Error(ErrorCode::io, std::string("cannot write ") + path);
    write_matrix_market(f, op);
  });
}

dp_status dp_constant(const dp_mesh* mesh, int l, int p, dp_bc bc, int cap, int cross_checks, uint64_t seed,
                      dp_constant_report* out) {
  return guard([&] {
    require(mesh && out, "null argument");
    const LevelProblem prob = LevelProblem::build(mesh->mesh, l, p, to_bc(bc), cap);
    ConstantReport r;
    if (cross_checks) {
      r = equivalence(prob, 0, seed).report;
    } else {
      r = constant(prob);
    }
    r.seed = seed;
    fill(out, r);
  });
}

dp_status dp_equivalence(const dp_mesh* mesh, int l, int p, dp_bc bc, int cap, int samples, uint64_t seed, double tol,
                         dp_equivalence_report* out) {
  return guard([&] {
    require(mesh && out, "null argument");
    require(samples >= 0, "negative sample count");
    const LevelProblem prob = LevelProblem::build(mesh->mesh, l, p, to_bc(bc), cap);
    const EquivalenceReport e = equivalence(prob, samples, seed, tol);
    fill(&out->constant, e.report);
    out->stability_sampled = e.stability_sampled;
    out->infsup_error = e.infsup_error;
    out->potential_error = e.potential_error;
    out->stability_error = e.stability_error;
    out->sampled_excess = e.sampled_excess;
    out->pass = e.pass ? 1 : 0;
  });
}

dp_status dp_project_hdiv(const dp_mesh* mesh, int p, int samples, uint64_t seed, dp_projection_report* out) {
  return guard([&] {
    require(mesh && out, "null argument");
    require(samples >= 1, "need at least one sample");
    reset(out, 2);
    const SpaceHandle rich = SpaceHandle::build(mesh->mesh, 2, p + 1, Boundary::none);
    SplitMix64 rng(seed);
    for (int s = 0; s < samples; ++s) {
      const BrokenField u = broken_from_space(rich, rng.vector(rich.global_dim()));
      accumulate(out, commuting_projection_hdiv(mesh->mesh, p, u));
    }
  });
}

dp_status dp_project_hdiv_file(const dp_mesh* mesh, int p, const char* path, dp_projection_report* out) {
  return guard([&] {
    require(mesh && path && out, "null argument");
    std::ifstream f(path);
    if (!f) throw Error(ErrorCode::io, std::string("cannot open ") + path);
    BrokenField u = read_broken_field(f);
    if (static_cast<int>(u.cells.size()) != mesh->mesh->num_tets())
      throw Error(ErrorCode::invalid_argument, "field has a different number of tets than the mesh");
    check_conformity(*mesh->mesh, u);
    reset(out, 2);
    accumulate(out, commuting_projection_hdiv(mesh->mesh, p, u));
  });
}

dp_status dp_project_min(const dp_mesh* mesh, const dp_mesh* rich_mesh, int l, int p, dp_bc bc, int rich_degree,
                         int samples, uint64_t seed, dp_projection_report* out) {
  return guard([&] {
    require(mesh && out, "null argument");
    require(l >= 1 && l <= 3, "projection level must be 1, 2 or 3");
    require(samples >= 1, "need at least one sample");
    const Boundary b = to_bc(bc);
    const MinimizingProjection proj(mesh->mesh, p, b, rich_mesh ? rich_mesh->mesh : mesh->mesh, rich_degree);
    const double c = l < 3 ? constant(LevelProblem::build(mesh->mesh, l, p, b)).constant : kNaN;
    reset(out, l);
    out->graph_norm = l < 3 ? 1 : 0;
    SplitMix64 rng(seed);
    for (int s = 0; s < samples; ++s) {
      const ProjectionReport r = proj.report(l, rng.vector(proj.rich_dim(l)), c);
      out->samples += 1;
      out->commuting_residual = std::max(out->commuting_residual, r.commuting_residual);
      out->projection_residual = std::max(out->projection_residual, r.projection_residual);
      out->stability_ratio = std::max(out->stability_ratio, r.stability_ratio);
      out->bound = r.bound;
    }
  });
}

dp_status dp_route1(const dp_mesh* mesh, const dp_mesh* oracle_mesh, int l, int p, dp_bc bc, int oracle_degree,
                    int samples, uint64_t seed, dp_route1_report* out) {
  return guard([&] {
    require(mesh && out, "null argument");
    const OracleSpec o{oracle_mesh ? oracle_mesh->mesh : mesh->mesh, oracle_degree, "oracle"};
    const Route1Report r = route1_min_ratio(mesh->mesh, l, p, to_bc(bc), {o}, samples, seed);
    out->samples = static_cast<int>(r.ratios[0].size());
    out->min_ratio = r.min_ratio[0];
    out->max_ratio = r.max_ratio[0];
    out->nested = r.all_nested ? 1 : 0;
  });
}

dp_status dp_route3(const dp_mesh* mesh, const dp_mesh* reference, int p, dp_bc bc, uint64_t seed,
                    dp_route3_report* out) {
  return guard([&] {
    require(mesh && out, "null argument");
    const Route3Report r = route3_transport(mesh->mesh, p, to_bc(bc), reference ? reference->mesh : nullptr, seed);
    out->h_omega = r.h_omega;
    out->h_ref = r.h_ref;
    for (int l = 0; l < 4; ++l) {
      out->norm[l] = r.norm[l];
      out->inverse_norm[l] = r.inverse_norm[l];
      out->conformity[l] = r.conformity[l];
    }
    for (int l = 0; l < 3; ++l) out->commuting[l] = r.commuting[l];
    for (int k = 0; k < 2; ++k) {
      out->constant_direct[k] = r.constant_direct[k];
      out->constant_reference[k] = r.constant_reference[k];
      out->transported_bound[k] = r.transported_bound[k];
    }
    out->bound_holds = r.bound_holds ? 1 : 0;
  });
}

}  // extern "C"
