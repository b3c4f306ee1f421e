/* C interface of the derham library.
 *
 * All functions return a dp_status; on failure dp_last_error() holds a message
 * for the calling thread. Meshes are opaque handles released with dp_mesh_free.
 */
#ifndef DERHAM_C_H
#define DERHAM_C_H

#include <stdint.h>

#if defined(_WIN32)
#define DP_API __declspec(dllexport)
#elif defined(DERHAM_BUILDING_LIBRARY)
#define DP_API __attribute__((visibility("default")))
#else
#define DP_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum dp_status {
  DP_OK = 0,
  DP_ERR_INVALID_ARGUMENT,
  DP_ERR_DEGENERATE_ELEMENT,
  DP_ERR_NON_MANIFOLD,
  DP_ERR_DUPLICATE_ELEMENT,
  DP_ERR_IO,
  DP_ERR_PARSE,
  DP_ERR_CAP_EXCEEDED,
  DP_ERR_INCOMPATIBLE_CONSTRAINT,
  DP_ERR_EMPTY_SPACE,
  DP_ERR_TRIVIAL_RANGE,
  DP_ERR_NON_NESTED,
  DP_ERR_CONNECTIVITY_MISMATCH,
  DP_ERR_NOT_SPD,
  DP_ERR_COMPATIBILITY_VIOLATION,
  DP_ERR_NUMERICAL,
  DP_ERR_INTERNAL
} dp_status;

typedef enum dp_bc { DP_BC_NONE = 0, DP_BC_HOMOGENEOUS = 1 } dp_bc;

typedef struct dp_mesh dp_mesh;

DP_API const char* dp_version(void);
DP_API const char* dp_last_error(void);
DP_API const char* dp_status_name(dp_status status);

/* Generator tokens: "reftet", "cube<n>", "star<k>", "stretched<n>:<aspect>". */
DP_API dp_status dp_mesh_generate(const char* token, dp_mesh** out);
DP_API dp_status dp_mesh_load(const char* path, dp_mesh** out);
/* Builds a mesh from raw arrays (tets may be unsorted). */
DP_API dp_status dp_mesh_create(const double* xyz, int nv, const int* tets, int nt, dp_mesh** out);
DP_API dp_status dp_mesh_save(const dp_mesh* mesh, const char* path);
DP_API dp_status dp_mesh_scale(const dp_mesh* mesh, double s, dp_mesh** out);
DP_API void dp_mesh_free(dp_mesh* mesh);
DP_API uint64_t dp_mesh_hash(const dp_mesh* mesh);

typedef struct dp_mesh_info {
  int vertices, edges, faces, tets;
  int boundary_faces;
  int euler;
  double h_omega, rho, h_min, h_max;
} dp_mesh_info;

DP_API dp_status dp_mesh_info_get(const dp_mesh* mesh, dp_mesh_info* info);
/* Number of tets in the vertex star of v. */
DP_API dp_status dp_mesh_vertex_star(const dp_mesh* mesh, int v, int* ntets);

typedef struct dp_complex_report {
  int p, bc;
  int dims[4], ranks[3], kernel_dims[4], cohomology[4], betti[4];
  double composition_residual;
} dp_complex_report;

DP_API dp_status dp_complex(const dp_mesh* mesh, int p, dp_bc bc, dp_complex_report* out);

/* Writes mass (kind 'm', levels 0..3) or differential (kind 'd', levels 0..2) as MatrixMarket. */
DP_API dp_status dp_export_operator(const dp_mesh* mesh, char kind, int l, int p, dp_bc bc, const char* path);

typedef struct dp_constant_report {
  int l, p, bc;
  double h_omega, lambda_min_pos, constant;
  int kernel_dim, dim;
  double infsup, potential_norm, stability; /* NaN unless cross-checks were requested */
  uint64_t seed;
} dp_constant_report;

/* cap <= 0 disables the dimension cap. */
DP_API dp_status dp_constant(const dp_mesh* mesh, int l, int p, dp_bc bc, int cap, int cross_checks, uint64_t seed,
                             dp_constant_report* out);

typedef struct dp_equivalence_report {
  dp_constant_report constant;
  double stability_sampled;
  double infsup_error, potential_error, stability_error, sampled_excess;
  int pass;
} dp_equivalence_report;

DP_API dp_status dp_equivalence(const dp_mesh* mesh, int l, int p, dp_bc bc, int cap, int samples, uint64_t seed,
                                double tol, dp_equivalence_report* out);

typedef struct dp_projection_report {
  int level;
  int samples;
  int graph_norm; /* 1: ratio in the graph norm, 0: L2 */
  double commuting_residual, projection_residual; /* worst over samples */
  double stability_ratio;                         /* largest over samples */
  double bound;                                   /* NaN if none */
  double partition_of_unity, max_compatibility, conformity, divergence_partition; /* H(div) equilibration only */
} dp_projection_report;

/* Flux equilibration on seeded random conforming inputs of degree p+1. */
DP_API dp_status dp_project_hdiv(const dp_mesh* mesh, int p, int samples, uint64_t seed, dp_projection_report* out);
/* Flux equilibration of a field read from the broken-field text format. */
DP_API dp_status dp_project_hdiv_file(const dp_mesh* mesh, int p, const char* path, dp_projection_report* out);
/* Minimizing projection at level l (1..3) of random fields of a rich space: same mesh with degree
 * rich_degree, or rich_mesh (nested refinement, may be NULL) with that degree. */
DP_API dp_status dp_project_min(const dp_mesh* mesh, const dp_mesh* rich_mesh, int l, int p, dp_bc bc, int rich_degree,
                                int samples, uint64_t seed, dp_projection_report* out);

typedef struct dp_route1_report {
  int samples;
  double min_ratio, max_ratio;
  int nested;
} dp_route1_report;

DP_API dp_status dp_route1(const dp_mesh* mesh, const dp_mesh* oracle_mesh, int l, int p, dp_bc bc, int oracle_degree,
                           int samples, uint64_t seed, dp_route1_report* out);

typedef struct dp_route3_report {
  double h_omega, h_ref;
  double norm[4], inverse_norm[4];
  double commuting[3];
  double conformity[4];
  double constant_direct[2], constant_reference[2], transported_bound[2]; /* l = 1, 2 */
  int bound_holds;
} dp_route3_report;

/* reference may be NULL: the mesh recentered and scaled by 1/h_omega. */
DP_API dp_status dp_route3(const dp_mesh* mesh, const dp_mesh* reference, int p, dp_bc bc, uint64_t seed,
                           dp_route3_report* out);

#ifdef __cplusplus
}
#endif

#endif
