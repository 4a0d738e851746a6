#ifndef ELECTROPERM_H
#define ELECTROPERM_H

/* Generated by cbindgen from electroperm-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Operation status. Values match the command-line exit codes.
 */
typedef enum EpStatus {
  EP_STATUS_OK = 0,
  EP_STATUS_GEOMETRY = 2,
  EP_STATUS_SOLVER = 3,
  EP_STATUS_NUMERICS = 4,
  EP_STATUS_DATA = 5,
  EP_STATUS_USAGE = 64,
} EpStatus;

/**
 * Run configuration handle.
 */
typedef struct EpConfig EpConfig;

/**
 * Mesh handle.
 */
typedef struct EpMesh EpMesh;

/**
 * Factorized saddle-point system handle.
 */
typedef struct EpSystem EpSystem;

/**
 * Completed-trajectory handle.
 */
typedef struct EpTrajectory EpTrajectory;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copy the last error message for this thread into `buf` (NUL-terminated,
 * truncated to `cap`). Returns the full message length in bytes.
 */
size_t ep_last_error_message(char *buf, size_t cap);

/**
 * Create a configuration with the built-in defaults.
 */
enum EpStatus ep_config_default(struct EpConfig **out);

/**
 * Load a configuration file.
 */
enum EpStatus ep_config_load(const char *path, struct EpConfig **out);

/**
 * Override one `section.key` with a textual value.
 */
enum EpStatus ep_config_set(struct EpConfig *config, const char *key, const char *value);

void ep_config_free(struct EpConfig *config);

/**
 * Generate the boundary-fitted mesh described by the configuration.
 */
enum EpStatus ep_mesh_generate(const struct EpConfig *config, struct EpMesh **out);

/**
 * Import and validate a mesh file.
 */
enum EpStatus ep_mesh_import(const char *path, struct EpMesh **out);

/**
 * Write a mesh in the plain-text format.
 */
enum EpStatus ep_mesh_write(const struct EpMesh *mesh, const char *path);

size_t ep_mesh_vertex_count(const struct EpMesh *mesh);

size_t ep_mesh_triangle_count(const struct EpMesh *mesh);

size_t ep_mesh_interface_node_count(const struct EpMesh *mesh);

/**
 * Total length of the interface polygon.
 */
double ep_mesh_interface_measure(const struct EpMesh *mesh);

void ep_mesh_free(struct EpMesh *mesh);

/**
 * Assemble and factorize the saddle-point system for the configured physics
 * on the given mesh.
 */
enum EpStatus ep_system_assemble(const struct EpConfig *config,
                                 const struct EpMesh *mesh,
                                 struct EpSystem **out);

/**
 * Solve the transmission problem for a prescribed jump (length
 * `ep_mesh_interface_node_count`, trace ordering) and field strength `g`,
 * writing the membrane current into `i_m_out` (same length).
 */
enum EpStatus ep_system_solve_potential(const struct EpSystem *system,
                                        const double *v,
                                        size_t len,
                                        double g,
                                        double *i_m_out);

void ep_system_free(struct EpSystem *system);

/**
 * Run one trajectory of the configured model. The mesh and system must come
 * from the same configuration.
 */
enum EpStatus ep_trajectory_run(const struct EpConfig *config,
                                const struct EpMesh *mesh,
                                const struct EpSystem *system,
                                uint32_t trajectory_id,
                                struct EpTrajectory **out);

/**
 * Number of recorded steps (including the initial state).
 */
size_t ep_trajectory_len(const struct EpTrajectory *trajectory);

const double *ep_trajectory_times(const struct EpTrajectory *trajectory);

/**
 * Squared interface norm of the jump per step.
 */
const double *ep_trajectory_norm_v_sq(const struct EpTrajectory *trajectory);

/**
 * Squared interface norm of the porosity per step.
 */
const double *ep_trajectory_norm_w_sq(const struct EpTrajectory *trajectory);

/**
 * Number of recorded angles.
 */
size_t ep_trajectory_angle_count(const struct EpTrajectory *trajectory);

/**
 * Jump series at one recorded angle; `ep_trajectory_len` entries.
 */
const double *ep_trajectory_v_at(const struct EpTrajectory *trajectory, size_t angle_index);

/**
 * Porosity series at one recorded angle; `ep_trajectory_len` entries.
 */
const double *ep_trajectory_w_at(const struct EpTrajectory *trajectory, size_t angle_index);

void ep_trajectory_free(struct EpTrajectory *trajectory);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ELECTROPERM_H */
