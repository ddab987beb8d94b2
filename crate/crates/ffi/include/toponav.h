#ifndef TOPONAV_H
#define TOPONAV_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

/**
 * Result of every fallible call.
 */
typedef enum ToponavStatus {
  TOPONAV_STATUS_OK = 0,
  TOPONAV_STATUS_NULL_POINTER = 1,
  TOPONAV_STATUS_INVALID_ARGUMENT = 2,
  TOPONAV_STATUS_CONFIG = 3,
  TOPONAV_STATUS_IO = 4,
  TOPONAV_STATUS_UNKNOWN_NODE = 5,
  TOPONAV_STATUS_BLOCKED_CELL = 6,
  TOPONAV_STATUS_RUNTIME = 7,
} ToponavStatus;

/**
 * Finished benchmark run.
 */
typedef struct ToponavBenchmark ToponavBenchmark;

/**
 * Growing topological map.
 */
typedef struct ToponavMap ToponavMap;

/**
 * Grid world plus the random stream its steps draw from.
 */
typedef struct ToponavWorld ToponavWorld;

/**
 * Outcome of one world step.
 */
typedef struct ToponavStep {
  int32_t x;
  int32_t y;
  bool reached_goal;
  bool hit_obstacle;
} ToponavStep;

/**
 * Eval-phase aggregate: mean and sample std across seeds.
 */
typedef struct ToponavSummary {
  uint32_t seeds;
  double success_mean;
  double success_std;
  double steps_mean;
  double trajectory_length_mean;
  double coverage_mean;
  double coverage_std;
} ToponavSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer is
 * valid until the next failing call on the same thread.
 */
const char *toponav_last_error(void);

/**
 * # Safety
 * `s` must be null or a string returned by this library and not yet freed.
 */
void toponav_string_free(char *s);

/**
 * # Safety
 * `out` must point to writable storage for one handle pointer.
 */
enum ToponavStatus toponav_map_new(double tau_sim, uintptr_t feature_dim, struct ToponavMap **out);

/**
 * # Safety
 * `map` must be null or a live handle from this library.
 */
void toponav_map_free(struct ToponavMap *map);

/**
 * # Safety
 * `map` must be a live handle or null.
 */
uintptr_t toponav_map_node_count(const struct ToponavMap *map);

/**
 * # Safety
 * `map` must be a live handle or null.
 */
uintptr_t toponav_map_edge_count(const struct ToponavMap *map);

/**
 * Matches the descriptor against existing nodes or inserts a new node.
 *
 * # Safety
 * `feature` must point to `len` readable doubles; `out_id` and
 * `out_inserted` must be writable.
 */
enum ToponavStatus toponav_map_match_or_insert(struct ToponavMap *map,
                                               const double *feature,
                                               uintptr_t len,
                                               double x,
                                               double y,
                                               uintptr_t *out_id,
                                               bool *out_inserted);

/**
 * # Safety
 * `map` must be a live handle; `out_cost` may be null.
 */
enum ToponavStatus toponav_map_add_edge(struct ToponavMap *map,
                                        uintptr_t a,
                                        uintptr_t b,
                                        double *out_cost);

/**
 * Shortest path from `a` to `b`. Writes up to `cap` node ids into
 * `out_nodes` and the full path length into `out_len`; a length of 0 means
 * no path. Returns `InvalidArgument` when `cap` is too small.
 *
 * # Safety
 * `out_nodes` must have room for `cap` ids (it may be null when `cap` is
 * 0); `out_len` must be writable; `out_cost` may be null.
 */
enum ToponavStatus toponav_map_shortest_path(const struct ToponavMap *map,
                                             uintptr_t a,
                                             uintptr_t b,
                                             uintptr_t *out_nodes,
                                             uintptr_t cap,
                                             uintptr_t *out_len,
                                             double *out_cost);

/**
 * Serializes the map; release the result with [`toponav_string_free`].
 *
 * # Safety
 * `map` must be a live handle or null.
 */
char *toponav_map_to_json(const struct ToponavMap *map);

/**
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum ToponavStatus toponav_map_from_json(const char *json,
                                         double tau_sim,
                                         uintptr_t feature_dim,
                                         struct ToponavMap **out);

/**
 * Generates scenario 1, 2 or 3 of side `size` from `seed`. Steps draw
 * from a stream derived from the same seed.
 *
 * # Safety
 * `out` must be writable.
 */
enum ToponavStatus toponav_world_new(uint8_t scenario,
                                     int32_t size,
                                     uint64_t seed,
                                     struct ToponavWorld **out);

/**
 * # Safety
 * `world` must be null or a live handle from this library.
 */
void toponav_world_free(struct ToponavWorld *world);

/**
 * Writes width, height, start and goal. Any output pointer may be null.
 *
 * # Safety
 * `world` must be a live handle.
 */
enum ToponavStatus toponav_world_info(const struct ToponavWorld *world,
                                      int32_t *width,
                                      int32_t *height,
                                      int32_t (*start)[2],
                                      int32_t (*goal)[2]);

/**
 * # Safety
 * `world` must be a live handle or null.
 */
bool toponav_world_is_free(const struct ToponavWorld *world, int32_t x, int32_t y);

/**
 * One move from (x, y). `action` is 0 = N, 1 = E, 2 = S, 3 = W.
 *
 * # Safety
 * `world` must be a live handle; `out` must be writable.
 */
enum ToponavStatus toponav_world_step(struct ToponavWorld *world,
                                      int32_t x,
                                      int32_t y,
                                      uint32_t action,
                                      struct ToponavStep *out);

/**
 * Checks a TOML configuration document without running anything.
 *
 * # Safety
 * `toml` must be a NUL-terminated string.
 */
enum ToponavStatus toponav_config_validate(const char *toml);

/**
 * Parses `toml` (null means all defaults) and runs the full benchmark.
 *
 * # Safety
 * `toml` must be null or NUL-terminated; `out` must be writable.
 */
enum ToponavStatus toponav_benchmark_run(const char *toml, struct ToponavBenchmark **out);

/**
 * # Safety
 * `bench` must be null or a live handle from this library.
 */
void toponav_benchmark_free(struct ToponavBenchmark *bench);

/**
 * # Safety
 * `bench` must be a live handle; `out` must be writable.
 */
enum ToponavStatus toponav_benchmark_summary(const struct ToponavBenchmark *bench,
                                             struct ToponavSummary *out);

/**
 * # Safety
 * `bench` must be a live handle or null.
 */
uintptr_t toponav_benchmark_record_count(const struct ToponavBenchmark *bench);

/**
 * Writes episodes.jsonl and summary.json into `dir`.
 *
 * # Safety
 * `bench` must be a live handle; `dir` must be NUL-terminated.
 */
enum ToponavStatus toponav_benchmark_export(const struct ToponavBenchmark *bench, const char *dir);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TOPONAV_H */
