#ifndef HOPBOUND_H
#define HOPBOUND_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  HB_STATUS_OK = 0,
  HB_STATUS_NULL_ARGUMENT = 1,
  HB_STATUS_INVALID_ARGUMENT = 2,
  HB_STATUS_PARSE = 3,
  HB_STATUS_IO = 4,
  HB_STATUS_CAPACITY = 5,
  HB_STATUS_REPLAY_INVALIDATED = 6,
  HB_STATUS_LOGIC = 7,
  HB_STATUS_PANIC = 8,
} HbStatus;

typedef enum {
  HB_STRATEGY_HOST_MEDIATED = 0,
  HB_STRATEGY_DEVICE_PILOT = 1,
  HB_STRATEGY_REPLAY = 2,
} HbStrategy;

/**
 * Opaque execution envelope.
 */
typedef struct HbEnvelope HbEnvelope;

/**
 * Opaque CSR graph.
 */
typedef struct HbGraph HbGraph;

/**
 * Per-iteration simulated cost. `gpu_execution_fraction` is negative when
 * the strategy is profile-opaque.
 */
typedef struct {
  double end_to_end;
  double gpu_time;
  double host_time;
  double gpu_execution_fraction;
  uint64_t launches;
  uint64_t syncs;
} HbExecMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next call on the same thread.
 */
const char *hb_last_error(void);

/**
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void hb_string_free(char *s);

/**
 * Chung-Lu power-law graph with `num_edges` directed edge slots.
 *
 * # Safety
 * `out` must be writable.
 */
HbStatus hb_graph_power_law(size_t num_vertices,
                            uint64_t num_edges,
                            double exponent,
                            uint64_t seed,
                            HbGraph **out);

/**
 * Graph from a JSON generator spec.
 *
 * # Safety
 * `spec_json` must be a NUL-terminated string and `out` writable.
 */
HbStatus hb_graph_generate(const char *spec_json, uint64_t seed, HbGraph **out);

/**
 * Loads a whitespace edge list (`symmetric` adds reverse edges) or, when
 * `binary` is set, the CSR binary format.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` writable.
 */
HbStatus hb_graph_load(const char *path, bool binary, bool symmetric, HbGraph **out);

/**
 * # Safety
 * `g` must be null or a live handle from this library.
 */
void hb_graph_free(HbGraph *g);

/**
 * # Safety
 * `g` must be a live handle.
 */
size_t hb_graph_num_vertices(const HbGraph *g);

/**
 * # Safety
 * `g` must be a live handle.
 */
size_t hb_graph_num_edges(const HbGraph *g);

/**
 * Samples iteration `iteration` and writes the cumulative unique-vertex
 * count and the edge count of each hop into the `hops`-long output arrays.
 *
 * # Safety
 * `fanouts` must hold `hops` values; both outputs must hold `hops` slots.
 */
HbStatus hb_sample_metadata(const HbGraph *g,
                            size_t batch_size,
                            const size_t *fanouts,
                            size_t hops,
                            uint64_t seed,
                            uint64_t iteration,
                            size_t *vertex_counts,
                            size_t *edge_counts);

/**
 * Standard normal quantile.
 *
 * # Safety
 * `out` must be writable.
 */
HbStatus hb_normal_quantile(double q, double *out);

/**
 * Quantile holding jointly over `m` repetitions at confidence `p`.
 *
 * # Safety
 * `out` must be writable.
 */
HbStatus hb_repetition_quantile(double p, uint64_t m, double *out);

/**
 * # Safety
 * `g` must be a live handle, `fanouts` must hold `hops` values and `out`
 * must be writable.
 */
HbStatus hb_envelope_compute(const HbGraph *g,
                             size_t batch_size,
                             const size_t *fanouts,
                             size_t hops,
                             double confidence,
                             uint64_t repetitions,
                             double safety_factor,
                             HbEnvelope **out);

/**
 * # Safety
 * `e` must be null or a live handle from this library.
 */
void hb_envelope_free(HbEnvelope *e);

/**
 * # Safety
 * `e` must be a live handle.
 */
size_t hb_envelope_hops(const HbEnvelope *e);

/**
 * Vertex and edge bounds of 1-based hop `hop`.
 *
 * # Safety
 * `e` must be a live handle; both outputs writable.
 */
HbStatus hb_envelope_bounds(const HbEnvelope *e, size_t hop, size_t *v_max, size_t *e_max);

/**
 * Envelope as JSON; free with [`hb_string_free`]. Null on failure.
 *
 * # Safety
 * `e` must be a live handle.
 */
char *hb_envelope_to_json(const HbEnvelope *e);

/**
 * Sets `overflow` when any hop's counts exceed the envelope.
 *
 * # Safety
 * `e` must be a live handle; the count arrays hold `hops` values.
 */
HbStatus hb_envelope_overflows(const HbEnvelope *e,
                               const size_t *vertex_counts,
                               const size_t *edge_counts,
                               size_t hops,
                               bool *overflow);

/**
 * Simulates one iteration under the default calibration. `e` may be null
 * except for [`HbStrategy::Replay`].
 *
 * # Safety
 * `fanouts` and the count arrays hold `hops` values; `e` is null or live;
 * `out` writable.
 */
HbStatus hb_simulate_iteration(HbStrategy strategy,
                               size_t batch_size,
                               const size_t *fanouts,
                               size_t hops,
                               size_t layers,
                               size_t feature_dim,
                               const size_t *vertex_counts,
                               const size_t *edge_counts,
                               const HbEnvelope *e,
                               HbExecMetrics *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HOPBOUND_H */
