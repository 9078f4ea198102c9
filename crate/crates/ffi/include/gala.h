#ifndef GALA_H
#define GALA_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every exported function.
 */
typedef enum GalaStatus {
  GALA_STATUS_OK = 0,
  GALA_STATUS_NULL_POINTER = 1,
  GALA_STATUS_INVALID_UTF8 = 2,
  GALA_STATUS_ARGUMENT = 3,
  GALA_STATUS_CONTRACT = 4,
  GALA_STATUS_SHAPE = 5,
  GALA_STATUS_MODEL = 6,
  GALA_STATUS_CONFIG = 7,
  GALA_STATUS_FORMAT = 8,
  GALA_STATUS_IO = 9,
  GALA_STATUS_INTEGRITY = 10,
  GALA_STATUS_DEGENERATE_INPUT = 11,
  GALA_STATUS_BUFFER_TOO_SMALL = 12,
  GALA_STATUS_PANIC = 13,
} GalaStatus;

/**
 * A trained graph classifier.
 */
typedef struct GalaClassifier GalaClassifier;

/**
 * Experiment configuration.
 */
typedef struct GalaConfig GalaConfig;

/**
 * An undirected graph with node attributes and an optional label.
 */
typedef struct GalaGraph GalaGraph;

/**
 * A trained score network.
 */
typedef struct GalaScoreNet GalaScoreNet;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. Owned by the
 * library; valid until the next call on the same thread.
 */
const char *gala_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *gala_version(void);

/**
 * Default configuration.
 *
 * # Safety
 * `out` must be a valid pointer to a handle slot.
 */
enum GalaStatus gala_config_new(struct GalaConfig **out);

/**
 * Reads a key=value config file.
 *
 * # Safety
 * `path` must be NUL-terminated; `out` must be a valid handle slot.
 */
enum GalaStatus gala_config_load(const char *path, struct GalaConfig **out);

/**
 * Sets one key, e.g. `adapt.epochs` to `20`.
 *
 * # Safety
 * `cfg` must come from `gala_config_new`/`_load`; strings NUL-terminated.
 */
enum GalaStatus gala_config_set(struct GalaConfig *cfg, const char *key, const char *value);

/**
 * # Safety
 * `cfg` must come from this library or be NULL; it is invalid afterwards.
 */
void gala_config_free(struct GalaConfig *cfg);

/**
 * Builds a graph from `num_edges` pairs in `edges` (length `2*num_edges`)
 * and a row-major `node_count x attr_dim` attribute block. `label < 0`
 * means unlabeled.
 *
 * # Safety
 * The arrays must hold the stated number of elements (they may be NULL when
 * that number is zero); `out` must be a valid handle slot.
 */
enum GalaStatus gala_graph_new(size_t node_count,
                               const size_t *edges,
                               size_t num_edges,
                               const double *attributes,
                               size_t attr_dim,
                               int64_t label,
                               struct GalaGraph **out);

/**
 * Writes node count, edge count and attribute width.
 *
 * # Safety
 * `g` must be a live graph handle; the outputs valid pointers.
 */
enum GalaStatus gala_graph_shape(const struct GalaGraph *g,
                                 size_t *node_count,
                                 size_t *edge_count,
                                 size_t *attr_dim);

/**
 * Copies the edge list as `2*edge_count` node ids into `buf` of `capacity`
 * elements.
 *
 * # Safety
 * `buf` must hold `capacity` elements.
 */
enum GalaStatus gala_graph_edges(const struct GalaGraph *g, size_t *buf, size_t capacity);

/**
 * Edge density `2|E| / (n(n-1))`.
 *
 * # Safety
 * `g` must be a live graph handle; `density` a valid pointer.
 */
enum GalaStatus gala_graph_density(const struct GalaGraph *g, double *density);

/**
 * # Safety
 * `g` must come from this library or be NULL; it is invalid afterwards.
 */
void gala_graph_free(struct GalaGraph *g);

/**
 * Loads a classifier checkpoint.
 *
 * # Safety
 * `path` must be NUL-terminated; `out` a valid handle slot.
 */
enum GalaStatus gala_classifier_load(const char *path, struct GalaClassifier **out);

/**
 * Number of classes the classifier predicts.
 *
 * # Safety
 * `m` must be a live classifier handle; `n` a valid pointer.
 */
enum GalaStatus gala_classifier_num_classes(const struct GalaClassifier *m, size_t *n);

/**
 * Class probabilities of `g` into `probs` (`capacity` >= number of classes).
 *
 * # Safety
 * Handles must be live; `probs` must hold `capacity` elements.
 */
enum GalaStatus gala_classifier_predict(const struct GalaClassifier *m,
                                        const struct GalaGraph *g,
                                        double *probs,
                                        size_t capacity);

/**
 * # Safety
 * `m` must come from this library or be NULL; it is invalid afterwards.
 */
void gala_classifier_free(struct GalaClassifier *m);

/**
 * Loads a score network checkpoint.
 *
 * # Safety
 * `path` must be NUL-terminated; `out` a valid handle slot.
 */
enum GalaStatus gala_score_net_load(const char *path, struct GalaScoreNet **out);

/**
 * Reconstructs `g` under the score network: noise to `t_recon`, then
 * `steps` reverse steps. Deterministic in `seed`.
 *
 * # Safety
 * Handles must be live; `out` a valid handle slot.
 */
enum GalaStatus gala_reconstruct(const struct GalaScoreNet *net,
                                 const struct GalaGraph *g,
                                 double t_recon,
                                 size_t steps,
                                 uint64_t seed,
                                 struct GalaGraph **out);

/**
 * # Safety
 * `net` must come from this library or be NULL; it is invalid afterwards.
 */
void gala_score_net_free(struct GalaScoreNet *net);

/**
 * Runs the full pipeline for every configured seed, writes the run files
 * to the configured output directory, and reports mean accuracies.
 *
 * # Safety
 * `cfg` must be a live config handle; outputs valid pointers or NULL.
 */
enum GalaStatus gala_run_adaptation(const struct GalaConfig *cfg,
                                    double *source_only_mean,
                                    double *adapted_mean);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GALA_H */
