#ifndef LTGCD_H
#define LTGCD_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum LtgcdStatus {
  LTGCD_STATUS_OK = 0,
  LTGCD_STATUS_NULL_POINTER = 1,
  LTGCD_STATUS_INVALID_ARGUMENT = 2,
  LTGCD_STATUS_NOT_FOUND = 3,
  LTGCD_STATUS_IO = 4,
  LTGCD_STATUS_PARSE = 5,
  LTGCD_STATUS_NUMERICAL = 6,
  LTGCD_STATUS_PANIC = 7,
} LtgcdStatus;

/**
 * Opaque dataset handle.
 */
typedef struct LtgcdDataset LtgcdDataset;

/**
 * Opaque handle to a finished training run.
 */
typedef struct LtgcdRun LtgcdRun;

typedef struct LtgcdHyperparams {
  double tau;
  double tau_p;
  double lambda;
  double alpha;
  double beta;
  double mu;
  double lr0;
  double momentum;
  double weight_decay;
  uint64_t epochs;
  uint64_t batch_size;
  uint64_t seed;
} LtgcdHyperparams;

typedef struct LtgcdSplit {
  uint64_t num_classes;
  uint64_t num_known;
  uint64_t samples_per_known;
  double rho;
  double labeled_fraction;
  uint64_t dim;
  /**
   * Radius of the sphere holding the class means.
   */
  double sep;
} LtgcdSplit;

/**
 * Accuracies in `[0, 1]`. A `has_*` flag of 0 marks the metric absent.
 */
typedef struct LtgcdMetrics {
  double all;
  double known;
  double un1;
  double un2;
  int32_t has_known;
  int32_t has_un1;
  int32_t has_un2;
  uint64_t n_all;
  uint64_t n_known;
  uint64_t n_novel;
} LtgcdMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. Valid until the
 * next failing call on the same thread.
 */
const char *ltgcd_last_error(void);

/**
 * Static name of a status code.
 */
const char *ltgcd_status_str(enum LtgcdStatus status);

enum LtgcdStatus ltgcd_hyperparams_default(struct LtgcdHyperparams *out);

enum LtgcdStatus ltgcd_split_default(struct LtgcdSplit *out);

/**
 * Synthetic long-tailed mixture drawn from `seed`'s split stream.
 */
enum LtgcdStatus ltgcd_dataset_generate(const struct LtgcdSplit *split,
                                        uint64_t seed,
                                        struct LtgcdDataset **out);

/**
 * Loads a dataset from its JSON manifest.
 */
enum LtgcdStatus ltgcd_dataset_load(const char *manifest, struct LtgcdDataset **out);

/**
 * Writes `<dir>/<stem>.csv` and `<dir>/<stem>.json`.
 */
enum LtgcdStatus ltgcd_dataset_write(const struct LtgcdDataset *data,
                                     const char *dir,
                                     const char *stem);

/**
 * Row count; 0 for NULL.
 */
size_t ltgcd_dataset_len(const struct LtgcdDataset *data);

size_t ltgcd_dataset_dim(const struct LtgcdDataset *data);

size_t ltgcd_dataset_num_classes(const struct LtgcdDataset *data);

void ltgcd_dataset_free(struct LtgcdDataset *data);

/**
 * Trains with default model settings and evaluates. An aborted run is
 * returned as `LTGCD_STATUS_NUMERICAL` with no handle.
 */
enum LtgcdStatus ltgcd_train(const struct LtgcdDataset *data,
                             const struct LtgcdHyperparams *hp,
                             struct LtgcdRun **out);

enum LtgcdStatus ltgcd_run_metrics(const struct LtgcdRun *run, struct LtgcdMetrics *out);

/**
 * Number of epochs in the run's training log; 0 for NULL.
 */
size_t ltgcd_run_epochs(const struct LtgcdRun *run);

/**
 * Copies the final class prior (model slot order) into `out[0..len]`.
 * `len` must equal the number of classes.
 */
enum LtgcdStatus ltgcd_run_prior(const struct LtgcdRun *run, double *out, size_t len);

enum LtgcdStatus ltgcd_run_save_checkpoint(const struct LtgcdRun *run, const char *path);

void ltgcd_run_free(struct LtgcdRun *run);

/**
 * Loads a checkpoint and evaluates it on `data`.
 */
enum LtgcdStatus ltgcd_evaluate_checkpoint(const char *path,
                                           const struct LtgcdDataset *data,
                                           uint64_t seed,
                                           struct LtgcdMetrics *out);

/**
 * Minimum-cost assignment on a row-major `n x n` matrix. Writes the column
 * of each row into `perm_out[0..n]` and the total into `cost_out`.
 */
enum LtgcdStatus ltgcd_hungarian(const double *cost, size_t n, size_t *perm_out, double *cost_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LTGCD_H */
