#ifndef BNR_H
#define BNR_H

#include <stddef.h>
#include <stdint.h>

// Simulation scheme.
typedef enum BnrScheme {
  BNR_SCHEME_SIM1 = 1,
  BNR_SCHEME_SIM2 = 2,
  BNR_SCHEME_SIM3 = 3,
} BnrScheme;

typedef enum BnrStatus {
  BNR_STATUS_OK = 0,
  BNR_STATUS_NULL_POINTER = 1,
  BNR_STATUS_INVALID_PARAMETER = 2,
  BNR_STATUS_VALIDATION = 3,
  BNR_STATUS_NUMERICAL_FAILURE = 4,
  BNR_STATUS_SWEEP_FAILURE = 5,
  BNR_STATUS_PARSE = 6,
  BNR_STATUS_IO = 7,
  BNR_STATUS_MISSING_BLOCK = 8,
  BNR_STATUS_CONFIG = 9,
  BNR_STATUS_BUFFER_TOO_SMALL = 10,
  BNR_STATUS_PANIC = 11,
} BnrStatus;

// Opaque dataset: subjects with a network and a response each.
typedef struct BnrDataset BnrDataset;

// Opaque fitted model with its posterior summary on the original scale.
typedef struct BnrFit BnrFit;

typedef struct BnrSimOptions {
  enum BnrScheme scheme;
  size_t nodes;
  size_t n;
  size_t n_pred;
  size_t r_gen;
  // Fraction of inactive nodes.
  double sparsity;
  // Fraction of zero edges among active nodes (Sim3 only).
  double edge_sparsity;
  double mu0;
  double tau2;
  uint64_t seed;
} BnrSimOptions;

typedef struct BnrFitOptions {
  size_t rank;
  size_t iterations;
  size_t burn_in;
  size_t thin;
  size_t chains;
  uint64_t seed;
  // Nonzero to center and scale edges and response.
  uint8_t standardize;
} BnrFitOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread; empty after a success.
// Valid until the next call into this library on the same thread.
const char *bnr_last_error(void);

// Library version as a static NUL-terminated string.
const char *bnr_version(void);

struct BnrSimOptions bnr_sim_options_default(void);

struct BnrFitOptions bnr_fit_options_default(void);

// Builds a dataset from `n` networks on `nodes` nodes. `upper` holds
// `n * nodes*(nodes-1)/2` weights, subject by subject, each in row-major
// upper-triangle order (1,2), (1,3), ..., (V-1,V).
enum BnrStatus bnr_dataset_new(size_t nodes,
                               size_t n,
                               const double *upper,
                               const double *y,
                               struct BnrDataset **out);

// Reads an edge list (`subject,row,col,weight`) and responses (`subject,y`).
// `nodes` of 0 infers the node count from the edge list.
enum BnrStatus bnr_dataset_load(const char *edges_path,
                                const char *responses_path,
                                size_t nodes,
                                struct BnrDataset **out);

// Simulates a training set and a held-out set. Either output may be null
// when not wanted.
enum BnrStatus bnr_dataset_simulate(const struct BnrSimOptions *options,
                                    struct BnrDataset **train,
                                    struct BnrDataset **test);

void bnr_dataset_free(struct BnrDataset *data);

// Number of subjects; 0 for a null handle.
size_t bnr_dataset_len(const struct BnrDataset *data);

// Number of nodes; 0 for a null or empty dataset.
size_t bnr_dataset_nodes(const struct BnrDataset *data);

// Copies the responses into `out` (length at least the subject count).
enum BnrStatus bnr_dataset_responses(const struct BnrDataset *data, double *out, size_t len);

// Runs the sampler. On a failed sweep no handle is returned and the
// status is `SweepFailure`.
enum BnrStatus bnr_fit(const struct BnrDataset *data,
                       const struct BnrFitOptions *options,
                       struct BnrFit **out);

void bnr_fit_free(struct BnrFit *f);

// Retained draws pooled over chains; 0 for a null handle.
size_t bnr_fit_draws(const struct BnrFit *f);

size_t bnr_fit_nodes(const struct BnrFit *f);

// Posterior probability that each node is active (`nodes` entries).
enum BnrStatus bnr_fit_node_probabilities(const struct BnrFit *f, double *out, size_t len);

// Posterior mean edge coefficients `γ` on the original scale, one per edge
// in upper-triangle order.
enum BnrStatus bnr_fit_gamma_mean(const struct BnrFit *f, double *out, size_t len);

// Posterior pmf of the effective dimensionality, entries for 0..=rank.
enum BnrStatus bnr_fit_reff_pmf(const struct BnrFit *f, double *out, size_t len);

// Posterior predictive mean and 95% interval for every subject of `data`
// on the original response scale. Each output needs the subject count.
enum BnrStatus bnr_fit_predict(const struct BnrFit *f,
                               const struct BnrDataset *data,
                               uint64_t seed,
                               double *point,
                               double *low,
                               double *high,
                               size_t len);

// Writes the chain CSV files into `dir`, creating it if needed.
enum BnrStatus bnr_fit_write_chains(const struct BnrFit *f, const char *dir);

// Joint-distribution check of the sampler at its default size. A nonzero
// `inject_fault` corrupts the τ² update. `passed` is set to 1 when every
// |z| is below the threshold.
enum BnrStatus bnr_gir_test(uint64_t seed,
                            size_t sweeps,
                            uint8_t inject_fault,
                            double *max_abs_z,
                            uint8_t *passed);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BNR_H */
