#ifndef RESERVEMIX_H
#define RESERVEMIX_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

// Result of every fallible call. Values 2 to 4 match the CLI exit codes.
typedef enum RmStatus {
  RM_OK = 0,
  RM_INVALID_ARGUMENT = 1,
  RM_CONFIG = 2,
  RM_DATA = 3,
  RM_NUMERICAL = 4,
  RM_IO = 5,
  RM_PANIC = 6,
} RmStatus;

// Observation density selector for `rm_obs_loglik`.
typedef enum RmDistribution {
  RM_LAPLACE = 0,
  RM_NORMAL = 1,
  RM_CAUCHY = 2,
} RmDistribution;

// A parsed run configuration.
typedef struct RmConfig RmConfig;

// Input data aligned for one configuration.
typedef struct RmDataset RmDataset;

// Filter output plus C copies of its currency codes.
typedef struct RmSummary RmSummary;

// Library version as a static NUL-terminated string.
const char *rm_version(void);

// Message for the last failed call on this thread, or null.
//
// The pointer stays valid until the next call into this library on the same thread.
const char *rm_last_error(void);

// Parses config text; relative data paths resolve against `base_dir`.
enum RmStatus rm_config_parse(const char *text, const char *base_dir, struct RmConfig **out);

enum RmStatus rm_config_from_file(const char *path, struct RmConfig **out);

enum RmStatus rm_config_set_seed(struct RmConfig *config, uint64_t seed);

enum RmStatus rm_config_set_particles(struct RmConfig *config, size_t n);

void rm_config_free(struct RmConfig *config);

// Loads the files named by `config`.
enum RmStatus rm_dataset_load(const struct RmConfig *config, struct RmDataset **out);

void rm_dataset_free(struct RmDataset *dataset);

// Runs the filter. `threads == 0` uses every available core; results do not depend on it.
enum RmStatus rm_estimate(const struct RmConfig *config,
                          const struct RmDataset *dataset,
                          size_t threads,
                          struct RmSummary **out);

void rm_summary_free(struct RmSummary *summary);

// Rows in the summary: the prior quarter plus every filtered quarter.
size_t rm_summary_n_quarters(const struct RmSummary *summary);

size_t rm_summary_n_currencies(const struct RmSummary *summary);

size_t rm_summary_n_probs(const struct RmSummary *summary);

// Currency code `c`, valid while the summary lives; null when out of range.
const char *rm_summary_currency(const struct RmSummary *summary, size_t c);

enum RmStatus rm_summary_quarter(const struct RmSummary *summary,
                                 size_t t,
                                 int32_t *year,
                                 uint8_t *quarter);

enum RmStatus rm_summary_prob(const struct RmSummary *summary, size_t k, double *out);

// Quantile `k` of currency `c` at row `t`.
enum RmStatus rm_summary_quantile(const struct RmSummary *summary,
                                  size_t t,
                                  size_t c,
                                  size_t k,
                                  double *out);

enum RmStatus rm_summary_median(const struct RmSummary *summary, size_t t, size_t c, double *out);

// Writes the summary in the CLI's `summary.csv` layout.
enum RmStatus rm_summary_write_csv(const struct RmSummary *summary, const char *path);

// Dirichlet scale for a USD share, and whether it had to be clamped to `alpha_min`.
enum RmStatus rm_alpha_scale(double beta_usd,
                             double gamma,
                             double alpha_min,
                             double *alpha,
                             bool *clamped);

// Shares after one quarter of exchange-rate moves `fx_growth`, written to `out` (length `n`).
enum RmStatus rm_drifted_shares(const double *beta, const double *fx_growth, size_t n, double *out);

// Quarterly return on a constant-maturity zero-coupon bond.
enum RmStatus rm_zero_coupon_return(double y_start,
                                    double y_end,
                                    double maturity_years,
                                    double *out);

// Means and standard deviations of a Dirichlet with `n` parameters.
enum RmStatus rm_dirichlet_moments(const double *params, size_t n, double *mean, double *std);

// Log-density of `y` given prediction `mu` and scale `sigma`.
enum RmStatus rm_obs_loglik(double y,
                            double mu,
                            double sigma,
                            enum RmDistribution dist,
                            double *out);

#endif  /* RESERVEMIX_H */
