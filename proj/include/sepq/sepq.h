/*
 * C API for the censored quantile mixed-effects modeling library.
 *
 * All functions return a sepq_status; SEPQ_OK is 0. On failure,
 * sepq_last_error() returns a thread-local message. Handles are opaque and
 * must be released with the matching _free function. Functions returning a
 * string through char** allocate it with malloc; release with
 * sepq_string_free. SEPQ_WARN_CONVERGENCE is a warning: the output handle /
 * files are still produced.
 *
 * Configuration is passed as JSON text; see the README for the schemas.
 */
#ifndef SEPQ_H
#define SEPQ_H

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum sepq_status {
  SEPQ_OK = 0,
  SEPQ_ERR_INVALID = 1,
  SEPQ_ERR_SCHEMA = 2,
  SEPQ_WARN_CONVERGENCE = 3,
  SEPQ_ERR_NUMERIC = 4,
  SEPQ_ERR_IO = 5
} sepq_status;

typedef struct sepq_dataset sepq_dataset;
typedef struct sepq_fit sepq_fit;

/* Thread-local message describing the most recent failure. */
const char* sepq_last_error(void);
void sepq_string_free(char* s);

/* --- datasets ------------------------------------------------------ */

/* CSV schema: subject_id,time,response,censor,bound2,cov1..covK with
 * censor in {obs,left,right,interval}. */
sepq_status sepq_dataset_read_csv(const char* path, sepq_dataset** out);
sepq_status sepq_dataset_write_csv(const sepq_dataset* ds, const char* path);

/* Generates a synthetic dataset from a simulation scenario JSON. */
sepq_status sepq_dataset_simulate(const char* scenario_json, sepq_dataset** out);

/* Affine transforms applied in place: {"time_center":c,"time_scale":s,
 * "covariate_transforms":[{"index":0,"center":c,"scale":s}]} */
sepq_status sepq_dataset_rescale(sepq_dataset* ds, const char* transform_json);

int sepq_dataset_n_subjects(const sepq_dataset* ds);
int sepq_dataset_n_obs(const sepq_dataset* ds);
sepq_status sepq_dataset_time_range(const sepq_dataset* ds, double* t_min, double* t_max);
void sepq_dataset_free(sepq_dataset* ds);

/* --- model fitting -------------------------------------------------- */

/* Runs the MCMC fit described by config_json. Returns SEPQ_OK, or
 * SEPQ_WARN_CONVERGENCE when max R-hat exceeds the threshold (the handle is
 * still valid in that case). */
sepq_status sepq_fit_run(const sepq_dataset* ds, const char* config_json, sepq_fit** out);

int sepq_fit_converged(const sepq_fit* fit);
sepq_status sepq_fit_summary_json(const sepq_fit* fit, char** json_out);
sepq_status sepq_fit_write_draws_csv(const sepq_fit* fit, const char* path);

/* Bridge-sampled log marginal likelihood of this fit. */
sepq_status sepq_fit_log_marginal(const sepq_fit* fit, const char* config_json, char** json_out);

/* Simulation-based scaled residuals for the uncensored rows; writes QQ points
 * to qq_csv_path (pass NULL to skip) and returns the KS summary as JSON. */
sepq_status sepq_fit_residuals(const sepq_fit* fit, const char* config_json,
                               const char* qq_csv_path, char** json_out);

/* Population quantile trajectory (random effects zeroed) over a time grid. */
sepq_status sepq_fit_trajectory(const sepq_fit* fit, const char* config_json,
                                const char* csv_path);

void sepq_fit_free(sepq_fit* fit);

/* --- simulation study ----------------------------------------------- */

/* Runs the scenario grid described by config_json and writes a metrics CSV;
 * returns a JSON copy of the table. */
sepq_status sepq_simstudy_run(const char* config_json, const char* out_csv, char** json_out);

#ifdef __cplusplus
}
#endif

#endif /* SEPQ_H */
