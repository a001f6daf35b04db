/* C API for the fluxsim core. Opaque handles plus integer status codes;
 * on failure fluxsim_last_error() returns a thread-local message. */
#ifndef FLUXSIM_H
#define FLUXSIM_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#define FLUXSIM_OK 0
#define FLUXSIM_ERR_RUNTIME 1
#define FLUXSIM_ERR_CONFIG 2

const char* fluxsim_version(void);

/* Message for the most recent failing call on this thread. */
const char* fluxsim_last_error(void);

/* ---- domain generation ---- */

typedef struct fluxsim_domains fluxsim_domains;

/* date is "YYYY-MM-DD"; dictionary may be NULL/0 for random labels. */
int fluxsim_generate_domains(const char* seed, const char* date, uint64_t alpha,
                             const char* const* tlds, size_t tld_count,
                             const char* const* dictionary, size_t dict_count,
                             fluxsim_domains** out);
size_t fluxsim_domains_count(const fluxsim_domains* d);
/* Borrowed pointer, valid while the handle lives; NULL if out of range. */
const char* fluxsim_domains_get(const fluxsim_domains* d, size_t index);
void fluxsim_domains_free(fluxsim_domains* d);

/* ---- windowing cost model ---- */

typedef struct {
    uint64_t accesses;
    uint64_t bytes;
    uint64_t kilobytes; /* 1 KB = 1024 B, rounded to nearest */
    double seconds;
} fluxsim_lookup_cost;

/* baseline_average = 0 computes the per-window worst case, nonzero the
 * non-windowed average linear scan. */
int fluxsim_window_cost(uint64_t alpha, uint64_t beta, uint64_t bytes_per_access,
                        double seconds_per_access, int baseline_average,
                        fluxsim_lookup_cost* out);

typedef struct fluxsim_curve fluxsim_curve;

/* (beta, gamma = alpha/beta) points; non-divisor betas are skipped and
 * reported separately. */
int fluxsim_curve_data(uint64_t alpha, const uint64_t* betas, size_t beta_count,
                       fluxsim_curve** out);
size_t fluxsim_curve_count(const fluxsim_curve* c);
int fluxsim_curve_get(const fluxsim_curve* c, size_t index, uint64_t* beta,
                      uint64_t* gamma);
size_t fluxsim_curve_skipped_count(const fluxsim_curve* c);
uint64_t fluxsim_curve_skipped_get(const fluxsim_curve* c, size_t index);
void fluxsim_curve_free(fluxsim_curve* c);

/* ---- simulation runs ---- */

/* Runs a scenario file and writes events.jsonl, metrics.csv, report.csv,
 * summary.md and scenario.json into out_dir. FLUXSIM_SEED overrides the
 * scenario seed. */
int fluxsim_run_scenario(const char* scenario_path, const char* out_dir);

/* Recomputes report.csv from a previous run directory. */
int fluxsim_render_report(const char* run_dir);

#ifdef __cplusplus
}
#endif

#endif /* FLUXSIM_H */
