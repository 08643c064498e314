/* binforward - capacity solver and block-Markov scheme simulator for
 * semideterministic relay and cribbing-MAC channels with states.
 *
 * Plain C interface over the C++ core: opaque handles, integer status codes,
 * a thread-local message for the last error. Every object returned through a
 * handle must be released with the matching _free function.
 */
#ifndef BINFORWARD_H
#define BINFORWARD_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum binf_status {
  BINF_OK = 0,
  BINF_ERR_INVALID = 1, /* bad argument or failed validation */
  BINF_ERR_KIND = 2,    /* operation applied to the wrong channel kind */
  BINF_ERR_BUDGET = 3,  /* configured cap exceeded */
  BINF_ERR_IO = 4,      /* file system failure */
  BINF_ERR_PARSE = 5,   /* malformed document */
  BINF_ERR_INTERNAL = 6
} binf_status;

typedef enum binf_kind {
  BINF_KIND_RELAY = 0,
  BINF_KIND_STATE_RELAY = 1,
  BINF_KIND_STATE_RELAY_NO_DELAY = 2,
  BINF_KIND_STATE_MAC = 3,
  BINF_KIND_STATE_MAC_CAUSAL = 4
} binf_kind;

typedef struct binf_spec binf_spec;
typedef struct binf_solution binf_solution;
typedef struct binf_fm_report binf_fm_report;
typedef struct binf_sim_result binf_sim_result;

const char* binf_version(void);
/* Message describing the most recent failure on this thread. */
const char* binf_last_error(void);
const char* binf_status_name(binf_status status);

/* ---- channel specs ---- */

binf_status binf_spec_load(const char* path, binf_spec** out);
binf_status binf_spec_from_json(const char* json_text, binf_spec** out);
binf_status binf_spec_make_toy(double stuck_prob, binf_spec** out);
binf_status binf_spec_to_json(const binf_spec* spec, char** out_text);
binf_status binf_spec_save(const binf_spec* spec, const char* path);
binf_kind binf_spec_kind(const binf_spec* spec);
void binf_spec_free(binf_spec* spec);
void binf_string_free(char* text);

/* ---- capacity / region solver ---- */

typedef struct binf_solve_options {
  double grid_step;     /* base simplex step, reciprocal of an even integer */
  int u_size;           /* 0 = solver default min(3, cardinality cap) */
  int restarts;
  int threads;          /* 0 = hardware concurrency */
  uint64_t seed;
  uint64_t enum_cap;    /* exhaustive-grid size ceiling */
  double weight_step;   /* MAC boundary sweep resolution */
  int map_mode;         /* 0 auto, 1 exhaustive, 2 sampled */
  int map_cap;
  int z1_independent;   /* restrict p(x2|u,s2,z1) to ignore z1 (causal MAC) */
} binf_solve_options;

void binf_solve_options_init(binf_solve_options* options);
binf_status binf_solve(const binf_spec* spec, const binf_solve_options* options, binf_solution** out);

int binf_solution_is_region(const binf_solution* sol);
/* Relay kinds: the certified lower bound. MAC kinds: best boundary sum rate. */
double binf_solution_value(const binf_solution* sol);
size_t binf_solution_point_count(const binf_solution* sol);
binf_status binf_solution_point(const binf_solution* sol, size_t index, double* r1, double* r2,
                                const char** active_constraint);
int binf_solution_region_contains(const binf_solution* sol, double r1, double r2);
/* Argmax parameterization (full tables) and resolved solver settings, as JSON
 * owned by the solution handle. */
const char* binf_solution_param_json(const binf_solution* sol);
const char* binf_solution_settings_json(const binf_solution* sol);
void binf_solution_free(binf_solution* sol);

/* Rates of the stuck-at toy example: 1 - p and 1 - H2(p/2). */
binf_status binf_toy_rates(double stuck_prob, double* bin_forward, double* decode_forward);

/* ---- Fourier-Motzkin consistency ---- */

binf_status binf_fm_check(const binf_spec* spec, int samples, double rate_step, uint64_t seed,
                          binf_fm_report** out);
int binf_fm_report_passed(const binf_fm_report* report);
int binf_fm_report_samples(const binf_fm_report* report);
int binf_fm_report_failures(const binf_fm_report* report);
const char* binf_fm_report_json(const binf_fm_report* report);
void binf_fm_report_free(binf_fm_report* report);

/* ---- scheme simulator ---- */

typedef struct binf_sim_options {
  int n;
  int blocks;
  int trials;
  double epsilon;
  uint64_t seed;
  int threads;
  uint64_t symbol_budget; /* codeword symbols per trial */
  /* index 0: relay source / MAC encoder 1; index 1: MAC encoder 2 */
  double r_prime[2];
  double r_dprime[2];
  double r_tilde[2];
} binf_sim_options;

void binf_sim_options_init(binf_sim_options* options);
/* Fills the split fields from the solution's argmax parameterization at the
 * given fraction of the solved optimum (relay) or per-encoder sum-rate share
 * (MAC). */
binf_status binf_derive_rates(const binf_spec* spec, const binf_solution* sol, double scale,
                              binf_sim_options* options);
binf_status binf_simulate(const binf_spec* spec, const binf_solution* sol, const binf_sim_options* options,
                          binf_sim_result** out);

typedef struct binf_sim_row {
  int32_t trial;
  int32_t block;
  uint8_t event_a;
  uint8_t event_b;
  uint8_t event_c;
  uint8_t decoded_ok;
} binf_sim_row;

double binf_sim_block_error_rate(const binf_sim_result* result);
double binf_sim_event_rate(const binf_sim_result* result, int event /* 0=a 1=b 2=c */);
double binf_sim_true_tuple_reject_rate(const binf_sim_result* result);
/* Realized rates after integer rounding of the codebook sizes. */
double binf_sim_realized_rate(const binf_sim_result* result, int encoder /* 0 or 1 */,
                              int which /* 0=R' 1=R'' 2=R~ */);
void binf_sim_collision_stats(const binf_sim_result* result, uint64_t* pairs, uint64_t* hits,
                              double* expected);
size_t binf_sim_row_count(const binf_sim_result* result);
binf_status binf_sim_row_get(const binf_sim_result* result, size_t index, binf_sim_row* row);
const char* binf_sim_summary_json(const binf_sim_result* result);
double binf_sim_seconds(const binf_sim_result* result);
void binf_sim_result_free(binf_sim_result* result);

#ifdef __cplusplus
}
#endif

#endif /* BINFORWARD_H */
