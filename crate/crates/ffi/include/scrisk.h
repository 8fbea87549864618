/* C ABI for the scrisk supply-chain systemic risk library.
 *
 * Every fallible call returns a status code (SCRISK_OK on success) and
 * reports details through scrisk_last_error(), which is thread-local and
 * valid until the next failing call on the same thread. Handles are created
 * through out-parameters and released with their _free function; _free
 * accepts NULL. Kept in sync with the Rust surface (cbindgen.toml ships for
 * regeneration).
 */

#ifndef SCRISK_H
#define SCRISK_H

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#define SCRISK_OK 0
#define SCRISK_ERR_ARGUMENT 1
#define SCRISK_ERR_CONFIG 2
#define SCRISK_ERR_DATA 3
#define SCRISK_ERR_RUNTIME 4
#define SCRISK_ERR_PANIC 5

/* Opaque network handle. */
typedef struct ScriskNetwork ScriskNetwork;
/* Opaque essentiality-matrix handle. */
typedef struct ScriskEssentiality ScriskEssentiality;
/* Opaque calibrated-model handle. */
typedef struct ScriskModel ScriskModel;
/* Opaque risk-profile handle. */
typedef struct ScriskProfile ScriskProfile;

/* Optimization parameters. beta_kind 0 = fixed beta, 1 = linear ramp to
 * `beta` over `beta_total_steps`. */
typedef struct ScriskRunParams {
  uint64_t steps;
  int32_t beta_kind;
  double beta;
  uint64_t beta_total_steps;
  double epsilon;
  double out_strength_band;
  uint64_t seed;
  uint64_t record_every;
  double cascade_tol;
  uint64_t cascade_t_max;
  int32_t recompute_shares;
} ScriskRunParams;

/* Run outcome summary. */
typedef struct ScriskRunSummary {
  double initial_mean;
  double final_mean;
  double best_mean;
  uint64_t accepted;
  uint64_t steps;
} ScriskRunSummary;

/* Library version as a static string. */
const char *scrisk_version(void);

/* Message of the last error on this thread, or NULL. */
const char *scrisk_last_error(void);

/* Loads an edge-list CSV. `weighted` 0 loads unweighted, nonzero weighted.
 * `min_weight` < 0 keeps the default ingestion threshold of 3000. */
int32_t scrisk_network_load(const char *path,
                            int32_t weighted,
                            double min_weight,
                            ScriskNetwork **out);

/* Generates a synthetic network and its essentiality matrix. */
int32_t scrisk_network_generate(uint64_t n_firms,
                                uint64_t n_sectors,
                                double degree_exponent,
                                double weight_exponent,
                                double reciprocity,
                                double essentiality_density,
                                uint64_t seed,
                                ScriskNetwork **out_net,
                                ScriskEssentiality **out_ess);

/* Writes the network as an edge-list CSV. */
int32_t scrisk_network_write(const ScriskNetwork *net, const char *path);

uint64_t scrisk_network_n_firms(const ScriskNetwork *net);

uint64_t scrisk_network_n_links(const ScriskNetwork *net);

/* Deep copy (optimization mutates its input network). */
int32_t scrisk_network_clone(const ScriskNetwork *net, ScriskNetwork **out);

void scrisk_network_free(ScriskNetwork *net);

/* Loads an essentiality CSV. `default_class` is the fallback for missing
 * pairs: 'E', 'N' or 'I'. */
int32_t scrisk_essentiality_load(const char *path,
                                 char default_class,
                                 ScriskEssentiality **out);

/* Matrix with no entries; every pair takes `class`. */
int32_t scrisk_essentiality_uniform(char class_, ScriskEssentiality **out);

void scrisk_essentiality_free(ScriskEssentiality *ess);

/* Calibrates per-firm production functions on the network's observed
 * inputs. gamma_ne in [0,1]. */
int32_t scrisk_model_calibrate(const ScriskNetwork *net,
                               const ScriskEssentiality *ess,
                               double gamma_ne,
                               ScriskModel **out);

void scrisk_model_free(ScriskModel *model);

/* Computes the full per-firm risk profile (parallel over shock origins). */
int32_t scrisk_profile_compute(const ScriskNetwork *net,
                               const ScriskModel *model,
                               double tol,
                               uint64_t t_max,
                               ScriskProfile **out);

double scrisk_profile_mean(const ScriskProfile *profile);

uint64_t scrisk_profile_len(const ScriskProfile *profile);

/* ESRI of the firm at `index` (dense id order); NaN when out of range. */
double scrisk_profile_esri(const ScriskProfile *profile, uint64_t index);

/* 1 when every cascade converged below tol before t_max. */
int32_t scrisk_profile_converged(const ScriskProfile *profile);

/* Writes firm,esri,rank CSV for the profile over its network. */
int32_t scrisk_profile_write_csv(const ScriskProfile *profile,
                                 const ScriskNetwork *net,
                                 const char *path);

void scrisk_profile_free(ScriskProfile *profile);

/* Runs the MH/annealing chain in place on `net`. When `trajectory_csv` is
 * non-NULL the trajectory is streamed there; `summary` (optional) receives
 * the run totals. */
int32_t scrisk_optimize(ScriskNetwork *net,
                        const ScriskModel *model,
                        const ScriskRunParams *params,
                        const char *trajectory_csv,
                        ScriskRunSummary *summary);

/* Network measures as a JSON object string; free with scrisk_string_free. */
int32_t scrisk_metrics_json(const ScriskNetwork *net, char **out);

/* Frees a string returned by this library. */
void scrisk_string_free(char *s);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* SCRISK_H */
