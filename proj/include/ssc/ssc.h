#ifndef SSC_H
#define SSC_H

/* Subspace-correction experiment library: C interface.
 *
 * An experiment is created from a JSON config document, optionally adjusted
 * with string options, run once, and then queried for named text artifacts
 * (CSV tables and JSON summaries). All strings returned by accessors are
 * owned by the experiment and stay valid until it is destroyed. */

#ifdef __cplusplus
extern "C" {
#endif

typedef enum {
  SSC_OK = 0,
  SSC_ERR_CONFIG = 1,    /* invalid config/options (usage error) */
  SSC_ERR_NUMERICAL = 2, /* solver failure or unmet numerical target */
  SSC_ERR_INTERNAL = 3
} ssc_status;

typedef struct ssc_experiment ssc_experiment;

/* Parses nothing yet; config is validated when the experiment runs.
 * Returns NULL only on allocation failure. */
ssc_experiment* ssc_experiment_create(const char* config_json);
void ssc_experiment_destroy(ssc_experiment* exp);

/* Options:
 *   "experiment"   - solve | rates | sweep-eps | constants (overrides config)
 *   "override_tau" - "1"/"true" to allow step sizes above the coloring bound
 */
ssc_status ssc_experiment_set_option(ssc_experiment* exp, const char* key, const char* value);

/* Runs the experiment. Artifacts are available afterwards even when the
 * result is SSC_ERR_NUMERICAL (e.g. a completed run that missed its target). */
ssc_status ssc_experiment_run(ssc_experiment* exp);

int ssc_experiment_artifact_count(const ssc_experiment* exp);
const char* ssc_experiment_artifact_name(const ssc_experiment* exp, int index);
const char* ssc_experiment_artifact_data(const ssc_experiment* exp, int index);

/* Human-readable status or error message for the last run; never NULL. */
const char* ssc_experiment_message(const ssc_experiment* exp);

const char* ssc_version(void);

#ifdef __cplusplus
}
#endif

#endif /* SSC_H */
