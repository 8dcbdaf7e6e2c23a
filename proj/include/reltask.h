/* reltask C API: opaque handles + status codes over the C++ core.
 *
 * Every function returns RT_OK on success; on failure, a status code is
 * returned and rt_last_error() carries a message for the calling thread.
 * Strings returned through char** are owned by the caller and must be
 * released with rt_string_free().
 */
#ifndef RELTASK_H
#define RELTASK_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum rt_status {
  RT_OK = 0,
  RT_ERR_ARGUMENT = 1,
  RT_ERR_VALIDATION = 2,
  RT_ERR_CONTRACT = 3,
  RT_ERR_SINGULAR = 4,
  RT_ERR_DIVERGED = 5,
  RT_ERR_IO = 6,
  RT_ERR_PARTIAL = 7,
  RT_ERR_INTERNAL = 8
} rt_status;

const char* rt_status_name(rt_status status);
const char* rt_last_error(void);
const char* rt_version(void);
void rt_string_free(char* s);

/* --- template tasks ------------------------------------------------------ */

typedef struct rt_task rt_task;

/* kind: same_different | aba_vs_abb | abab_vs_aabb | majority | random_task |
 * copy | print_program | string_assign_program | distribution_of_3 |
 * match_to_sample. params_json may be NULL; recognized keys: k, r,
 * n_wildcards, n_regular, seed, disjoint, vocab_size. */
rt_status rt_task_builtin(const char* kind, const char* params_json,
                          rt_task** out);
rt_status rt_task_from_json(const char* json_text, rt_task** out);
rt_status rt_task_to_json(const rt_task* task, char** out_json);
rt_status rt_task_template_count(const rt_task* task, int32_t* out);
rt_status rt_task_with_cls(const rt_task* task, rt_task** out);
/* Data diversity rho over a uniform substitution alphabet [lo, hi). */
rt_status rt_task_diversity(const rt_task* task, int32_t alphabet_lo,
                            int32_t alphabet_hi, double* out);
void rt_task_free(rt_task* task);

/* --- datasets -------------------------------------------------------------- */

typedef struct rt_dataset rt_dataset;

rt_status rt_dataset_sample(const rt_task* task, size_t n, int32_t alphabet_lo,
                            int32_t alphabet_hi, uint64_t seed,
                            rt_dataset** out);
rt_status rt_dataset_size(const rt_dataset* ds, size_t* out);
rt_status rt_dataset_to_csv(const rt_dataset* ds, const char* manifest_hash,
                            char** out_csv);
void rt_dataset_free(rt_dataset* ds);

/* --- command driver --------------------------------------------------------- */

/* command: gen | train | kernel | nmatrix | probe | sweep | figures |
 * selftest. config_json may be NULL or "{}". Writes outputs under the
 * config's out_dir; the returned report JSON lists them. RT_ERR_PARTIAL
 * signals per-cell failures with some cells completed. */
rt_status rt_run_command(const char* command, const char* config_json,
                         char** out_report_json);

#ifdef __cplusplus
}
#endif

#endif /* RELTASK_H */
