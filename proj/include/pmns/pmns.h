#ifndef PMNS_PMNS_H
#define PMNS_PMNS_H

#include <stddef.h>
#include <stdint.h>

#if defined(__GNUC__)
#define PMNS_API __attribute__((visibility("default")))
#else
#define PMNS_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Return codes. */
#define PMNS_OK 0
#define PMNS_EINVAL 2   /* bad configuration, arguments or usage */
#define PMNS_ERUNTIME 3 /* numerical or I/O failure */

typedef struct pmns_run pmns_run;
typedef struct pmns_field pmns_field;

PMNS_API const char* pmns_version(void);
/* Message of the last failed call on this thread ("" if none). */
PMNS_API const char* pmns_last_error(void);

/* Runs. The config path may be NULL for an empty configuration. */
PMNS_API int pmns_run_open(const char* config_path, pmns_run** out);
PMNS_API int pmns_run_open_json(const char* config_json, pmns_run** out);
PMNS_API int pmns_run_set_seed(pmns_run* run, uint64_t seed);
PMNS_API int pmns_run_set_threads(pmns_run* run, int threads);
PMNS_API int pmns_run_set_ladder(pmns_run* run, const double* ks, size_t count);
PMNS_API int pmns_run_set_out_dir(pmns_run* run, const char* dir);
/* Validates everything, then writes a fresh run directory. */
PMNS_API int pmns_run_execute(pmns_run* run, const char* subcommand);
/* Directory written by the last successful execute, or "". */
PMNS_API const char* pmns_run_directory(const pmns_run* run);
PMNS_API void pmns_run_close(pmns_run* run);

/* Merges completed run directories into a report directory under out_root
   (NULL selects the default). The report path is copied into buf if it fits. */
PMNS_API int pmns_report(const char* const* run_dirs, size_t count, const char* out_root, char* buf,
                size_t buf_len);

/* A single sampled initial field on the partition of K = m^3. */
PMNS_API int pmns_field_create(int64_t K, double kappa, uint64_t seed, const char* rv, const char* phases,
                      pmns_field** out);
PMNS_API int64_t pmns_field_subblock_count(const pmns_field* f);
/* Field value at frequency xi; writes 6 doubles (re, im of three components). */
PMNS_API int pmns_field_value(const pmns_field* f, const double xi[3], double out[6]);
PMNS_API void pmns_field_destroy(pmns_field* f);

#ifdef __cplusplus
}
#endif

#endif
