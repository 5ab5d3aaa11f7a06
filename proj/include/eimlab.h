#ifndef EIMLAB_H
#define EIMLAB_H

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum {
    EIMLAB_OK = 0,
    EIMLAB_ERR_INVALID_ARGUMENT = 1,
    EIMLAB_ERR_CONFIG = 2,
    EIMLAB_ERR_RUNTIME = 3
} eimlab_status;

/* Opaque outcome of one experiment run. */
typedef struct eimlab_run eimlab_run;

const char* eimlab_version(void);

/* Reliable-manipulation threshold 2*alpha*sqrt(d/(d-2)).
   Fails with EIMLAB_ERR_INVALID_ARGUMENT when alpha <= 0 or d <= 2. */
eimlab_status eimlab_tau_threshold(double alpha, int d, double* out);

/* Execute a JSON experiment config. expected_command, out_dir and seed may be
   NULL to keep the config's values; jobs <= 0 keeps the config's job count.
   When expected_command is given, a config naming a different command is a
   schema violation. Returns NULL only when the handle cannot be allocated. */
eimlab_run* eimlab_run_config(const char* config_json, const char* expected_command,
                              const char* out_dir, const uint64_t* seed, int jobs,
                              int deterministic);
eimlab_run* eimlab_run_config_file(const char* config_path, const char* expected_command,
                                   const char* out_dir, const uint64_t* seed, int jobs,
                                   int deterministic);

/* 0 success, 2 config/schema violation, 1 runtime failure. */
int eimlab_run_exit_code(const eimlab_run* run);
const char* eimlab_run_error(const eimlab_run* run);
const char* eimlab_run_stage(const eimlab_run* run);
const char* eimlab_run_output_dir(const eimlab_run* run);
void eimlab_run_free(eimlab_run* run);

#ifdef __cplusplus
}
#endif

#endif
