#include "eimlab.h"

#include <new>
#include <string>

#include "eimlab/runner.hpp"
#include "eimlab/theory.hpp"

struct eimlab_run {
    eimlab::RunOutcome outcome;
};

namespace {

eimlab::RunOverrides make_overrides(const char* expected_command, const char* out_dir,
                                    const uint64_t* seed, int jobs, int deterministic) {
    eimlab::RunOverrides ov;
    if (expected_command)
        ov.expect_command = std::string(expected_command);
    if (out_dir)
        ov.out = std::string(out_dir);
    if (seed)
        ov.seed = *seed;
    if (jobs > 0)
        ov.jobs = jobs;
    ov.deterministic = deterministic != 0;
    return ov;
}

eimlab_run* wrap(eimlab::RunOutcome outcome) {
    auto* run = new (std::nothrow) eimlab_run;
    if (run)
        run->outcome = std::move(outcome);
    return run;
}

eimlab_run* invalid_input_run(const char* message) {
    eimlab::RunOutcome outcome;
    outcome.exit_code = 2;
    outcome.error = message;
    outcome.stage = "validate";
    return wrap(std::move(outcome));
}

} // namespace

extern "C" {

const char* eimlab_version(void) { return "1.0.0"; }

eimlab_status eimlab_tau_threshold(double alpha, int d, double* out) {
    if (!out)
        return EIMLAB_ERR_INVALID_ARGUMENT;
    try {
        *out = eimlab::tau_threshold(alpha, d);
        return EIMLAB_OK;
    } catch (const std::exception&) {
        return EIMLAB_ERR_INVALID_ARGUMENT;
    }
}

eimlab_run* eimlab_run_config(const char* config_json, const char* expected_command,
                              const char* out_dir, const uint64_t* seed, int jobs,
                              int deterministic) {
    if (!config_json)
        return invalid_input_run("null config text");
    try {
        return wrap(eimlab::run_experiment(
            config_json, make_overrides(expected_command, out_dir, seed, jobs, deterministic)));
    } catch (const std::exception& e) {
        eimlab::RunOutcome outcome;
        outcome.exit_code = 1;
        outcome.error = e.what();
        return wrap(std::move(outcome));
    }
}

eimlab_run* eimlab_run_config_file(const char* config_path, const char* expected_command,
                                   const char* out_dir, const uint64_t* seed, int jobs,
                                   int deterministic) {
    if (!config_path)
        return invalid_input_run("null config path");
    try {
        return wrap(eimlab::run_experiment_file(
            config_path, make_overrides(expected_command, out_dir, seed, jobs, deterministic)));
    } catch (const std::exception& e) {
        eimlab::RunOutcome outcome;
        outcome.exit_code = 1;
        outcome.error = e.what();
        return wrap(std::move(outcome));
    }
}

int eimlab_run_exit_code(const eimlab_run* run) { return run ? run->outcome.exit_code : 2; }

const char* eimlab_run_error(const eimlab_run* run) {
    return run ? run->outcome.error.c_str() : "null run handle";
}

const char* eimlab_run_stage(const eimlab_run* run) {
    return run ? run->outcome.stage.c_str() : "";
}

const char* eimlab_run_output_dir(const eimlab_run* run) {
    return run ? run->outcome.out_dir.c_str() : "";
}

void eimlab_run_free(eimlab_run* run) { delete run; }

} // extern "C"
