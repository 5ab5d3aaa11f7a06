#ifndef EIMLAB_RUNNER_HPP
#define EIMLAB_RUNNER_HPP

#include <cstdint>
#include <optional>
#include <string>

namespace eimlab {

struct RunOverrides {
    // when set, the config's command must match (CLI subcommand agreement)
    std::optional<std::string> expect_command;
    std::optional<std::string> out;
    std::optional<std::uint64_t> seed;
    std::optional<int> jobs;
    bool deterministic = false;
};

struct RunOutcome {
    int exit_code = 0; // 0 ok, 2 schema violation, 1 runtime failure
    std::string error;
    std::string stage;
    std::string out_dir;
};

// Validates the flat JSON config, dispatches on its "command" key, writes all
// artifacts plus manifest.json under the output directory.
RunOutcome run_experiment(const std::string& config_json_text, const RunOverrides& overrides);

RunOutcome run_experiment_file(const std::string& config_path, const RunOverrides& overrides);

} // namespace eimlab

#endif
