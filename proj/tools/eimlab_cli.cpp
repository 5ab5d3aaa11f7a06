#include <cstdint>
#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "eimlab.h"

namespace {

struct CliOptions {
    std::string config;
    std::string out;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int jobs = 0;
    bool deterministic = false;
};

int run_command(const std::string& command, const CliOptions& opt) {
    eimlab_run* run = eimlab_run_config_file(
        opt.config.c_str(), command.c_str(), opt.out.empty() ? nullptr : opt.out.c_str(),
        opt.seed_set ? &opt.seed : nullptr, opt.jobs, opt.deterministic ? 1 : 0);
    if (!run) {
        std::fprintf(stderr, "error: out of memory\n");
        return 1;
    }
    const int code = eimlab_run_exit_code(run);
    if (code == 0) {
        std::printf("%s: ok, outputs in %s\n", command.c_str(), eimlab_run_output_dir(run));
    } else {
        std::fprintf(stderr, "error (stage %s): %s\n", eimlab_run_stage(run),
                     eimlab_run_error(run));
    }
    eimlab_run_free(run);
    return code;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"eimlab: config-driven latent-editing experiments"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(eimlab_version()));

    CliOptions opt;
    const char* commands[] = {"edit", "sde", "probe", "theory", "train", "sweep", "semantic-loss"};
    const char* descriptions[] = {
        "run one encode-identify-manipulate edit",
        "disentanglement metric over synthetic scenes",
        "attention-map probing of the toy denoisers",
        "concentration and orthogonality checks",
        "train a toy denoiser",
        "parameter sweep of the edit pipeline",
        "factor spread versus forward strength"};
    std::string chosen;
    for (int i = 0; i < 7; ++i) {
        CLI::App* sub = app.add_subcommand(commands[i], descriptions[i]);
        sub->add_option("--config", opt.config, "JSON config path")->required();
        sub->add_option("--out", opt.out, "output directory");
        sub->add_option("--seed", opt.seed, "root seed override");
        sub->add_option("--jobs", opt.jobs, "worker count");
        sub->add_flag("--deterministic", opt.deterministic,
                      "posterior-mean-only reverse sampling");
        sub->callback([&chosen, name = std::string(commands[i]), sub, &opt]() {
            chosen = name;
            opt.seed_set = sub->count("--seed") > 0;
        });
    }

    CLI11_PARSE(app, argc, argv);
    return run_command(chosen, opt);
}
