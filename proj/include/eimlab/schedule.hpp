#ifndef EIMLAB_SCHEDULE_HPP
#define EIMLAB_SCHEDULE_HPP

#include <vector>

namespace eimlab {

// Variance-preserving DDPM schedule. betas[t-1] is beta_t for t in [1, T];
// alpha_bars has T+1 entries with alpha_bars[0] = 1.
struct NoiseSchedule {
    int step_count = 0;
    std::vector<double> betas;
    std::vector<double> alpha_bars;

    double alpha_bar(int t) const { return alpha_bars.at(static_cast<std::size_t>(t)); }
    double beta(int t) const { return betas.at(static_cast<std::size_t>(t - 1)); }
};

NoiseSchedule build_schedule(int T, double beta_min, double beta_max);

// Default lab schedule: linear 1e-4 .. 0.02 over 50 steps.
NoiseSchedule default_schedule();

// Forward-strength fraction to timestep, ties rounded up.
int strength_to_timestep(double fraction, int T);

struct SamplerConfig {
    double guidance_scale = 7.5;
    int total_steps = 50;
    double forward_fraction = 0.75;
    // posterior-mean-only reverse steps, used for oracle comparisons
    bool deterministic_variance = false;
};

} // namespace eimlab

#endif
