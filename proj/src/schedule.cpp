#include "eimlab/schedule.hpp"

#include <cmath>
#include <stdexcept>

namespace eimlab {

NoiseSchedule build_schedule(int T, double beta_min, double beta_max) {
    if (T < 1)
        throw std::invalid_argument("build_schedule: step count must be positive");
    if (!(beta_min > 0.0) || !(beta_max < 1.0) || beta_min > beta_max)
        throw std::invalid_argument("build_schedule: need 0 < beta_min <= beta_max < 1");

    NoiseSchedule s;
    s.step_count = T;
    s.betas.resize(static_cast<std::size_t>(T));
    s.alpha_bars.resize(static_cast<std::size_t>(T) + 1);
    s.alpha_bars[0] = 1.0;
    for (int t = 1; t <= T; ++t) {
        const double frac = (T == 1) ? 0.0 : static_cast<double>(t - 1) / (T - 1);
        const double beta = beta_min + frac * (beta_max - beta_min);
        s.betas[static_cast<std::size_t>(t - 1)] = beta;
        s.alpha_bars[static_cast<std::size_t>(t)] =
            s.alpha_bars[static_cast<std::size_t>(t - 1)] * (1.0 - beta);
    }
    return s;
}

NoiseSchedule default_schedule() {
    return build_schedule(50, 1e-4, 0.02);
}

int strength_to_timestep(double fraction, int T) {
    if (fraction < 0.0 || fraction > 1.0)
        throw std::invalid_argument("strength_to_timestep: fraction outside [0,1]");
    // round half up
    return static_cast<int>(std::floor(fraction * T + 0.5));
}

} // namespace eimlab
