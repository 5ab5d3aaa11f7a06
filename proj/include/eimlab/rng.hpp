#ifndef EIMLAB_RNG_HPP
#define EIMLAB_RNG_HPP

#include <cstdint>
#include <Eigen/Dense>

namespace eimlab {

// Counter-free splittable stream. Every piece of randomness in the lab flows
// through derive_stream(root_seed, task_id) so parallel experiments are
// independent of scheduling order. Gaussian draws use Box-Muller on top of
// mt19937_64 rather than std::normal_distribution, which is
// implementation-defined and would break cross-toolchain reproducibility.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed);

    double uniform();         // [0, 1)
    double normal();          // N(0, 1)
    std::uint64_t next_u64();
    // integer in [0, n)
    std::uint64_t below(std::uint64_t n);

    Eigen::MatrixXd normal_matrix(int rows, int cols);

private:
    std::uint64_t state_[4];
    bool has_spare_ = false;
    double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x);

RngStream derive_stream(std::uint64_t root_seed, std::uint64_t task_id);

} // namespace eimlab

#endif
