#ifndef EIMLAB_THEORY_HPP
#define EIMLAB_THEORY_HPP

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace eimlab {

// 2 alpha sqrt(d / (d - 2)); the reliable-manipulation distance threshold.
double tau_threshold(double alpha, int d);

struct Prop2Report {
    double max_cross_inner = 0.0; // max |<n_i^ext, n_j^ext>|, i != j
    double max_norm_error = 0.0;  // max | ||n_i^ext|| - 1 |
};

// Extends each unit direction into its own block of R^{m d} and checks the
// pairwise inner products, which are structurally zero.
Prop2Report prop2_check(const std::vector<Eigen::VectorXd>& directions);

struct Prop1Report {
    int m = 0;
    int d = 0;
    double alpha = 0.0;
    std::uint64_t samples = 0;
    double tau = 0.0;
    double estimate = 0.0;       // Monte-Carlo P(|sum n_i^T z_i| <= tau)
    double analytic = 0.0;       // erf(tau / sqrt(2 m)), since the sum ~ N(0, m)
    double std_error = 0.0;
    double c = 0.0;
    double claimed_bound = 0.0;  // ((1 - 3 e^{-c d})(1 - (2/alpha) e^{-alpha^2/2}))^m
    bool bound_holds = false;    // estimate >= claimed_bound
};

Prop1Report prop1_mc(int m, int d, double alpha, double c, std::uint64_t samples,
                     std::uint64_t seed, int jobs = 1);

} // namespace eimlab

#endif
