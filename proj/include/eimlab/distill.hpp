#ifndef EIMLAB_DISTILL_HPP
#define EIMLAB_DISTILL_HPP

#include <vector>

#include "eimlab/diffusion.hpp"

namespace eimlab {

struct HSDSConfig {
    double lambda = 0.5;
    double step_start = 0.1;
    double step_end = 0.01;
    int iterations = 50;
    int timestep = 38; // fixed t for the whole identify loop
    // ascend along +dHSDS (the update direction that recovers the target
    // loading column in the analytic model); flip for the descent variant
    bool ascend = true;
};

struct DistillTrace {
    std::vector<double> grad_norm;
    std::vector<double> alignment; // cosine to (z' - z_t) so far, 0 first step
    std::vector<double> step_size;
};

// SDS direction: eps_hat(z_t, c, t) - eps with z_t = forward_noise(z, t, eps).
Eigen::MatrixXd sds_grad(const Denoiser& den, const LatentImage& z, const TextEmbedding& c, int t,
                         const Eigen::MatrixXd& eps, const NoiseSchedule& sched);

// DDS direction: eps_hat(z_t, c0, t) - eps_hat(z_t', c1, t), shared noise.
Eigen::MatrixXd dds_grad(const Denoiser& den, const LatentImage& z, const TextEmbedding& c0,
                         const LatentImage& z_prime, const TextEmbedding& c1, int t,
                         const Eigen::MatrixXd& eps, const NoiseSchedule& sched);

// The HSDS image gradient, term by term:
//   2 (eps(z', c~) - eps(z', z_s)) + lambda * 2 (eps(z_t, c~) - eps(z', c~))
Eigen::MatrixXd hsds_grad(const Denoiser& den, const LatentImage& z_t,
                          const LatentImage& z_t_prime, const TextEmbedding& c_tilde,
                          const TextEmbedding& z_s, double lambda, const NoiseSchedule& sched);

// Difference-of-DDS composition of the same idea; not algebraically equal to
// hsds_grad, kept for cross-form comparison.
Eigen::MatrixXd hsds_appendix_grad(const Denoiser& den, const LatentImage& z,
                                   const TextEmbedding& c_attr, const TextEmbedding& c0,
                                   const LatentImage& z_prime, const TextEmbedding& c1, int t,
                                   const Eigen::MatrixXd& eps, const NoiseSchedule& sched);

// Iterative identify loop: z' starts at z_t and moves along the HSDS
// direction with a linearly decaying step size; returns n_{z_t} = z'_K - z_t.
std::pair<EditDirection, DistillTrace>
identify_image_direction(const Denoiser& den, const LatentImage& z_t, const TextEmbedding& c_tilde,
                         const TextEmbedding& z_s, const HSDSConfig& cfg,
                         const NoiseSchedule& sched);

} // namespace eimlab

#endif
