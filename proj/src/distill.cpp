#include "eimlab/distill.hpp"

#include <cmath>
#include <stdexcept>

namespace eimlab {

Eigen::MatrixXd sds_grad(const Denoiser& den, const LatentImage& z, const TextEmbedding& c, int t,
                         const Eigen::MatrixXd& eps, const NoiseSchedule& sched) {
    if (t < 1)
        throw std::invalid_argument("sds_grad: t must be at least 1");
    const LatentImage z_t = forward_noise(z, t, eps, sched);
    return den.predict(z_t, c, t, sched) - eps;
}

Eigen::MatrixXd dds_grad(const Denoiser& den, const LatentImage& z, const TextEmbedding& c0,
                         const LatentImage& z_prime, const TextEmbedding& c1, int t,
                         const Eigen::MatrixXd& eps, const NoiseSchedule& sched) {
    if (t < 1)
        throw std::invalid_argument("dds_grad: t must be at least 1");
    if (z.tokens.rows() != z_prime.tokens.rows() || z.tokens.cols() != z_prime.tokens.cols())
        throw std::invalid_argument("dds_grad: latent shape mismatch");
    const LatentImage z_t = forward_noise(z, t, eps, sched);
    const LatentImage z_t_prime = forward_noise(z_prime, t, eps, sched);
    return den.predict(z_t, c0, t, sched) - den.predict(z_t_prime, c1, t, sched);
}

Eigen::MatrixXd hsds_grad(const Denoiser& den, const LatentImage& z_t,
                          const LatentImage& z_t_prime, const TextEmbedding& c_tilde,
                          const TextEmbedding& z_s, double lambda, const NoiseSchedule& sched) {
    if (z_t.timestep != z_t_prime.timestep)
        throw std::invalid_argument("hsds_grad: latents must share a timestep");
    const int t = z_t.timestep;
    const Eigen::MatrixXd eps_prime_tilde = den.predict(z_t_prime, c_tilde, t, sched);
    const Eigen::MatrixXd eps_prime_s = den.predict(z_t_prime, z_s, t, sched);
    const Eigen::MatrixXd eps_base_tilde = den.predict(z_t, c_tilde, t, sched);
    return 2.0 * (eps_prime_tilde - eps_prime_s) +
           lambda * 2.0 * (eps_base_tilde - eps_prime_tilde);
}

Eigen::MatrixXd hsds_appendix_grad(const Denoiser& den, const LatentImage& z,
                                   const TextEmbedding& c_attr, const TextEmbedding& c0,
                                   const LatentImage& z_prime, const TextEmbedding& c1, int t,
                                   const Eigen::MatrixXd& eps, const NoiseSchedule& sched) {
    return dds_grad(den, z, c_attr, z_prime, c0, t, eps, sched) -
           dds_grad(den, z, c1, z_prime, c0, t, eps, sched);
}

std::pair<EditDirection, DistillTrace>
identify_image_direction(const Denoiser& den, const LatentImage& z_t, const TextEmbedding& c_tilde,
                         const TextEmbedding& z_s, const HSDSConfig& cfg,
                         const NoiseSchedule& sched) {
    if (cfg.iterations < 1)
        throw std::invalid_argument("identify_image_direction: iteration count must be positive");
    if (z_t.timestep != cfg.timestep)
        throw std::invalid_argument("identify_image_direction: latent not noised at cfg.timestep");
    if (cfg.lambda < 0.0)
        throw std::invalid_argument("identify_image_direction: lambda must be nonnegative");

    LatentImage z_prime = z_t;
    DistillTrace trace;
    const double sign = cfg.ascend ? 1.0 : -1.0;
    for (int k = 0; k < cfg.iterations; ++k) {
        const double frac = cfg.iterations == 1 ? 0.0 : static_cast<double>(k) / (cfg.iterations - 1);
        const double eta = cfg.step_start + frac * (cfg.step_end - cfg.step_start);
        const Eigen::MatrixXd grad = hsds_grad(den, z_t, z_prime, c_tilde, z_s, cfg.lambda, sched);
        if (!grad.allFinite()) {
            EditDirection partial;
            partial.subspace = Subspace::Image;
            partial.delta = z_prime.tokens - z_t.tokens;
            throw std::runtime_error("identify_image_direction: non-finite gradient at iteration " +
                                     std::to_string(k));
        }
        z_prime.tokens += sign * eta * grad;

        trace.grad_norm.push_back(grad.norm());
        trace.step_size.push_back(eta);
        const Eigen::MatrixXd n = z_prime.tokens - z_t.tokens;
        const double nn = n.norm(), gn = grad.norm();
        trace.alignment.push_back(nn > 0 && gn > 0
                                      ? (n.array() * grad.array()).sum() / (nn * gn)
                                      : 0.0);
    }

    EditDirection n;
    n.subspace = Subspace::Image;
    n.delta = z_prime.tokens - z_t.tokens;
    n.degree = 1.0;
    return {std::move(n), std::move(trace)};
}

} // namespace eimlab
