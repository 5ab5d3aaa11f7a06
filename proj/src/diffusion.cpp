#include "eimlab/diffusion.hpp"

#include <cmath>
#include <stdexcept>

namespace eimlab {

LatentImage forward_noise(const LatentImage& z0, int t, const Eigen::MatrixXd& eps,
                          const NoiseSchedule& sched) {
    if (z0.timestep != 0)
        throw std::invalid_argument("forward_noise: input latent is already noised");
    if (t < 0 || t > sched.step_count)
        throw std::invalid_argument("forward_noise: timestep out of range");
    if (eps.rows() != z0.tokens.rows() || eps.cols() != z0.tokens.cols())
        throw std::invalid_argument("forward_noise: noise shape mismatch");

    const double ab = sched.alpha_bar(t);
    LatentImage out;
    out.tokens = std::sqrt(ab) * z0.tokens + std::sqrt(1.0 - ab) * eps;
    out.timestep = t;
    return out;
}

Eigen::MatrixXd cfg_combine(const Eigen::MatrixXd& eps_cond, const Eigen::MatrixXd& eps_uncond,
                            double w) {
    if (eps_cond.rows() != eps_uncond.rows() || eps_cond.cols() != eps_uncond.cols())
        throw std::invalid_argument("cfg_combine: shape mismatch");
    return eps_uncond + w * (eps_cond - eps_uncond);
}

LatentImage reverse_sample(const LatentImage& z_t, const TextEmbedding& cond,
                           const TextEmbedding& uncond, const Denoiser& den,
                           const SamplerConfig& cfg, const NoiseSchedule& sched, RngStream& rng) {
    if (z_t.timestep <= 0)
        throw std::invalid_argument("reverse_sample: latent must carry a positive timestep");

    LatentImage cur = z_t;
    for (int t = z_t.timestep; t >= 1; --t) {
        const Eigen::MatrixXd eps_c = den.predict(cur, cond, t, sched);
        const Eigen::MatrixXd eps_u = den.predict(cur, uncond, t, sched);
        const Eigen::MatrixXd eps_hat = cfg_combine(eps_c, eps_u, cfg.guidance_scale);

        const double ab_t = sched.alpha_bar(t);
        const double ab_prev = sched.alpha_bar(t - 1);
        const double beta_t = sched.beta(t);
        const double alpha_t = 1.0 - beta_t;

        const Eigen::MatrixXd z0_hat =
            (cur.tokens - std::sqrt(1.0 - ab_t) * eps_hat) / std::sqrt(ab_t);

        const double c0 = std::sqrt(ab_prev) * beta_t / (1.0 - ab_t);
        const double c1 = std::sqrt(alpha_t) * (1.0 - ab_prev) / (1.0 - ab_t);
        Eigen::MatrixXd mean = c0 * z0_hat + c1 * cur.tokens;

        if (t > 1 && !cfg.deterministic_variance) {
            const double var = (1.0 - ab_prev) / (1.0 - ab_t) * beta_t;
            mean += std::sqrt(var) * rng.normal_matrix(static_cast<int>(mean.rows()),
                                                       static_cast<int>(mean.cols()));
        }
        if (!mean.allFinite())
            throw std::runtime_error("reverse_sample: non-finite latent at step " +
                                     std::to_string(t));
        cur.tokens = std::move(mean);
        cur.timestep = t - 1;
    }
    return cur;
}

} // namespace eimlab
