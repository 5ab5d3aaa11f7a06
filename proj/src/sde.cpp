#include "eimlab/sde.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "eimlab/text_codec.hpp"

namespace eimlab {

namespace {

double rms_latent(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    return std::sqrt((a - b).squaredNorm() / static_cast<double>(a.size()));
}

double rms_raster(const Raster& a, const Raster& b) {
    double se = 0.0;
    long n = 0;
    for (int ch = 0; ch < 3; ++ch) {
        se += (a[ch] - b[ch]).squaredNorm();
        n += a[ch].size();
    }
    return std::sqrt(se / static_cast<double>(n));
}

SDEReport finalize(double cond_dist, double edit_dist) {
    SDEReport rep;
    rep.conditioned_distance = cond_dist;
    rep.edited_distance = edit_dist;
    // an edited distance at rounding scale means the edit did nothing; the
    // ratio degenerates and is reported as the infinity sentinel
    rep.ratio = edit_dist < 1e-12 ? std::numeric_limits<double>::infinity()
                                  : cond_dist / edit_dist;
    rep.total = rep.ratio + rep.edited_distance;
    return rep;
}

} // namespace

SDEReport sde_metric(const LatentImage& x, const TextEmbedding& c, const TextEmbedding& c_tilde,
                     const Denoiser& den, const SamplerConfig& sampler, const NoiseSchedule& sched,
                     double strength, int seed_count, std::uint64_t root_seed) {
    if (seed_count < 1)
        throw std::invalid_argument("sde_metric: seed count must be positive");
    const int t_star = strength_to_timestep(strength, sched.step_count);
    if (t_star < 1)
        throw std::invalid_argument("sde_metric: strength rounds to zero timesteps");

    TextEmbedding uncond;
    uncond.rows.resize(1, c.rows.cols());
    uncond.rows.setZero();
    uncond.tokens = {null_token()};

    double cond_dist = 0.0, edit_dist = 0.0;
    for (int s = 0; s < seed_count; ++s) {
        RngStream rng = derive_stream(root_seed, 0x5de0ULL + static_cast<std::uint64_t>(s));
        const Eigen::MatrixXd eps = rng.normal_matrix(x.token_count(), x.width());
        const LatentImage z_t = forward_noise(x, t_star, eps, sched);
        // common random numbers across the two passes, so c~ = c gives ratio 1
        RngStream rng_c = derive_stream(root_seed, 0x5dc0ULL + static_cast<std::uint64_t>(s));
        RngStream rng_e = derive_stream(root_seed, 0x5dc0ULL + static_cast<std::uint64_t>(s));
        const LatentImage x_c = reverse_sample(z_t, c, uncond, den, sampler, sched, rng_c);
        const LatentImage x_e = reverse_sample(z_t, c_tilde, uncond, den, sampler, sched, rng_e);
        cond_dist += rms_latent(x.tokens, x_c.tokens);
        edit_dist += rms_latent(x.tokens, x_e.tokens);
    }
    return finalize(cond_dist / seed_count, edit_dist / seed_count);
}

SDEReport sde_metric_scene(const Scene& x, const TextEmbedding& c, const TextEmbedding& c_tilde,
                           const Denoiser& den, const PatchCodec& codec,
                           const SamplerConfig& sampler, const NoiseSchedule& sched,
                           double strength, int seed_count, std::uint64_t root_seed) {
    if (seed_count < 1)
        throw std::invalid_argument("sde_metric_scene: seed count must be positive");
    const int t_star = strength_to_timestep(strength, sched.step_count);
    if (t_star < 1)
        throw std::invalid_argument("sde_metric_scene: strength rounds to zero timesteps");

    TextEmbedding uncond;
    uncond.rows.resize(1, c.rows.cols());
    uncond.rows.setZero();
    uncond.tokens = {null_token()};

    const LatentImage z0 = codec.encode(x.raster);
    double cond_dist = 0.0, edit_dist = 0.0;
    for (int s = 0; s < seed_count; ++s) {
        RngStream rng = derive_stream(root_seed, 0x5de0ULL + static_cast<std::uint64_t>(s));
        const Eigen::MatrixXd eps = rng.normal_matrix(z0.token_count(), z0.width());
        const LatentImage z_t = forward_noise(z0, t_star, eps, sched);
        // common random numbers across the two passes, so c~ = c gives ratio 1
        RngStream rng_c = derive_stream(root_seed, 0x5dc0ULL + static_cast<std::uint64_t>(s));
        RngStream rng_e = derive_stream(root_seed, 0x5dc0ULL + static_cast<std::uint64_t>(s));
        const LatentImage x_c = reverse_sample(z_t, c, uncond, den, sampler, sched, rng_c);
        const LatentImage x_e = reverse_sample(z_t, c_tilde, uncond, den, sampler, sched, rng_e);
        cond_dist += rms_raster(x.raster, codec.decode(x_c));
        edit_dist += rms_raster(x.raster, codec.decode(x_e));
    }
    return finalize(cond_dist / seed_count, edit_dist / seed_count);
}

std::vector<SemanticLossRow> semantic_loss_sweep(const GaussianFactorModel& model,
                                                 const Eigen::VectorXd& source_factors,
                                                 const TextEmbedding& cond,
                                                 const std::vector<double>& strengths,
                                                 const SamplerConfig& sampler,
                                                 const NoiseSchedule& sched, int seed_count,
                                                 std::uint64_t root_seed) {
    if (seed_count < 2)
        throw std::invalid_argument("semantic_loss_sweep: need at least 2 seeds for a std");
    for (double s : strengths)
        if (s < 0.0 || s > 1.0)
            throw std::invalid_argument("semantic_loss_sweep: strength outside [0, 1]");

    TextEmbedding uncond;
    uncond.rows.resize(1, model.token_width());
    uncond.rows.setZero();
    uncond.tokens = {null_token()};

    const LatentImage z0 = model.sample_latent(source_factors);
    const int m = model.factor_count();
    std::vector<SemanticLossRow> rows;
    std::uint64_t task = 0;
    for (double strength : strengths) {
        const int t_star = strength_to_timestep(strength, sched.step_count);
        Eigen::MatrixXd recovered(m, seed_count);
        for (int s = 0; s < seed_count; ++s) {
            RngStream rng = derive_stream(root_seed, 0x5e3aULL + task++);
            if (t_star == 0) {
                recovered.col(s) = model.recover_factors(z0);
                continue;
            }
            const Eigen::MatrixXd eps = rng.normal_matrix(z0.token_count(), z0.width());
            const LatentImage z_t = forward_noise(z0, t_star, eps, sched);
            const LatentImage back = reverse_sample(z_t, cond, uncond, model, sampler, sched, rng);
            recovered.col(s) = model.recover_factors(back);
        }
        SemanticLossRow row;
        row.strength = strength;
        row.factor_mean = recovered.rowwise().mean();
        row.factor_std.resize(m);
        for (int i = 0; i < m; ++i) {
            const double mu = row.factor_mean(i);
            row.factor_std(i) = std::sqrt(
                (recovered.row(i).array() - mu).square().sum() / (seed_count - 1));
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

Eigen::VectorXd sampler_factor_std(const GaussianFactorModel& model, const TextEmbedding& cond,
                                   const TextEmbedding& uncond, const SamplerConfig& sampler,
                                   const NoiseSchedule& sched, int t_star) {
    if (t_star < 0 || t_star > sched.step_count)
        throw std::invalid_argument("sampler_factor_std: timestep out of range");
    const int m = model.factor_count();
    if (t_star == 0)
        return Eigen::VectorXd::Zero(m);

    Eigen::VectorXd mean_c, var_c, mean_u, var_u;
    std::vector<bool> pin_c, pin_u;
    model.conditioned_prior(cond, mean_c, var_c, pin_c);
    model.conditioned_prior(uncond, mean_u, var_u, pin_u);

    const double w = sampler.guidance_scale;
    Eigen::VectorXd variance = Eigen::VectorXd::Constant(m, 1.0 - sched.alpha_bar(t_star));
    for (int t = t_star; t >= 1; --t) {
        const double ab_t = sched.alpha_bar(t);
        const double ab_prev = sched.alpha_bar(t - 1);
        const double beta_t = sched.beta(t);
        const double a = std::sqrt(ab_t);
        const double b2 = 1.0 - ab_t;
        const double b = std::sqrt(b2);
        const double c0 = std::sqrt(ab_prev) * beta_t / (1.0 - ab_t);
        const double c1 = std::sqrt(1.0 - beta_t) * (1.0 - ab_prev) / (1.0 - ab_t);
        const double step_var =
            t > 1 && !sampler.deterministic_variance ? (1.0 - ab_prev) / (1.0 - ab_t) * beta_t
                                                     : 0.0;
        for (int i = 0; i < m; ++i) {
            // slope of the per-condition eps in the factor coordinate
            const double prec_c = 1.0 / var_c(i) + ab_t / b2;
            const double prec_u = 1.0 / var_u(i) + ab_t / b2;
            const double de_c = (1.0 - (ab_t / b2) / prec_c) / b;
            const double de_u = (1.0 - (ab_t / b2) / prec_u) / b;
            const double de = de_u + w * (de_c - de_u);
            const double gain = c0 * (1.0 - b * de) / a + c1;
            variance(i) = gain * gain * variance(i) + step_var;
        }
    }
    return variance.cwiseSqrt();
}

} // namespace eimlab
