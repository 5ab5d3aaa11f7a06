#ifndef EIMLAB_SDE_HPP
#define EIMLAB_SDE_HPP

#include <string>
#include <vector>

#include "eimlab/gaussian_model.hpp"
#include "eimlab/scene.hpp"

namespace eimlab {

struct SDEReport {
    double conditioned_distance = 0.0; // ||x - h(f(x,t), c, t)||, RMS entries
    double edited_distance = 0.0;      // ||x - h(f(x,t), c~, t)||
    double ratio = 0.0;
    double total = 0.0;                // ratio + edited_distance
    std::string normalization = "rms";
};

// Disentanglement metric over a clean latent: forward-noise at the fraction,
// reverse-sample once under c and once under c~, distances RMS over latent
// entries, averaged over seed_count independent noise draws.
SDEReport sde_metric(const LatentImage& x, const TextEmbedding& c, const TextEmbedding& c_tilde,
                     const Denoiser& den, const SamplerConfig& sampler, const NoiseSchedule& sched,
                     double strength, int seed_count, std::uint64_t root_seed);

// Scene-grounded variant; distances RMS over pixels in [0,1].
SDEReport sde_metric_scene(const Scene& x, const TextEmbedding& c, const TextEmbedding& c_tilde,
                           const Denoiser& den, const PatchCodec& codec,
                           const SamplerConfig& sampler, const NoiseSchedule& sched,
                           double strength, int seed_count, std::uint64_t root_seed);

struct SemanticLossRow {
    double strength = 0.0;
    Eigen::VectorXd factor_std;  // across-seed std of each recovered factor
    Eigen::VectorXd factor_mean;
};

// Forward the source latent at each strength, reverse-sample with the given
// prompt (null prompt for the unconditioned arm), report per-factor spread.
std::vector<SemanticLossRow> semantic_loss_sweep(const GaussianFactorModel& model,
                                                 const Eigen::VectorXd& source_factors,
                                                 const TextEmbedding& cond,
                                                 const std::vector<double>& strengths,
                                                 const SamplerConfig& sampler,
                                                 const NoiseSchedule& sched, int seed_count,
                                                 std::uint64_t root_seed);

// Closed-form per-factor std of the recovered factors under the ancestral
// sampler with the analytic denoiser: the per-step update is affine in each
// factor coordinate, so the variance obeys a scalar recursion.
Eigen::VectorXd sampler_factor_std(const GaussianFactorModel& model, const TextEmbedding& cond,
                                   const TextEmbedding& uncond, const SamplerConfig& sampler,
                                   const NoiseSchedule& sched, int t_star);

} // namespace eimlab

#endif
