#ifndef EIMLAB_DIFFUSION_HPP
#define EIMLAB_DIFFUSION_HPP

#include <Eigen/Dense>

#include "eimlab/rng.hpp"
#include "eimlab/schedule.hpp"
#include "eimlab/text_codec.hpp"

namespace eimlab {

struct LatentImage {
    Eigen::MatrixXd tokens; // v x d
    int timestep = 0;

    int token_count() const { return static_cast<int>(tokens.rows()); }
    int width() const { return static_cast<int>(tokens.cols()); }
};

// Conditional epsilon-predictor contract. Evaluation is pure; models are
// immutable once constructed/trained.
class Denoiser {
public:
    virtual ~Denoiser() = default;
    virtual Eigen::MatrixXd predict(const LatentImage& z_t, const TextEmbedding& cond,
                                    int t, const NoiseSchedule& sched) const = 0;
};

LatentImage forward_noise(const LatentImage& z0, int t, const Eigen::MatrixXd& eps,
                          const NoiseSchedule& sched);

Eigen::MatrixXd cfg_combine(const Eigen::MatrixXd& eps_cond, const Eigen::MatrixXd& eps_uncond,
                            double w);

// Ancestral DDPM reverse loop from z_t.timestep down to 0, with classifier-free
// guidance against the uncond embedding at every step. Deterministic given rng.
LatentImage reverse_sample(const LatentImage& z_t, const TextEmbedding& cond,
                           const TextEmbedding& uncond, const Denoiser& den,
                           const SamplerConfig& cfg, const NoiseSchedule& sched, RngStream& rng);

} // namespace eimlab

#endif
