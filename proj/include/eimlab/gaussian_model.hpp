#ifndef EIMLAB_GAUSSIAN_MODEL_HPP
#define EIMLAB_GAUSSIAN_MODEL_HPP

#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "eimlab/diffusion.hpp"

namespace eimlab {

// Binds one vocabulary attribute to one latent factor; value names map to
// scalar factor means. Readings are linear in the token row, so interpolated
// rows (text-direction edits) condition interpolated factor means exactly.
struct FactorBinding {
    std::string attribute;
    std::map<std::string, double> values;
};

struct FactorPosterior {
    Eigen::VectorXd mean;          // D = v*d, mean of z0 given z_t
    Eigen::VectorXd factor_mean;   // m
    Eigen::VectorXd factor_var;    // m, diagonal in factor coordinates
};

// Closed-form linear-Gaussian denoiser: z0 = base + A f with f Gaussian in
// factor coordinates. The ground-truth oracle everything else is checked
// against. A has orthonormal columns; the entangled variant routes condition
// readings through a dense mixing matrix so one token shifts several factors.
class GaussianFactorModel : public Denoiser {
public:
    GaussianFactorModel(const SemanticVocabulary& vocab, std::vector<FactorBinding> bindings,
                        Eigen::MatrixXd loading, Eigen::VectorXd base, Eigen::MatrixXd mixing,
                        int token_count, int token_width, double var_cond = 0.01,
                        double var_free = 1.0);

    // Random orthonormal loading; mixing = I when not entangled, otherwise
    // dense with off-diagonal 0.3.
    static GaussianFactorModel make_synthetic(const SemanticVocabulary& vocab,
                                              std::vector<FactorBinding> bindings, int token_count,
                                              int token_width, std::uint64_t seed,
                                              bool entangled = false);

    int factor_count() const { return static_cast<int>(loading_.cols()); }
    int token_count() const { return v_; }
    int token_width() const { return d_; }
    const Eigen::MatrixXd& loading() const { return loading_; }
    const Eigen::VectorXd& base() const { return base_; }
    double var_cond() const { return var_cond_; }
    double var_free() const { return var_free_; }

    // Conditioned prior over factors implied by a prompt: mean and variance
    // per factor, plus which factors the prompt pins.
    void conditioned_prior(const TextEmbedding& cond, Eigen::VectorXd& prior_mean,
                           Eigen::VectorXd& prior_var, std::vector<bool>& pinned) const;

    FactorPosterior analytic_posterior(const LatentImage& z_t, const TextEmbedding& cond, int t,
                                       const NoiseSchedule& sched) const;

    Eigen::MatrixXd analytic_eps(const LatentImage& z_t, const TextEmbedding& cond, int t,
                                 const NoiseSchedule& sched) const;

    Eigen::MatrixXd predict(const LatentImage& z_t, const TextEmbedding& cond, int t,
                            const NoiseSchedule& sched) const override;

    // Exact factor coordinates of a clean latent: A^T (z - base).
    Eigen::VectorXd recover_factors(const LatentImage& z0) const;

    // Sample a clean latent with the given factor values.
    LatentImage sample_latent(const Eigen::VectorXd& factors) const;

    Eigen::VectorXd flatten(const Eigen::MatrixXd& tokens) const;
    Eigen::MatrixXd unflatten(const Eigen::VectorXd& vec) const;

    const std::vector<FactorBinding>& bindings() const { return bindings_; }
    double value_of(int factor, const std::string& value_name) const;

private:
    std::vector<FactorBinding> bindings_;
    Eigen::MatrixXd loading_; // D x m
    Eigen::VectorXd base_;    // D
    Eigen::MatrixXd mixing_;  // m x m
    int v_, d_;
    double var_cond_, var_free_;
    // per factor: reading axis u with <e_value, u> = numeric value
    std::vector<Eigen::VectorXd> reading_axes_;
};

// One factor per vocabulary attribute, value means evenly spaced in
// [0.2, 0.8] following vocabulary order.
std::vector<FactorBinding> default_bindings(const SemanticVocabulary& vocab);

} // namespace eimlab

#endif
