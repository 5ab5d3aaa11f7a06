#ifndef EIMLAB_TOY_MODEL_HPP
#define EIMLAB_TOY_MODEL_HPP

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "eimlab/diffusion.hpp"

namespace eimlab {

enum class ConditioningMode { JointSelfAttention, CrossAttention };

struct ToyConfig {
    ConditioningMode mode = ConditioningMode::JointSelfAttention;
    int layers = 4;
    int heads = 2;
    int width = 32;
    int ffn_width = 64;
    int max_timestep = 50;
    bool positional = true;
    // skip attention sublayers and use identity activation; gradcheck baseline
    bool linear_only = false;
};

// Head-averaged post-softmax attention per layer. Joint mode: (v+l) x (v+l)
// self-attention. Cross mode: v x l image-to-text attention.
struct ForwardTaps {
    Eigen::MatrixXd eps;
    std::vector<Eigen::MatrixXd> attention;
};

struct AttentionMap {
    int layer = 0;
    Token token;
    Eigen::VectorXd mass; // per image token, in [0,1]
};

struct TrainExample {
    Eigen::MatrixXd z_t;    // v x d
    TextEmbedding cond;
    int t = 1;
    Eigen::MatrixXd target; // the eps that was added
};

// Minimal residual transformer denoiser, two conditioning wirings:
// joint self-attention over concatenated image+text tokens (DiT-style) and
// image-only self-attention plus dedicated image->text cross-attention
// (UNet-style). No layer norm; 64-bit arithmetic throughout so the
// hand-derived backward pass can be checked against central differences.
class ToyAttentionModel : public Denoiser {
public:
    ToyAttentionModel(ToyConfig cfg, std::uint64_t seed);

    const ToyConfig& config() const { return cfg_; }
    bool trained() const { return trained_; }
    void mark_trained() { trained_ = true; }

    Eigen::MatrixXd predict(const LatentImage& z_t, const TextEmbedding& cond, int t,
                            const NoiseSchedule& sched) const override;

    ForwardTaps forward(const Eigen::MatrixXd& z_t, const TextEmbedding& cond, int t) const;

    // Mean-squared eps-prediction error over the batch, normalized per entry.
    // When grads is non-null it receives d(loss)/d(param) in param order.
    double batch_loss_grad(const std::vector<TrainExample>& batch,
                           std::vector<Eigen::MatrixXd>* grads) const;

    std::vector<Eigen::MatrixXd*> param_views();
    std::vector<const Eigen::MatrixXd*> param_views() const;
    std::vector<std::string> param_names() const;
    std::vector<Eigen::MatrixXd> zero_grads() const;

    std::uint64_t param_hash() const;

    void save(const std::string& path_base) const; // writes .bin and .json
    static ToyAttentionModel load(const std::string& path_base);

private:
    struct Layer {
        Eigen::MatrixXd Wq, Wk, Wv, Wo;     // d x d
        Eigen::MatrixXd Cq, Ck, Cv, Co;     // d x d, cross mode only
        Eigen::MatrixXd W1, W2;             // d x ffn, ffn x d
        Eigen::MatrixXd b1, b2;             // 1 x ffn, 1 x d
    };

    ToyConfig cfg_;
    std::vector<Layer> layers_;
    Eigen::MatrixXd temb_; // (T+1) x d learned
    Eigen::MatrixXd Wout_; // d x d
    Eigen::MatrixXd bout_; // 1 x d
    Eigen::MatrixXd pos_;  // fixed sinusoidal table, not a parameter
    bool trained_ = false;

    struct Cache;
    Eigen::MatrixXd run_forward(const Eigen::MatrixXd& z_t, const TextEmbedding& cond, int t,
                                Cache* cache, std::vector<Eigen::MatrixXd>* taps) const;
    void run_backward(const Cache& cache, const Eigen::MatrixXd& d_eps,
                      std::vector<Eigen::MatrixXd>& grads) const;
};

std::vector<AttentionMap> extract_attention_maps(const ForwardTaps& taps,
                                                 const TextEmbedding& cond, const Token& token,
                                                 ConditioningMode mode, int image_tokens);

// Central-difference check on randomly probed parameters; returns the max
// relative error between analytic and numeric gradients.
double finite_diff_check(ToyAttentionModel& model, const std::vector<TrainExample>& batch,
                         int probes, std::uint64_t seed, double step = 1e-3);

} // namespace eimlab

#endif
