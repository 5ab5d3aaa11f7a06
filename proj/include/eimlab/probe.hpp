#ifndef EIMLAB_PROBE_HPP
#define EIMLAB_PROBE_HPP

#include <string>
#include <vector>

#include "eimlab/text_codec.hpp"
#include "eimlab/toy_model.hpp"

namespace eimlab {

struct ProbeRecord {
    int scene_id = 0;
    std::string color;
    // per layer, head-averaged mass over image tokens for the two prompt tokens
    std::vector<AttentionMap> color_maps;
    std::vector<AttentionMap> object_maps;
};

struct LinearProbe {
    // bias-free linear layer over standardized features; the class-prior
    // intercept would mask sign-flipped transfer
    Eigen::VectorXd weights;
    Eigen::VectorXd center;
    Eigen::VectorXd scale;
    int steps = 0;
    double final_grad_norm = 0.0;
};

struct ProbeResult {
    std::vector<double> layer_accuracy; // transfer accuracy per layer
    double average = 0.0;
    std::string mode;
};

// Attention maps recorded at the end of a guided generation run per prompt
// "<color> <object>", balanced across the given colors.
std::vector<ProbeRecord> build_probe_dataset(const ToyAttentionModel& model,
                                             const SemanticVocabulary& vocab,
                                             const std::vector<std::string>& colors, int per_color,
                                             const SamplerConfig& sampler,
                                             const NoiseSchedule& sched, std::uint64_t seed);

// Binary logistic probe, deterministic full-batch gradient descent from zero
// init, L2 1e-4, stop at gradient norm < 1e-6 or 5000 steps.
LinearProbe train_probe(const Eigen::MatrixXd& features, const std::vector<int>& labels);

double probe_accuracy(const LinearProbe& probe, const Eigen::MatrixXd& features,
                      const std::vector<int>& labels);

// One-vs-rest probes per color trained on the color-token maps of each layer,
// evaluated on the object-token maps; accuracy averaged over colors.
ProbeResult eval_transfer(const std::vector<ProbeRecord>& records,
                          const std::vector<std::string>& colors, const std::string& mode);

// Held-out (even/odd split) self-accuracy on the color-token maps.
ProbeResult eval_self(const std::vector<ProbeRecord>& records,
                      const std::vector<std::string>& colors, const std::string& mode);

} // namespace eimlab

#endif
