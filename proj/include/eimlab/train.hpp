#ifndef EIMLAB_TRAIN_HPP
#define EIMLAB_TRAIN_HPP

#include <vector>

#include "eimlab/scene.hpp"
#include "eimlab/toy_model.hpp"

namespace eimlab {

struct TrainConfig {
    int epochs = 20;
    int batch_size = 16;
    double learning_rate = 0.05;
    double momentum = 0.9;
    std::uint64_t seed = 1;
};

struct TrainResult {
    std::vector<double> epoch_loss; // mean per-entry eps MSE per epoch
    double initial_loss = 0.0;
    double final_loss = 0.0;
};

// SGD with momentum on the eps-prediction MSE. Timesteps and noise are
// resampled per example each epoch from a single stream, so training is
// bit-deterministic given the seed. Aborts if the loss diverges past 10x
// its initial value.
TrainResult train_denoiser(ToyAttentionModel& model, const std::vector<Scene>& scenes,
                           const TrainConfig& cfg, const NoiseSchedule& sched,
                           const SemanticVocabulary& vocab, const PatchCodec& codec);

// One noised training example per scene at a fixed evaluation stream.
std::vector<TrainExample> make_examples(const std::vector<Scene>& scenes,
                                        const NoiseSchedule& sched,
                                        const SemanticVocabulary& vocab, const PatchCodec& codec,
                                        RngStream& rng);

} // namespace eimlab

#endif
