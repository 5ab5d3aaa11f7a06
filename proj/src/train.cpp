#include "eimlab/train.hpp"

#include <numeric>
#include <stdexcept>

namespace eimlab {

std::vector<TrainExample> make_examples(const std::vector<Scene>& scenes,
                                        const NoiseSchedule& sched,
                                        const SemanticVocabulary& vocab, const PatchCodec& codec,
                                        RngStream& rng) {
    std::vector<TrainExample> out;
    out.reserve(scenes.size());
    for (const auto& scene : scenes) {
        TrainExample ex;
        const LatentImage z0 = codec.encode(scene.raster);
        ex.t = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(sched.step_count)));
        ex.target = rng.normal_matrix(z0.token_count(), z0.width());
        ex.z_t = forward_noise(z0, ex.t, ex.target, sched).tokens;
        ex.cond = vocab.encode_prompt(scene.prompt);
        out.push_back(std::move(ex));
    }
    return out;
}

TrainResult train_denoiser(ToyAttentionModel& model, const std::vector<Scene>& scenes,
                           const TrainConfig& cfg, const NoiseSchedule& sched,
                           const SemanticVocabulary& vocab, const PatchCodec& codec) {
    if (cfg.epochs < 1 || cfg.batch_size < 1 || cfg.learning_rate < 0.0)
        throw std::invalid_argument("train_denoiser: invalid hyperparameters");
    if (scenes.empty())
        throw std::invalid_argument("train_denoiser: empty dataset");

    RngStream rng = derive_stream(cfg.seed, 0x7417ULL);
    auto params = model.param_views();
    std::vector<Eigen::MatrixXd> velocity;
    for (const auto* p : params)
        velocity.push_back(Eigen::MatrixXd::Zero(p->rows(), p->cols()));

    TrainResult result;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        // fresh noise/timesteps each epoch, fixed scene order with an
        // in-stream shuffle
        std::vector<TrainExample> examples = make_examples(scenes, sched, vocab, codec, rng);
        std::vector<std::size_t> order(examples.size());
        std::iota(order.begin(), order.end(), 0);
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[rng.below(i)]);

        double epoch_loss = 0.0;
        int batches = 0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
            std::vector<TrainExample> batch;
            for (std::size_t i = start;
                 i < std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size)); ++i)
                batch.push_back(examples[order[i]]);

            auto grads = model.zero_grads();
            const double loss = model.batch_loss_grad(batch, &grads);
            epoch_loss += loss;
            ++batches;
            for (std::size_t pi = 0; pi < params.size(); ++pi) {
                velocity[pi] = cfg.momentum * velocity[pi] - cfg.learning_rate * grads[pi];
                *params[pi] += velocity[pi];
            }
        }
        epoch_loss /= batches;
        result.epoch_loss.push_back(epoch_loss);
        if (epoch == 0)
            result.initial_loss = epoch_loss;
        if (epoch_loss > 10.0 * result.initial_loss || !std::isfinite(epoch_loss))
            throw std::runtime_error("train_denoiser: diverged at epoch " + std::to_string(epoch) +
                                     " (loss " + std::to_string(epoch_loss) + ", initial " +
                                     std::to_string(result.initial_loss) + ")");
    }
    result.final_loss = result.epoch_loss.back();
    model.mark_trained();
    return result;
}

} // namespace eimlab
