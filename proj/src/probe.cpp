#include "eimlab/probe.hpp"

#include <cmath>
#include <stdexcept>

#include "eimlab/scene.hpp"

namespace eimlab {

std::vector<ProbeRecord> build_probe_dataset(const ToyAttentionModel& model,
                                             const SemanticVocabulary& vocab,
                                             const std::vector<std::string>& colors, int per_color,
                                             const SamplerConfig& sampler,
                                             const NoiseSchedule& sched, std::uint64_t seed) {
    if (!model.trained())
        throw std::invalid_argument("build_probe_dataset: model parameters are still at init");
    if (colors.empty() || per_color < 1)
        throw std::invalid_argument("build_probe_dataset: empty prompt grid");

    const TextEmbedding uncond = vocab.null_prompt();
    const int v = kTokenCount;
    std::vector<ProbeRecord> records;
    records.reserve(colors.size() * static_cast<std::size_t>(per_color));
    int scene_id = 0;
    for (const auto& color : colors) {
        const Token color_tok{"color", color};
        const Token object_tok{"object", "square"};
        if (!vocab.has_token(color_tok))
            throw std::invalid_argument("build_probe_dataset: unknown color " + color);
        const TextEmbedding cond = vocab.encode_prompt({color_tok, object_tok});
        for (int r = 0; r < per_color; ++r) {
            RngStream rng = derive_stream(seed, 0x9b0bULL + static_cast<std::uint64_t>(scene_id));
            LatentImage z;
            z.tokens = rng.normal_matrix(v, vocab.width());
            z.timestep = sched.step_count;
            const LatentImage z0 = reverse_sample(z, cond, uncond, model, sampler, sched, rng);
            const ForwardTaps taps = model.forward(z0.tokens, cond, 1);

            ProbeRecord rec;
            rec.scene_id = scene_id++;
            rec.color = color;
            rec.color_maps =
                extract_attention_maps(taps, cond, color_tok, model.config().mode, v);
            rec.object_maps =
                extract_attention_maps(taps, cond, object_tok, model.config().mode, v);
            records.push_back(std::move(rec));
        }
    }
    return records;
}

LinearProbe train_probe(const Eigen::MatrixXd& features, const std::vector<int>& labels) {
    const long n = features.rows();
    if (n != static_cast<long>(labels.size()) || n == 0)
        throw std::invalid_argument("train_probe: feature/label size mismatch");
    bool has0 = false, has1 = false;
    for (int y : labels)
        (y ? has1 : has0) = true;
    if (!has0 || !has1)
        throw std::invalid_argument("train_probe: single-class input");

    const double l2 = 1e-4;
    const double lr = 0.5;
    LinearProbe probe;
    probe.weights = Eigen::VectorXd::Zero(features.cols());
    probe.center = features.colwise().mean();
    probe.scale.resize(features.cols());
    for (long j = 0; j < features.cols(); ++j) {
        const double var =
            (features.col(j).array() - probe.center(j)).square().sum() / static_cast<double>(n);
        probe.scale(j) = var > 1e-16 ? std::sqrt(var) : 1.0;
    }
    const Eigen::MatrixXd X =
        (features.rowwise() - probe.center.transpose()).array().rowwise() /
        probe.scale.transpose().array();
    Eigen::VectorXd y(n);
    for (long i = 0; i < n; ++i)
        y(i) = labels[static_cast<std::size_t>(i)];

    for (probe.steps = 0; probe.steps < 5000; ++probe.steps) {
        const Eigen::VectorXd logits = X * probe.weights;
        const Eigen::VectorXd p = (1.0 / (1.0 + (-logits.array()).exp())).matrix();
        const Eigen::VectorXd err = p - y;
        const Eigen::VectorXd gw = X.transpose() * err / static_cast<double>(n) +
                                   l2 * probe.weights;
        probe.final_grad_norm = gw.norm();
        if (probe.final_grad_norm < 1e-6)
            break;
        probe.weights -= lr * gw;
    }
    return probe;
}

double probe_accuracy(const LinearProbe& probe, const Eigen::MatrixXd& features,
                      const std::vector<int>& labels) {
    if (features.rows() != static_cast<long>(labels.size()) || labels.empty())
        throw std::invalid_argument("probe_accuracy: feature/label size mismatch");
    int correct = 0;
    for (long i = 0; i < features.rows(); ++i) {
        const Eigen::VectorXd x =
            ((features.row(i) - probe.center.transpose()).array() /
             probe.scale.transpose().array())
                .matrix();
        const double logit = x.dot(probe.weights);
        const int pred = logit > 0.0 ? 1 : 0;
        correct += pred == labels[static_cast<std::size_t>(i)];
    }
    return static_cast<double>(correct) / static_cast<double>(labels.size());
}

namespace {

Eigen::MatrixXd layer_features(const std::vector<ProbeRecord>& records, int layer,
                               bool object_token) {
    const auto& first =
        object_token ? records.front().object_maps : records.front().color_maps;
    const long dim = first[static_cast<std::size_t>(layer)].mass.size();
    Eigen::MatrixXd X(static_cast<long>(records.size()), dim);
    for (std::size_t r = 0; r < records.size(); ++r) {
        const auto& maps = object_token ? records[r].object_maps : records[r].color_maps;
        X.row(static_cast<long>(r)) = maps[static_cast<std::size_t>(layer)].mass.transpose();
    }
    return X;
}

std::vector<int> one_vs_rest(const std::vector<ProbeRecord>& records, const std::string& color) {
    std::vector<int> y;
    y.reserve(records.size());
    for (const auto& rec : records)
        y.push_back(rec.color == color ? 1 : 0);
    return y;
}

} // namespace

ProbeResult eval_transfer(const std::vector<ProbeRecord>& records,
                          const std::vector<std::string>& colors, const std::string& mode) {
    if (records.empty())
        throw std::invalid_argument("eval_transfer: empty record set");
    const int layers = static_cast<int>(records.front().color_maps.size());
    ProbeResult result;
    result.mode = mode;
    for (int layer = 0; layer < layers; ++layer) {
        const Eigen::MatrixXd Xc = layer_features(records, layer, false);
        const Eigen::MatrixXd Xo = layer_features(records, layer, true);
        double acc = 0.0;
        for (const auto& color : colors) {
            const std::vector<int> y = one_vs_rest(records, color);
            const LinearProbe probe = train_probe(Xc, y);
            acc += probe_accuracy(probe, Xo, y);
        }
        result.layer_accuracy.push_back(acc / static_cast<double>(colors.size()));
    }
    result.average = 0.0;
    for (double a : result.layer_accuracy)
        result.average += a;
    result.average /= static_cast<double>(result.layer_accuracy.size());
    return result;
}

ProbeResult eval_self(const std::vector<ProbeRecord>& records,
                      const std::vector<std::string>& colors, const std::string& mode) {
    if (records.size() < 4)
        throw std::invalid_argument("eval_self: too few records for a split");
    std::vector<ProbeRecord> train_set, test_set;
    for (std::size_t i = 0; i < records.size(); ++i)
        (i % 2 == 0 ? train_set : test_set).push_back(records[i]);

    const int layers = static_cast<int>(records.front().color_maps.size());
    ProbeResult result;
    result.mode = mode;
    for (int layer = 0; layer < layers; ++layer) {
        const Eigen::MatrixXd Xtr = layer_features(train_set, layer, false);
        const Eigen::MatrixXd Xte = layer_features(test_set, layer, false);
        double acc = 0.0;
        for (const auto& color : colors) {
            const LinearProbe probe = train_probe(Xtr, one_vs_rest(train_set, color));
            acc += probe_accuracy(probe, Xte, one_vs_rest(test_set, color));
        }
        result.layer_accuracy.push_back(acc / static_cast<double>(colors.size()));
    }
    result.average = 0.0;
    for (double a : result.layer_accuracy)
        result.average += a;
    result.average /= static_cast<double>(result.layer_accuracy.size());
    return result;
}

} // namespace eimlab
