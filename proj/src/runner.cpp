#include "eimlab/runner.hpp"

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <set>
#include <stdexcept>

#include <json.hpp>

#include "eimlab/io.hpp"
#include "eimlab/pipeline.hpp"
#include "eimlab/probe.hpp"
#include "eimlab/quality.hpp"
#include "eimlab/sde.hpp"
#include "eimlab/theory.hpp"
#include "eimlab/train.hpp"

namespace eimlab {

namespace {

using nlohmann::json;

struct SchemaError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

const std::set<std::string> kCommonKeys = {"command", "seed", "out", "jobs", "deterministic"};

void check_keys(const json& cfg, const std::set<std::string>& command_keys) {
    for (const auto& item : cfg.items()) {
        if (!kCommonKeys.count(item.key()) && !command_keys.count(item.key()))
            throw SchemaError("unknown key: " + item.key());
    }
}

double get_num(const json& cfg, const std::string& key, double fallback) {
    if (!cfg.contains(key))
        return fallback;
    if (!cfg[key].is_number())
        throw SchemaError("key " + key + " must be a number");
    return cfg[key].get<double>();
}

int get_int(const json& cfg, const std::string& key, int fallback) {
    if (!cfg.contains(key))
        return fallback;
    if (!cfg[key].is_number_integer())
        throw SchemaError("key " + key + " must be an integer");
    return cfg[key].get<int>();
}

std::string get_str(const json& cfg, const std::string& key, const std::string& fallback) {
    if (!cfg.contains(key))
        return fallback;
    if (!cfg[key].is_string())
        throw SchemaError("key " + key + " must be a string");
    return cfg[key].get<std::string>();
}

std::vector<double> get_num_list(const json& cfg, const std::string& key,
                                 std::vector<double> fallback) {
    if (!cfg.contains(key))
        return fallback;
    if (!cfg[key].is_array())
        throw SchemaError("key " + key + " must be an array of numbers");
    std::vector<double> out;
    for (const auto& v : cfg[key]) {
        if (!v.is_number())
            throw SchemaError("key " + key + " must be an array of numbers");
        out.push_back(v.get<double>());
    }
    return out;
}

std::string hex64(std::uint64_t v) {
    char buf[19];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

// collects per-file checksums for the manifest as artifacts land on disk
struct Emitter {
    std::string dir;
    json outputs = json::object();

    std::string path(const std::string& name) const { return dir + "/" + name; }

    void file(const std::string& name, const std::string& content) {
        write_text_atomic(path(name), content);
        outputs[name] = hex64(fnv1a(content));
    }
    void csv(const std::string& name, const CsvTable& table) { file(name, csv_to_string(table)); }
    void record(const std::string& name) { outputs[name] = hex64(fnv1a(read_text(path(name)))); }
};

SamplerConfig sampler_from(const json& cfg, bool deterministic) {
    SamplerConfig s;
    s.guidance_scale = get_num(cfg, "guidance_scale", 7.5);
    s.forward_fraction = get_num(cfg, "forward_fraction", 0.75);
    s.deterministic_variance = deterministic;
    return s;
}

HSDSConfig hsds_from(const json& cfg) {
    HSDSConfig h;
    h.lambda = get_num(cfg, "lambda", 0.5);
    h.step_start = get_num(cfg, "step_start", 0.1);
    h.step_end = get_num(cfg, "step_end", 0.01);
    h.iterations = get_int(cfg, "iterations", 50);
    return h;
}

std::vector<Token> full_prompt(const SemanticVocabulary& vocab, const std::string& attribute,
                               const std::string& source_value) {
    std::vector<Token> prompt;
    for (const auto& [attr, values] : vocab.attributes())
        prompt.push_back({attr, attr == attribute ? source_value : values.front()});
    return prompt;
}

CsvTable trace_table(const DistillTrace& trace) {
    CsvTable t;
    t.header = {"iteration", "step_size", "grad_norm", "alignment"};
    for (std::size_t i = 0; i < trace.grad_norm.size(); ++i)
        t.rows.push_back({std::to_string(i), format_double(trace.step_size[i]),
                          format_double(trace.grad_norm[i]), format_double(trace.alignment[i])});
    return t;
}

void run_edit(const json& cfg, std::uint64_t seed, bool deterministic, Emitter& em) {
    check_keys(cfg, {"model", "model_path", "attribute", "source_value", "target_value", "degree",
                     "lambda", "iterations", "step_start", "step_end", "guidance_scale",
                     "forward_fraction", "scene_color", "scene_object", "scene_size", "scene_x",
                     "scene_y"});
    const std::string model_kind = get_str(cfg, "model", "analytic");
    const SemanticVocabulary vocab = SemanticVocabulary::default_vocabulary();
    const NoiseSchedule sched = default_schedule();

    EditRequest req;
    req.seed = seed;
    req.sampler = sampler_from(cfg, deterministic);
    req.hsds = hsds_from(cfg);
    EditEntry entry;
    entry.attribute = get_str(cfg, "attribute", "color");
    entry.source_value = get_str(cfg, "source_value", "red");
    entry.target_value = get_str(cfg, "target_value", "blue");
    entry.degree = get_num(cfg, "degree", 1.0);
    req.plan.entries.push_back(entry);

    EditReport rep;
    if (model_kind == "analytic" || model_kind == "analytic-entangled") {
        const GaussianFactorModel model = GaussianFactorModel::make_synthetic(
            vocab, default_bindings(vocab), kTokenCount, kLatentWidth, 101,
            model_kind == "analytic-entangled");
        req.source_prompt = full_prompt(vocab, entry.attribute, entry.source_value);
        rep = eim_edit_analytic(req, model, vocab, sched);
    } else if (model_kind == "toy-joint" || model_kind == "toy-cross") {
        const std::string model_path = get_str(cfg, "model_path", "");
        if (model_path.empty())
            throw SchemaError("missing key: model_path");
        const ToyAttentionModel den = ToyAttentionModel::load(model_path);
        FactorVector f;
        f.color = get_int(cfg, "scene_color", 0);
        f.object = get_int(cfg, "scene_object", 0);
        f.size = get_num(cfg, "scene_size", 0.6);
        f.pos_x = get_num(cfg, "scene_x", 0.5);
        f.pos_y = get_num(cfg, "scene_y", 0.5);
        req.scene = render_scene(f);
        const PatchCodec codec;
        rep = eim_edit_scene(req, den, codec, vocab, sched);
        write_ppm(em.path("before.ppm"), *rep.source_raster);
        write_ppm(em.path("after.ppm"), *rep.edited_raster);
        em.record("before.ppm");
        em.record("after.ppm");
    } else {
        throw SchemaError("key model must name analytic, analytic-entangled, toy-joint or "
                          "toy-cross");
    }

    em.file("edit_report.json", rep.to_json());
    em.csv("trace.csv", trace_table(rep.trace));
    CsvTable factors;
    factors.header = {"factor", "source", "edited", "drift", "is_target"};
    for (int i = 0; i < rep.source_factors.size(); ++i) {
        bool is_target = false;
        for (int t : rep.target_indices)
            is_target = is_target || t == i;
        factors.rows.push_back({rep.factor_names[static_cast<std::size_t>(i)],
                                format_double(rep.source_factors(i)),
                                format_double(rep.edited_factors(i)),
                                format_double(rep.drift(i)), is_target ? "1" : "0"});
    }
    em.csv("factors.csv", factors);
    if (!rep.trace.grad_norm.empty()) {
        PlotSeries s;
        s.label = "grad_norm";
        for (std::size_t i = 0; i < rep.trace.grad_norm.size(); ++i) {
            s.x.push_back(static_cast<double>(i));
            s.y.push_back(rep.trace.grad_norm[i]);
        }
        write_line_chart(em.path("trace.svg"), "identify-loop gradient norm", {s});
        em.record("trace.svg");
    }
}

void run_sde(const json& cfg, std::uint64_t seed, bool deterministic, Emitter& em) {
    check_keys(cfg, {"scenes", "seeds_per_scene", "strength", "guidance_scale",
                     "forward_fraction", "flip"});
    const int scenes = get_int(cfg, "scenes", 100);
    const int seeds_per_scene = get_int(cfg, "seeds_per_scene", 2);
    const double strength = get_num(cfg, "strength", 0.75);
    const std::string flip = get_str(cfg, "flip", "color");
    if (scenes < 1)
        throw SchemaError("key scenes must be positive");

    const SemanticVocabulary vocab = SemanticVocabulary::default_vocabulary();
    const NoiseSchedule sched = default_schedule();
    const SamplerConfig sampler = sampler_from(cfg, deterministic);
    const std::vector<std::string>* flip_values = vocab.values_of(flip);
    if (!flip_values || flip_values->size() < 2)
        throw SchemaError("key flip must name an attribute with at least two values");

    CsvTable table;
    table.header = {"variant", "scene", "conditioned_distance", "edited_distance", "ratio",
                    "total"};
    CsvTable summary;
    summary.header = {"variant", "mean_total"};
    for (const bool entangled : {false, true}) {
        const GaussianFactorModel model = GaussianFactorModel::make_synthetic(
            vocab, default_bindings(vocab), kTokenCount, kLatentWidth, 101, entangled);
        const std::string variant = entangled ? "entangled" : "disentangled";
        double mean_total = 0.0;
        for (int s = 0; s < scenes; ++s) {
            RngStream rng = derive_stream(seed, 0x5ce0ULL + static_cast<std::uint64_t>(s));
            std::vector<Token> prompt;
            Eigen::VectorXd f(model.factor_count());
            for (int i = 0; i < model.factor_count(); ++i) {
                const auto& b = model.bindings()[static_cast<std::size_t>(i)];
                const auto* values = vocab.values_of(b.attribute);
                const std::size_t pick = rng.below(values->size());
                prompt.push_back({b.attribute, (*values)[pick]});
                f(i) = model.value_of(i, (*values)[pick]);
            }
            std::vector<Token> flipped = prompt;
            for (auto& tok : flipped)
                if (tok.first == flip) {
                    std::size_t cur = 0;
                    for (std::size_t k = 0; k < flip_values->size(); ++k)
                        if ((*flip_values)[k] == tok.second)
                            cur = k;
                    tok.second = (*flip_values)[(cur + 1) % flip_values->size()];
                }
            const LatentImage x = model.sample_latent(f);
            const SDEReport rep = sde_metric(
                x, vocab.encode_prompt(prompt), vocab.encode_prompt(flipped), model, sampler,
                sched, strength, seeds_per_scene,
                splitmix64(seed ^ static_cast<std::uint64_t>(s)));
            table.rows.push_back({variant, std::to_string(s),
                                  format_double(rep.conditioned_distance),
                                  format_double(rep.edited_distance), format_double(rep.ratio),
                                  format_double(rep.total)});
            mean_total += rep.total;
        }
        summary.rows.push_back({variant, format_double(mean_total / scenes)});
    }
    em.csv("sde.csv", table);
    em.csv("sde_summary.csv", summary);
}

void run_theory(const json& cfg, std::uint64_t seed, int jobs, Emitter& em) {
    check_keys(cfg, {"m_list", "d_list", "alpha_list", "c_list", "samples", "prop2_m", "prop2_d"});
    const std::vector<double> m_list = get_num_list(cfg, "m_list", {1, 2, 4});
    const std::vector<double> d_list = get_num_list(cfg, "d_list", {4, 16, 64});
    const std::vector<double> alpha_list = get_num_list(cfg, "alpha_list", {1, 2});
    const std::vector<double> c_list = get_num_list(cfg, "c_list", {0.01, 0.1, 0.5, 1.0});
    const int samples = get_int(cfg, "samples", 200000);
    const int p2m = get_int(cfg, "prop2_m", 8);
    const int p2d = get_int(cfg, "prop2_d", 32);

    CsvTable t1;
    t1.header = {"m",        "d",        "alpha",         "c",           "tau",
                 "estimate", "analytic", "std_error",     "claimed_bound", "bound_holds"};
    for (double md : m_list)
        for (double dd : d_list)
            for (double ad : alpha_list)
                for (double cc : c_list) {
                    const Prop1Report rep =
                        prop1_mc(static_cast<int>(md), static_cast<int>(dd), ad, cc,
                                 static_cast<std::uint64_t>(samples), seed, jobs);
                    t1.rows.push_back({std::to_string(rep.m), std::to_string(rep.d),
                                       format_double(rep.alpha), format_double(rep.c),
                                       format_double(rep.tau), format_double(rep.estimate),
                                       format_double(rep.analytic), format_double(rep.std_error),
                                       format_double(rep.claimed_bound),
                                       rep.bound_holds ? "1" : "0"});
                }
    em.csv("prop1.csv", t1);

    RngStream rng = derive_stream(seed, 0x9202ULL);
    std::vector<Eigen::VectorXd> dirs;
    for (int i = 0; i < p2m; ++i) {
        Eigen::VectorXd v = rng.normal_matrix(p2d, 1);
        dirs.push_back(v / v.norm());
    }
    const Prop2Report p2 = prop2_check(dirs);
    CsvTable t2;
    t2.header = {"m", "d", "max_cross_inner", "max_norm_error"};
    t2.rows.push_back({std::to_string(p2m), std::to_string(p2d),
                       format_double(p2.max_cross_inner), format_double(p2.max_norm_error)});
    em.csv("prop2.csv", t2);
    em.file("summary.txt",
            "orthogonality max cross inner product: " + format_double(p2.max_cross_inner) +
                "\nextension max norm error: " + format_double(p2.max_norm_error) + "\n");
}

void run_train(const json& cfg, std::uint64_t seed, Emitter& em) {
    check_keys(cfg, {"mode", "scenes", "epochs", "batch_size", "learning_rate", "momentum",
                     "model_name"});
    const std::string mode = get_str(cfg, "mode", "joint");
    if (mode != "joint" && mode != "cross")
        throw SchemaError("key mode must be joint or cross");
    const int scene_count = get_int(cfg, "scenes", 60);

    ToyConfig tc;
    tc.mode = mode == "joint" ? ConditioningMode::JointSelfAttention
                              : ConditioningMode::CrossAttention;
    ToyAttentionModel model(tc, splitmix64(seed ^ 0x70eULL));

    RngStream rng = derive_stream(seed, 0xdadaULL);
    const std::vector<Scene> scenes = sample_dataset(scene_count, rng);
    TrainConfig train_cfg;
    train_cfg.epochs = get_int(cfg, "epochs", 20);
    train_cfg.batch_size = get_int(cfg, "batch_size", 16);
    train_cfg.learning_rate = get_num(cfg, "learning_rate", 0.05);
    train_cfg.momentum = get_num(cfg, "momentum", 0.9);
    train_cfg.seed = seed;

    const SemanticVocabulary vocab = SemanticVocabulary::default_vocabulary();
    const TrainResult result =
        train_denoiser(model, scenes, train_cfg, default_schedule(), vocab, PatchCodec());

    const std::string model_name = get_str(cfg, "model_name", "model_" + mode);
    model.save(em.path(model_name));
    em.record(model_name + ".bin");
    em.record(model_name + ".json");

    CsvTable loss;
    loss.header = {"epoch", "loss"};
    PlotSeries s;
    s.label = "train_loss";
    for (std::size_t e = 0; e < result.epoch_loss.size(); ++e) {
        loss.rows.push_back({std::to_string(e), format_double(result.epoch_loss[e])});
        s.x.push_back(static_cast<double>(e));
        s.y.push_back(result.epoch_loss[e]);
    }
    em.csv("loss.csv", loss);
    write_line_chart(em.path("loss.svg"), "denoiser training loss (" + mode + ")", {s});
    em.record("loss.svg");
}

void run_probe(const json& cfg, std::uint64_t seed, bool deterministic, Emitter& em) {
    check_keys(cfg, {"train_scenes", "epochs", "batch_size", "learning_rate", "momentum",
                     "per_color", "guidance_scale", "forward_fraction"});
    const int scene_count = get_int(cfg, "train_scenes", 120);
    const int per_color = get_int(cfg, "per_color", 100);
    const SemanticVocabulary vocab = SemanticVocabulary::default_vocabulary();
    const NoiseSchedule sched = default_schedule();
    const SamplerConfig sampler = sampler_from(cfg, deterministic);
    const std::vector<std::string> colors = {"red", "green", "blue"};
    const PatchCodec codec;

    TrainConfig train_cfg;
    train_cfg.epochs = get_int(cfg, "epochs", 150);
    train_cfg.batch_size = get_int(cfg, "batch_size", 16);
    train_cfg.learning_rate = get_num(cfg, "learning_rate", 0.05);
    train_cfg.momentum = get_num(cfg, "momentum", 0.9);
    train_cfg.seed = seed;

    CsvTable table;
    table.header = {"mode", "layer", "transfer_accuracy", "self_accuracy"};
    CsvTable summary;
    summary.header = {"mode", "avg_transfer", "avg_self", "distance_to_chance"};
    std::vector<std::string> bar_labels;
    std::vector<double> bar_values;
    for (const std::string mode : {"joint", "cross"}) {
        ToyConfig tc;
        tc.mode = mode == "joint" ? ConditioningMode::JointSelfAttention
                                  : ConditioningMode::CrossAttention;
        ToyAttentionModel model(tc, splitmix64(seed ^ (mode == "joint" ? 0x1ULL : 0x2ULL)));
        RngStream rng = derive_stream(seed, mode == "joint" ? 0xda1ULL : 0xda2ULL);
        const std::vector<Scene> scenes = sample_dataset(scene_count, rng);
        train_denoiser(model, scenes, train_cfg, sched, vocab, codec);

        const std::vector<ProbeRecord> records = build_probe_dataset(
            model, vocab, colors, per_color, sampler, sched,
            splitmix64(seed ^ (mode == "joint" ? 0x11ULL : 0x22ULL)));
        const ProbeResult transfer = eval_transfer(records, colors, mode);
        const ProbeResult self = eval_self(records, colors, mode);
        for (std::size_t l = 0; l < transfer.layer_accuracy.size(); ++l)
            table.rows.push_back({mode, std::to_string(l),
                                  format_double(transfer.layer_accuracy[l]),
                                  format_double(self.layer_accuracy[l])});
        summary.rows.push_back({mode, format_double(transfer.average),
                                format_double(self.average),
                                format_double(std::abs(transfer.average - 0.5))});
        bar_labels.push_back(mode);
        bar_values.push_back(transfer.average);
    }
    em.csv("probe.csv", table);
    em.csv("probe_summary.csv", summary);
    write_bar_chart(em.path("probe.svg"), "probe transfer accuracy", bar_labels, bar_values);
    em.record("probe.svg");
}

void run_sweep(const json& cfg, std::uint64_t seed, bool deterministic, Emitter& em) {
    check_keys(cfg, {"parameter", "values", "seeds", "attribute", "source_value", "target_value",
                     "degree", "lambda", "iterations", "step_start", "step_end", "guidance_scale",
                     "forward_fraction"});
    const std::string parameter = get_str(cfg, "parameter", "alpha");
    if (parameter != "alpha" && parameter != "lambda")
        throw SchemaError("key parameter must be alpha or lambda");
    const std::vector<double> values = get_num_list(cfg, "values", {});
    if (values.empty())
        throw SchemaError("key values must be a nonempty array");
    const int seeds = get_int(cfg, "seeds", 5);

    const SemanticVocabulary vocab = SemanticVocabulary::default_vocabulary();
    const NoiseSchedule sched = default_schedule();
    const GaussianFactorModel model = GaussianFactorModel::make_synthetic(
        vocab, default_bindings(vocab), kTokenCount, kLatentWidth, 101, false);

    CsvTable table;
    table.header = {"parameter", "value", "seed", "target_factor", "max_off_target_drift",
                    "image_direction_norm", "failed"};
    PlotSeries mean_series;
    mean_series.label = "mean_target_factor";
    for (double value : values) {
        double mean_target = 0.0;
        int ok = 0;
        for (int s = 0; s < seeds; ++s) {
            EditRequest req;
            req.seed = splitmix64(seed ^ static_cast<std::uint64_t>(s));
            req.sampler = sampler_from(cfg, deterministic);
            req.hsds = hsds_from(cfg);
            EditEntry entry;
            entry.attribute = get_str(cfg, "attribute", "color");
            entry.source_value = get_str(cfg, "source_value", "red");
            entry.target_value = get_str(cfg, "target_value", "blue");
            entry.degree = get_num(cfg, "degree", 1.0);
            if (parameter == "alpha")
                entry.degree = value;
            else
                req.hsds.lambda = value;
            req.plan.entries.push_back(entry);
            req.source_prompt = full_prompt(vocab, entry.attribute, entry.source_value);
            try {
                const EditReport rep = eim_edit_analytic(req, model, vocab, sched);
                const int ti = rep.target_indices.front();
                double drift = 0.0;
                for (int i = 0; i < rep.drift.size(); ++i)
                    if (i != ti)
                        drift = std::max(drift, rep.drift(i));
                table.rows.push_back({parameter, format_double(value), std::to_string(s),
                                      format_double(rep.edited_factors(ti)),
                                      format_double(drift), format_double(rep.n_zt.delta.norm()),
                                      "0"});
                mean_target += rep.edited_factors(ti);
                ++ok;
            } catch (const std::exception&) {
                // partial failures stay in the table; the sweep keeps going
                table.rows.push_back(
                    {parameter, format_double(value), std::to_string(s), "", "", "", "1"});
            }
        }
        mean_series.x.push_back(value);
        mean_series.y.push_back(ok ? mean_target / ok : 0.0);
    }
    em.csv("sweep.csv", table);
    write_line_chart(em.path("sweep.svg"), "sweep over " + parameter, {mean_series});
    em.record("sweep.svg");
}

void run_semantic_loss(const json& cfg, std::uint64_t seed, bool deterministic, Emitter& em) {
    check_keys(cfg, {"strengths", "seeds", "guidance_scale", "forward_fraction"});
    const std::vector<double> strengths =
        get_num_list(cfg, "strengths", {0.15, 0.35, 0.55, 0.75});
    const int seeds = get_int(cfg, "seeds", 64);

    const SemanticVocabulary vocab = SemanticVocabulary::default_vocabulary();
    const NoiseSchedule sched = default_schedule();
    const SamplerConfig sampler = sampler_from(cfg, deterministic);
    const GaussianFactorModel model = GaussianFactorModel::make_synthetic(
        vocab, default_bindings(vocab), kTokenCount, kLatentWidth, 101, false);

    std::vector<Token> prompt;
    Eigen::VectorXd f(model.factor_count());
    for (int i = 0; i < model.factor_count(); ++i) {
        const auto& b = model.bindings()[static_cast<std::size_t>(i)];
        prompt.push_back({b.attribute, b.values.begin()->first});
        f(i) = b.values.begin()->second;
    }
    const TextEmbedding cond = vocab.encode_prompt(prompt);
    const TextEmbedding uncond = vocab.null_prompt();

    CsvTable table;
    table.header = {"arm", "strength", "factor", "std", "mean", "oracle_std"};
    PlotSeries s_unc, s_cond;
    s_unc.label = "unconditioned_std";
    s_cond.label = "conditioned_std";
    for (const bool conditioned : {true, false}) {
        const TextEmbedding& arm_cond = conditioned ? cond : uncond;
        const std::vector<SemanticLossRow> rows = semantic_loss_sweep(
            model, f, arm_cond, strengths, sampler, sched, seeds,
            splitmix64(seed ^ (conditioned ? 0xc0ULL : 0x0cULL)));
        for (const auto& row : rows) {
            const int t_star = strength_to_timestep(row.strength, sched.step_count);
            const Eigen::VectorXd oracle =
                sampler_factor_std(model, arm_cond, uncond, sampler, sched, t_star);
            for (int i = 0; i < row.factor_std.size(); ++i)
                table.rows.push_back(
                    {conditioned ? "conditioned" : "unconditioned", format_double(row.strength),
                     model.bindings()[static_cast<std::size_t>(i)].attribute,
                     format_double(row.factor_std(i)), format_double(row.factor_mean(i)),
                     format_double(oracle(i))});
            const double mean_std = row.factor_std.mean();
            (conditioned ? s_cond : s_unc).x.push_back(row.strength);
            (conditioned ? s_cond : s_unc).y.push_back(mean_std);
        }
    }
    em.csv("semantic_loss.csv", table);
    write_line_chart(em.path("semantic_loss.svg"), "recovered-factor spread vs forward strength",
                     {s_cond, s_unc});
    em.record("semantic_loss.svg");
}

} // namespace

RunOutcome run_experiment(const std::string& config_json_text, const RunOverrides& overrides) {
    RunOutcome outcome;
    json cfg;
    try {
        cfg = json::parse(config_json_text);
        if (!cfg.is_object())
            throw SchemaError("config must be a JSON object");
        if (!cfg.contains("command") || !cfg["command"].is_string())
            throw SchemaError("missing key: command");
    } catch (const SchemaError& e) {
        outcome.exit_code = 2;
        outcome.error = e.what();
        outcome.stage = "validate";
        return outcome;
    } catch (const std::exception& e) {
        outcome.exit_code = 2;
        outcome.error = std::string("config parse failure: ") + e.what();
        outcome.stage = "parse";
        return outcome;
    }

    const auto started = std::chrono::steady_clock::now();
    try {
        const std::string command = cfg["command"].get<std::string>();
        if (overrides.expect_command && *overrides.expect_command != command)
            throw SchemaError("config command " + command + " does not match invocation " +
                              *overrides.expect_command);
        std::uint64_t seed = static_cast<std::uint64_t>(get_num(cfg, "seed", 0));
        if (overrides.seed)
            seed = *overrides.seed;
        int jobs = get_int(cfg, "jobs", 1);
        if (overrides.jobs)
            jobs = *overrides.jobs;
        const bool deterministic =
            overrides.deterministic || cfg.value("deterministic", false);

        std::string out_dir = get_str(cfg, "out", "");
        if (overrides.out)
            out_dir = *overrides.out;
        if (out_dir.empty()) {
            const char* env = std::getenv("EIMLAB_OUT");
            out_dir = (env && *env ? std::string(env) : std::string("eimlab_out")) + "/" + command;
        }
        std::filesystem::create_directories(out_dir);
        outcome.out_dir = out_dir;

        // the hash covers semantics, not placement or scheduling
        json effective = cfg;
        effective.erase("out");
        effective.erase("jobs");
        effective["seed"] = seed;
        effective["deterministic"] = deterministic;
        const std::string config_hash = hex64(fnv1a(effective.dump()));

        Emitter em;
        em.dir = out_dir;
        outcome.stage = command;
        if (command == "edit")
            run_edit(cfg, seed, deterministic, em);
        else if (command == "sde")
            run_sde(cfg, seed, deterministic, em);
        else if (command == "probe")
            run_probe(cfg, seed, deterministic, em);
        else if (command == "theory")
            run_theory(cfg, seed, jobs, em);
        else if (command == "train")
            run_train(cfg, seed, em);
        else if (command == "sweep")
            run_sweep(cfg, seed, deterministic, em);
        else if (command == "semantic-loss")
            run_semantic_loss(cfg, seed, deterministic, em);
        else
            throw SchemaError("unknown command: " + command);

        const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
                                 std::chrono::steady_clock::now() - started)
                                 .count();
        json manifest;
        manifest["version"] = "1.0.0";
        manifest["command"] = command;
        manifest["config_hash"] = config_hash;
        manifest["seed"] = seed;
        manifest["wall_clock_ms"] = elapsed;
        manifest["outputs"] = em.outputs;
        write_text_atomic(out_dir + "/manifest.json", manifest.dump(2) + "\n");
    } catch (const SchemaError& e) {
        outcome.exit_code = 2;
        outcome.error = e.what();
        if (outcome.stage.empty())
            outcome.stage = "validate";
    } catch (const std::exception& e) {
        outcome.exit_code = 1;
        outcome.error = e.what();
    }
    return outcome;
}

RunOutcome run_experiment_file(const std::string& config_path, const RunOverrides& overrides) {
    std::string text;
    try {
        text = read_text(config_path);
    } catch (const std::exception& e) {
        RunOutcome outcome;
        outcome.exit_code = 2;
        outcome.error = e.what();
        outcome.stage = "read-config";
        return outcome;
    }
    return run_experiment(text, overrides);
}

} // namespace eimlab
