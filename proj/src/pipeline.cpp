#include "eimlab/pipeline.hpp"

#include <cmath>
#include <stdexcept>

#include <json.hpp>

#include "eimlab/theory.hpp"

namespace eimlab {

std::pair<std::vector<Token>, std::vector<Token>> describe(const std::vector<Token>& source_prompt,
                                                           const EditPlan& plan,
                                                           const SemanticVocabulary& vocab) {
    std::vector<Token> t0 = source_prompt;
    std::vector<Token> t1 = source_prompt;
    for (const auto& entry : plan.entries) {
        if (!vocab.has_token({entry.attribute, entry.target_value}))
            throw std::invalid_argument("describe: vocabulary lacks token " + entry.attribute +
                                        "=" + entry.target_value);
        bool found = false;
        for (std::size_t i = 0; i < t1.size(); ++i) {
            if (t1[i].first == entry.attribute) {
                if (t0[i].second != entry.source_value)
                    throw std::invalid_argument("describe: prompt names " + entry.attribute + "=" +
                                                t0[i].second + " but plan expects " +
                                                entry.source_value);
                t1[i].second = entry.target_value;
                found = true;
            }
        }
        if (!found)
            throw std::invalid_argument("describe: prompt lacks attribute " + entry.attribute);
    }
    return {std::move(t0), std::move(t1)};
}

namespace {

struct EditText {
    TextEmbedding c0, c1, c_tilde, z_s;
    EditDirection n_c;
};

EditText build_edit_text(const EditRequest& req, const SemanticVocabulary& vocab) {
    auto [t0, t1] = describe(req.source_prompt, req.plan, vocab);
    EditText et;
    et.c0 = vocab.encode_prompt(t0);
    et.c1 = vocab.encode_prompt(t1);
    et.c_tilde = multi_attr_manipulate(et.c0, et.c1, req.plan);
    if (req.pooled_delta && et.c_tilde.length() > 0) {
        // broadcast the pooled shift onto every row
        const Eigen::RowVectorXd shift =
            (et.c_tilde.rows - et.c0.rows).colwise().mean();
        et.c_tilde.rows.rowwise() += shift;
    }
    et.n_c.subspace = Subspace::Text;
    et.n_c.delta = et.c_tilde.rows - et.c0.rows;
    et.n_c.degree = req.plan.entries.empty() ? 0.0 : req.plan.entries.front().degree;
    // z_s describes the source; against c~ its prediction gap is the constant
    // pull of the identify loop
    if (req.zs_context_inclusive) {
        et.z_s = vocab.encode_prompt(t0);
    } else {
        std::vector<Token> attr_tokens;
        for (const auto& entry : req.plan.entries)
            attr_tokens.push_back({entry.attribute, entry.source_value});
        et.z_s = attr_tokens.empty() ? vocab.encode_prompt(t0)
                                     : vocab.encode_prompt(attr_tokens);
    }
    return et;
}

double signed_distance(const TextEmbedding& c0, const TextEmbedding& c1,
                       const Eigen::MatrixXd& point) {
    Eigen::MatrixXd dir = c1.rows - c0.rows;
    const double norm = dir.norm();
    if (norm < 1e-12)
        return 0.0;
    const Eigen::MatrixXd mid = 0.5 * (c0.rows + c1.rows);
    return ((point - mid).array() * dir.array()).sum() / norm;
}

} // namespace

EditReport eim_edit_analytic(const EditRequest& req, const GaussianFactorModel& model,
                             const SemanticVocabulary& vocab, const NoiseSchedule& sched) {
    EditText et = build_edit_text(req, vocab);

    // Encode
    Eigen::VectorXd f_src;
    if (req.source_factors) {
        f_src = *req.source_factors;
    } else {
        f_src.resize(model.factor_count());
        f_src.setZero();
        for (int i = 0; i < model.factor_count(); ++i) {
            const auto& binding = model.bindings()[static_cast<std::size_t>(i)];
            for (const auto& tok : req.source_prompt)
                if (tok.first == binding.attribute)
                    f_src(i) = model.value_of(i, tok.second);
        }
    }
    const LatentImage z0 = model.sample_latent(f_src);
    RngStream rng = derive_stream(req.seed, 0xed17ULL);
    const int t_star = strength_to_timestep(req.sampler.forward_fraction, sched.step_count);
    const Eigen::MatrixXd eps = rng.normal_matrix(z0.token_count(), z0.width());
    const LatentImage z_t = forward_noise(z0, t_star, eps, sched);

    // Identify
    EditReport rep;
    HSDSConfig hsds = req.hsds;
    hsds.timestep = t_star;
    EditDirection n_zt;
    n_zt.subspace = Subspace::Image;
    n_zt.delta = Eigen::MatrixXd::Zero(z0.token_count(), z0.width());
    if (hsds.iterations > 0) {
        auto [dir, trace] = identify_image_direction(model, z_t, et.c_tilde, et.z_s, hsds, sched);
        n_zt = std::move(dir);
        rep.trace = std::move(trace);
    }

    // Manipulate
    LatentImage z_t_edit = z_t;
    const double image_scale =
        req.scale_image_direction && !req.plan.entries.empty() ? req.plan.entries.front().degree
                                                               : 1.0;
    z_t_edit.tokens += image_scale * n_zt.delta;
    const LatentImage edited =
        reverse_sample(z_t_edit, et.c_tilde, vocab.null_prompt(), model, req.sampler, sched, rng);

    rep.source_factors = f_src;
    rep.edited_factors = model.recover_factors(edited);
    rep.drift = (rep.edited_factors - rep.source_factors).cwiseAbs();
    for (const auto& entry : req.plan.entries)
        for (int i = 0; i < model.factor_count(); ++i)
            if (model.bindings()[static_cast<std::size_t>(i)].attribute == entry.attribute)
                rep.target_indices.push_back(i);
    for (const auto& b : model.bindings())
        rep.factor_names.push_back(b.attribute);
    rep.c0 = et.c0;
    rep.c_tilde = et.c_tilde;
    rep.n_c = et.n_c;
    rep.n_zt = n_zt;
    rep.source_latent = z0;
    rep.edited_latent = edited;
    rep.text_distance_before = signed_distance(et.c0, et.c1, et.c0.rows);
    rep.text_distance_after = signed_distance(et.c0, et.c1, et.c_tilde.rows);
    return rep;
}

EditReport eim_edit_scene(const EditRequest& req, const Denoiser& den, const PatchCodec& codec,
                          const SemanticVocabulary& vocab, const NoiseSchedule& sched) {
    if (!req.scene)
        throw std::invalid_argument("eim_edit_scene: request carries no scene");
    EditRequest local = req;
    if (local.source_prompt.empty())
        local.source_prompt = req.scene->prompt;
    EditText et = build_edit_text(local, vocab);

    const LatentImage z0 = codec.encode(req.scene->raster);
    RngStream rng = derive_stream(req.seed, 0xed17ULL);
    const int t_star = strength_to_timestep(req.sampler.forward_fraction, sched.step_count);
    const Eigen::MatrixXd eps = rng.normal_matrix(z0.token_count(), z0.width());
    const LatentImage z_t = forward_noise(z0, t_star, eps, sched);

    EditReport rep;
    HSDSConfig hsds = req.hsds;
    hsds.timestep = t_star;
    EditDirection n_zt;
    n_zt.subspace = Subspace::Image;
    n_zt.delta = Eigen::MatrixXd::Zero(z0.token_count(), z0.width());
    if (hsds.iterations > 0) {
        auto [dir, trace] = identify_image_direction(den, z_t, et.c_tilde, et.z_s, hsds, sched);
        n_zt = std::move(dir);
        rep.trace = std::move(trace);
    }

    LatentImage z_t_edit = z_t;
    z_t_edit.tokens += n_zt.delta;
    const LatentImage edited =
        reverse_sample(z_t_edit, et.c_tilde, vocab.null_prompt(), den, req.sampler, sched, rng);

    const Raster edited_raster = codec.decode(edited);
    const FactorVector f_est = estimate_factors_from_raster(edited_raster);
    const FactorVector& f_src = req.scene->factors;
    rep.factor_names = {"color", "object", "size", "pos_x", "pos_y"};
    rep.source_factors.resize(5);
    rep.source_factors << f_src.color, f_src.object, f_src.size, f_src.pos_x, f_src.pos_y;
    rep.edited_factors.resize(5);
    rep.edited_factors << f_est.color, f_est.object, f_est.size, f_est.pos_x, f_est.pos_y;
    rep.drift = (rep.edited_factors - rep.source_factors).cwiseAbs();
    for (std::size_t fi = 0; fi < rep.factor_names.size(); ++fi)
        for (const auto& entry : req.plan.entries)
            if (rep.factor_names[fi] == entry.attribute)
                rep.target_indices.push_back(static_cast<int>(fi));

    rep.c0 = et.c0;
    rep.c_tilde = et.c_tilde;
    rep.n_c = et.n_c;
    rep.n_zt = n_zt;
    rep.source_latent = z0;
    rep.edited_latent = edited;
    rep.source_raster = req.scene->raster;
    rep.edited_raster = edited_raster;
    rep.text_distance_before = signed_distance(et.c0, et.c1, et.c0.rows);
    rep.text_distance_after = signed_distance(et.c0, et.c1, et.c_tilde.rows);
    return rep;
}

EditReport reverse_edit(const EditReport& report, const EditRequest& req,
                        const GaussianFactorModel& model, const SemanticVocabulary& vocab,
                        const NoiseSchedule& sched) {
    if (report.n_c.delta.size() == 0 || report.n_zt.delta.size() == 0)
        throw std::invalid_argument("reverse_edit: report carries no directions");

    RngStream rng = derive_stream(req.seed, 0x4eedULL);
    const int t_star = strength_to_timestep(req.sampler.forward_fraction, sched.step_count);
    const Eigen::MatrixXd eps =
        rng.normal_matrix(report.edited_latent.token_count(), report.edited_latent.width());
    LatentImage z_t = forward_noise(report.edited_latent, t_star, eps, sched);
    z_t.tokens -= report.n_zt.delta;

    TextEmbedding cond = report.c_tilde;
    cond.rows -= report.n_c.delta;

    const LatentImage recovered =
        reverse_sample(z_t, cond, vocab.null_prompt(), model, req.sampler, sched, rng);

    EditReport rep;
    rep.factor_names = report.factor_names;
    rep.source_factors = report.source_factors;
    rep.edited_factors = model.recover_factors(recovered);
    rep.drift = (rep.edited_factors - rep.source_factors).cwiseAbs();
    rep.target_indices = report.target_indices;
    rep.c0 = report.c0;
    rep.c_tilde = cond;
    rep.n_c = report.n_c;
    rep.n_c.delta = -rep.n_c.delta;
    rep.n_zt = report.n_zt;
    rep.n_zt.delta = -rep.n_zt.delta;
    rep.source_latent = report.source_latent;
    rep.edited_latent = recovered;
    // the signed hyperplane distance retraces across the reverse edit
    rep.text_distance_before = report.text_distance_after;
    rep.text_distance_after = report.text_distance_before;
    return rep;
}

std::vector<ThresholdRow> threshold_sweep(const EditRequest& req_template,
                                          const std::vector<double>& alphas,
                                          const GaussianFactorModel& model,
                                          const SemanticVocabulary& vocab,
                                          const NoiseSchedule& sched) {
    if (alphas.empty())
        throw std::invalid_argument("threshold_sweep: empty alpha list");
    std::vector<ThresholdRow> rows;
    for (const double alpha : alphas) {
        EditRequest req = req_template;
        for (auto& entry : req.plan.entries)
            entry.degree = alpha;
        const EditReport rep = eim_edit_analytic(req, model, vocab, sched);

        ThresholdRow row;
        row.alpha = alpha;
        double target_delta = 0.0;
        for (int ti : rep.target_indices)
            target_delta = std::max(target_delta, std::abs(rep.edited_factors(ti) -
                                                           rep.source_factors(ti)));
        row.target_delta = target_delta;
        double drift = 0.0;
        for (int i = 0; i < rep.drift.size(); ++i) {
            bool is_target = false;
            for (int ti : rep.target_indices)
                is_target = is_target || ti == i;
            if (!is_target)
                drift = std::max(drift, rep.drift(i));
        }
        row.max_off_target_drift = drift;

        // |n_c^T z~| with the unit text direction against the manipulated rows
        Eigen::MatrixXd dir = rep.n_c.delta;
        const double norm = dir.norm();
        row.boundary_distance =
            norm < 1e-12 ? 0.0 : std::abs((rep.c_tilde.rows.array() * dir.array()).sum() / norm);
        row.tau = tau_threshold(std::max(alpha, 1e-9), vocab.width());
        row.within_bound = alpha == 0.0 || row.boundary_distance <= row.tau;
        rows.push_back(row);
    }
    return rows;
}

std::string EditReport::to_json() const {
    nlohmann::json j;
    j["factor_names"] = factor_names;
    j["source_factors"] = std::vector<double>(source_factors.data(),
                                              source_factors.data() + source_factors.size());
    j["edited_factors"] = std::vector<double>(edited_factors.data(),
                                              edited_factors.data() + edited_factors.size());
    j["drift"] = std::vector<double>(drift.data(), drift.data() + drift.size());
    j["target_indices"] = target_indices;
    j["text_distance_before"] = text_distance_before;
    j["text_distance_after"] = text_distance_after;
    j["n_c_norm"] = n_c.delta.size() ? n_c.delta.norm() : 0.0;
    j["n_zt_norm"] = n_zt.delta.size() ? n_zt.delta.norm() : 0.0;
    return j.dump(2);
}

} // namespace eimlab
