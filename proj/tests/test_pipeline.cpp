#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include <json.hpp>

#include "eimlab/pipeline.hpp"

using namespace eimlab;

namespace {

struct Lab {
    SemanticVocabulary vocab = SemanticVocabulary::default_vocabulary();
    NoiseSchedule sched = default_schedule();
    GaussianFactorModel model = GaussianFactorModel::make_synthetic(
        vocab, default_bindings(vocab), 16, vocab.width(), 101);

    std::vector<Token> full_prompt() const {
        std::vector<Token> p;
        for (const auto& [attr, values] : vocab.attributes())
            p.push_back({attr, values.front()});
        return p;
    }

    EditRequest color_request(double degree, std::uint64_t seed) const {
        EditRequest req;
        req.source_prompt = full_prompt(); // color=red (0.2)
        req.plan.entries = {{"color", "red", "blue", degree}};
        req.seed = seed;
        return req;
    }
};

} // namespace

TEST_CASE("describe") {
    Lab lab;
    const std::vector<Token> prompt = lab.full_prompt();

    SUBCASE("empty plan copies the prompt") {
        const auto [t0, t1] = describe(prompt, EditPlan{}, lab.vocab);
        CHECK(t0 == prompt);
        CHECK(t1 == prompt);
    }

    SUBCASE("token diff count matches the plan size") {
        EditPlan one;
        one.entries = {{"color", "red", "blue", 1.0}};
        const auto [a0, a1] = describe(prompt, one, lab.vocab);
        int diffs = 0;
        for (std::size_t i = 0; i < a0.size(); ++i)
            diffs += a0[i] != a1[i];
        CHECK(diffs == 1);

        EditPlan two = one;
        two.entries.push_back({"object", "square", "circle", 1.0});
        const auto [b0, b1] = describe(prompt, two, lab.vocab);
        diffs = 0;
        for (std::size_t i = 0; i < b0.size(); ++i)
            diffs += b0[i] != b1[i];
        CHECK(diffs == 2);
    }

    SUBCASE("unknown target token rejected") {
        EditPlan bad;
        bad.entries = {{"color", "red", "chartreuse", 1.0}};
        CHECK_THROWS(describe(prompt, bad, lab.vocab));
        EditPlan absent;
        absent.entries = {{"temperature", "cold", "hot", 1.0}};
        CHECK_THROWS(describe(prompt, absent, lab.vocab));
    }
}

TEST_CASE("null edit stays at the reconstruction baseline") {
    Lab lab;
    EditRequest req = lab.color_request(0.0, 3);
    req.hsds.iterations = 0;
    const EditReport rep = eim_edit_analytic(req, lab.model, lab.vocab, lab.sched);
    CHECK(rep.n_c.delta.cwiseAbs().maxCoeff() == 0.0);
    CHECK(rep.n_zt.delta.cwiseAbs().maxCoeff() == 0.0);
    // pure reconstruction: conditioned factors within sampler noise
    CHECK(rep.drift.maxCoeff() < 0.15);
    CHECK(rep.edited_latent.timestep == 0);
}

TEST_CASE("effectiveness and decomposability over 50 seeds") {
    Lab lab;
    double target_err = 0.0, off_drift = 0.0;
    const int seeds = 50;
    for (int s = 0; s < seeds; ++s) {
        const EditRequest req = lab.color_request(1.0, 1000 + static_cast<std::uint64_t>(s));
        const EditReport rep = eim_edit_analytic(req, lab.model, lab.vocab, lab.sched);
        REQUIRE(rep.target_indices.size() == 1);
        const int ti = rep.target_indices[0];
        target_err += std::abs(rep.edited_factors(ti) - 0.8); // blue binds to 0.8
        double seed_off = 0.0;
        for (int i = 0; i < rep.drift.size(); ++i)
            if (i != ti)
                seed_off = std::max(seed_off, rep.drift(i));
        off_drift += seed_off;
    }
    CHECK(target_err / seeds < 0.05);
    CHECK(off_drift / seeds < 0.05);
}

TEST_CASE("target factor strictly monotone in alpha") {
    Lab lab;
    double prev = -1.0;
    for (const double alpha : {0.2, 0.4, 0.6, 0.8, 1.0}) {
        const EditRequest req = lab.color_request(alpha, 7);
        const EditReport rep = eim_edit_analytic(req, lab.model, lab.vocab, lab.sched);
        const double value = rep.edited_factors(rep.target_indices[0]);
        CHECK(value > prev);
        prev = value;
    }
}

TEST_CASE("two-attribute edit matches the single-attribute outcomes") {
    Lab lab;
    EditRequest both = lab.color_request(1.0, 11);
    both.plan.entries.push_back({"object", "square", "circle", 1.0});
    const EditReport rb = eim_edit_analytic(both, lab.model, lab.vocab, lab.sched);

    const EditRequest only_color = lab.color_request(1.0, 11);
    const EditReport rc = eim_edit_analytic(only_color, lab.model, lab.vocab, lab.sched);

    EditRequest only_object = lab.color_request(1.0, 11);
    only_object.plan.entries = {{"object", "square", "circle", 1.0}};
    const EditReport ro = eim_edit_analytic(only_object, lab.model, lab.vocab, lab.sched);

    CHECK(std::abs(rb.edited_factors(0) - rc.edited_factors(0)) < 0.05);
    CHECK(std::abs(rb.edited_factors(1) - ro.edited_factors(1)) < 0.05);
}

TEST_CASE("reverse edit returns to the source") {
    Lab lab;
    double mean_err = 0.0;
    const int seeds = 20;
    for (int s = 0; s < seeds; ++s) {
        const EditRequest req = lab.color_request(1.0, 500 + static_cast<std::uint64_t>(s));
        const EditReport rep = eim_edit_analytic(req, lab.model, lab.vocab, lab.sched);
        const EditReport back = reverse_edit(rep, req, lab.model, lab.vocab, lab.sched);
        mean_err += (back.edited_factors - rep.source_factors).cwiseAbs().maxCoeff() / seeds;
        if (s == 0) {
            // the signed hyperplane distance flips across the edit
            CHECK(rep.text_distance_before < 0.0);
            CHECK(rep.text_distance_after > 0.0);
            CHECK(back.text_distance_before == rep.text_distance_after);
            CHECK(back.text_distance_after == rep.text_distance_before);
        }
    }
    CHECK(mean_err < 0.05);
}

TEST_CASE("reverse of a null edit is a null edit") {
    Lab lab;
    EditRequest req = lab.color_request(0.0, 13);
    req.hsds.iterations = 1; // keep a (zero) direction so reverse_edit runs
    const EditReport rep = eim_edit_analytic(req, lab.model, lab.vocab, lab.sched);
    CHECK(rep.n_c.delta.cwiseAbs().maxCoeff() == 0.0);
    CHECK(rep.n_zt.delta.cwiseAbs().maxCoeff() < 1e-12);
    const EditReport back = reverse_edit(rep, req, lab.model, lab.vocab, lab.sched);
    CHECK((back.edited_factors - rep.source_factors).cwiseAbs().maxCoeff() < 0.15);

    EditReport empty;
    CHECK_THROWS(reverse_edit(empty, req, lab.model, lab.vocab, lab.sched));
}

TEST_CASE("threshold sweep") {
    Lab lab;

    SUBCASE("alpha zero row is inert and tau matches the formula") {
        const EditRequest req = lab.color_request(1.0, 17);
        const auto rows =
            threshold_sweep(req, {0.0, 0.5, 1.0}, lab.model, lab.vocab, lab.sched);
        REQUIRE(rows.size() == 3);
        // the alpha = 0 row is pure reconstruction; only sampler noise remains
        CHECK(rows[0].target_delta < 0.05);
        CHECK(rows[0].within_bound);
        const int d = lab.vocab.width();
        CHECK(rows[2].tau ==
              doctest::Approx(2.0 * std::sqrt(static_cast<double>(d) / (d - 2)))
                  .epsilon(1e-12));
        for (const auto& row : rows)
            CHECK(row.within_bound == (row.alpha == 0.0 || row.boundary_distance <= row.tau));
    }

    SUBCASE("oversized alpha drifts on the entangled model") {
        const GaussianFactorModel ent = GaussianFactorModel::make_synthetic(
            lab.vocab, default_bindings(lab.vocab), 16, lab.vocab.width(), 101, true);
        const EditRequest req = lab.color_request(1.0, 19);
        const auto rows = threshold_sweep(req, {0.5, 5.0}, ent, lab.vocab, lab.sched);
        REQUIRE(rows.size() == 2);
        CHECK(rows[1].max_off_target_drift > rows[0].max_off_target_drift);
    }

    SUBCASE("empty alpha list rejected") {
        const EditRequest req = lab.color_request(1.0, 23);
        CHECK_THROWS(threshold_sweep(req, {}, lab.model, lab.vocab, lab.sched));
    }
}

TEST_CASE("edit report serializes to valid json") {
    Lab lab;
    const EditRequest req = lab.color_request(0.6, 29);
    const EditReport rep = eim_edit_analytic(req, lab.model, lab.vocab, lab.sched);
    const nlohmann::json j = nlohmann::json::parse(rep.to_json());
    CHECK(j.contains("factor_names"));
    CHECK(j.contains("source_factors"));
    CHECK(j.contains("edited_factors"));
    CHECK(j.contains("drift"));
    CHECK(j["drift"].size() == static_cast<std::size_t>(rep.drift.size()));
}
