#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "eimlab/distill.hpp"
#include "eimlab/gaussian_model.hpp"

using namespace eimlab;

namespace {

struct Lab {
    SemanticVocabulary vocab = SemanticVocabulary::default_vocabulary();
    NoiseSchedule sched = default_schedule();
    GaussianFactorModel model = GaussianFactorModel::make_synthetic(
        vocab, default_bindings(vocab), 16, vocab.width(), 101);
};

} // namespace

TEST_CASE("sds gradient") {
    Lab lab;
    const TextEmbedding cond =
        lab.vocab.encode_prompt({{"color", "blue"}, {"object", "square"}});

    SUBCASE("near-perfect predictor in the tight-prior limit") {
        std::vector<FactorBinding> bindings{{"hue", {{"lo", 0.2}, {"hi", 0.8}}},
                                            {"tone", {{"lo", 0.2}, {"hi", 0.8}}}};
        const SemanticVocabulary vocab(3, {{"hue", {"lo", "hi"}}, {"tone", {"lo", "hi"}}}, 8);
        const GaussianFactorModel ref =
            GaussianFactorModel::make_synthetic(vocab, bindings, 2, 2, 5);
        const GaussianFactorModel tight(vocab, bindings, ref.loading(), ref.base(),
                                        Eigen::MatrixXd::Identity(2, 2), 2, 2, 1e-12, 1.0);
        const TextEmbedding c = vocab.encode_prompt({{"hue", "hi"}, {"tone", "lo"}});
        Eigen::VectorXd prior_mean, prior_var;
        std::vector<bool> pinned;
        tight.conditioned_prior(c, prior_mean, prior_var, pinned);
        LatentImage z;
        z.tokens = tight.unflatten(tight.base() + tight.loading() * prior_mean);
        z.timestep = 0;
        RngStream rng = derive_stream(41, 0);
        const Eigen::MatrixXd eps = rng.normal_matrix(2, 2);
        CHECK(sds_grad(tight, z, c, 30, eps, lab.sched).norm() < 1e-6);
    }

    SUBCASE("deterministic with shared eps") {
        RngStream rng = derive_stream(41, 1);
        LatentImage z;
        z.tokens = rng.normal_matrix(16, lab.vocab.width());
        z.timestep = 0;
        const Eigen::MatrixXd eps = rng.normal_matrix(16, lab.vocab.width());
        const Eigen::MatrixXd a = sds_grad(lab.model, z, cond, 20, eps, lab.sched);
        const Eigen::MatrixXd b = sds_grad(lab.model, z, cond, 20, eps, lab.sched);
        CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
        CHECK_THROWS(sds_grad(lab.model, z, cond, 0, eps, lab.sched));
    }

    SUBCASE("condition pulling a factor up gives a consistent sign") {
        // source latent at color 0.2, condition says color = blue (0.8)
        Eigen::VectorXd f = Eigen::VectorXd::Constant(lab.model.factor_count(), 0.5);
        f(0) = 0.2;
        const LatentImage z = lab.model.sample_latent(f);
        const Eigen::VectorXd col = lab.model.loading().col(0);
        int negative = 0;
        RngStream rng = derive_stream(41, 2);
        for (int i = 0; i < 100; ++i) {
            const Eigen::MatrixXd eps = rng.normal_matrix(16, lab.vocab.width());
            const Eigen::MatrixXd g = sds_grad(lab.model, z, cond, 38, eps, lab.sched);
            negative += lab.model.flatten(g).dot(col) < 0.0;
        }
        // eps_hat pulls the latent toward the conditioned mean, so the
        // residual projects below zero every draw
        CHECK(negative == 100);
    }
}

TEST_CASE("dds gradient") {
    Lab lab;
    const TextEmbedding c0 = lab.vocab.encode_prompt({{"color", "red"}, {"object", "square"}});
    const TextEmbedding c1 = lab.vocab.encode_prompt({{"color", "blue"}, {"object", "square"}});
    RngStream rng = derive_stream(42, 0);
    LatentImage z;
    z.tokens = rng.normal_matrix(16, lab.vocab.width());
    z.timestep = 0;
    const Eigen::MatrixXd eps = rng.normal_matrix(16, lab.vocab.width());

    SUBCASE("identical arguments vanish") {
        CHECK(dds_grad(lab.model, z, c0, z, c0, 20, eps, lab.sched).cwiseAbs().maxCoeff() <
              1e-15);
    }

    SUBCASE("difference of two sds directions") {
        LatentImage zp;
        zp.tokens = rng.normal_matrix(16, lab.vocab.width());
        zp.timestep = 0;
        const Eigen::MatrixXd lhs = dds_grad(lab.model, z, c0, zp, c1, 20, eps, lab.sched);
        const Eigen::MatrixXd rhs = sds_grad(lab.model, z, c0, 20, eps, lab.sched) -
                                    sds_grad(lab.model, zp, c1, 20, eps, lab.sched);
        CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-12);
    }

    SUBCASE("descent iteration moves along the edited factor's column") {
        Eigen::VectorXd f = Eigen::VectorXd::Constant(lab.model.factor_count(), 0.5);
        f(0) = 0.2;
        const LatentImage z0 = lab.model.sample_latent(f);
        LatentImage zp = z0;
        RngStream loop_rng = derive_stream(42, 1);
        for (int k = 0; k < 20; ++k) {
            const Eigen::MatrixXd e = loop_rng.normal_matrix(16, lab.vocab.width());
            zp.tokens -= 0.1 * dds_grad(lab.model, z0, c0, zp, c1, 38, e, lab.sched);
        }
        const Eigen::VectorXd disp = lab.model.flatten(zp.tokens - z0.tokens);
        const double cosine =
            std::abs(disp.dot(lab.model.loading().col(0))) / disp.norm();
        CHECK(cosine > std::cos(5.0 * M_PI / 180.0));
    }
}

TEST_CASE("hsds gradient") {
    Lab lab;
    const TextEmbedding c_tilde =
        lab.vocab.encode_prompt({{"color", "blue"}, {"object", "square"}});
    const TextEmbedding z_s = lab.vocab.encode_prompt({{"color", "red"}, {"object", "square"}});
    RngStream rng = derive_stream(43, 0);
    LatentImage zt, ztp;
    zt.tokens = rng.normal_matrix(16, lab.vocab.width());
    zt.timestep = 25;
    ztp.tokens = rng.normal_matrix(16, lab.vocab.width());
    ztp.timestep = 25;

    SUBCASE("both terms vanish at the trivial fixed point") {
        CHECK(hsds_grad(lab.model, zt, zt, c_tilde, c_tilde, 0.7, lab.sched)
                  .cwiseAbs()
                  .maxCoeff() < 1e-15);
    }

    SUBCASE("lambda zero isolates the first term") {
        const Eigen::MatrixXd g = hsds_grad(lab.model, zt, ztp, c_tilde, z_s, 0.0, lab.sched);
        const Eigen::MatrixXd ref =
            2.0 * (lab.model.predict(ztp, c_tilde, 25, lab.sched) -
                   lab.model.predict(ztp, z_s, 25, lab.sched));
        CHECK((g - ref).cwiseAbs().maxCoeff() < 1e-15);
    }

    SUBCASE("term-by-term re-evaluation over 1000 instances") {
        RngStream r = derive_stream(43, 1);
        double worst = 0.0;
        for (int i = 0; i < 1000; ++i) {
            const int t = 1 + static_cast<int>(r.below(50));
            LatentImage a, b;
            a.tokens = r.normal_matrix(16, lab.vocab.width());
            a.timestep = t;
            b.tokens = r.normal_matrix(16, lab.vocab.width());
            b.timestep = t;
            const double lambda = r.uniform();
            const Eigen::MatrixXd g =
                hsds_grad(lab.model, a, b, c_tilde, z_s, lambda, lab.sched);
            const Eigen::MatrixXd ref =
                2.0 * (lab.model.predict(b, c_tilde, t, lab.sched) -
                       lab.model.predict(b, z_s, t, lab.sched)) +
                lambda * 2.0 *
                    (lab.model.predict(a, c_tilde, t, lab.sched) -
                     lab.model.predict(b, c_tilde, t, lab.sched));
            worst = std::max(worst, (g - ref).cwiseAbs().maxCoeff());
        }
        CHECK(worst < 1e-12);
    }

    SUBCASE("timestep mismatch rejected") {
        LatentImage other = ztp;
        other.timestep = 24;
        CHECK_THROWS(hsds_grad(lab.model, zt, other, c_tilde, z_s, 0.5, lab.sched));
    }
}

TEST_CASE("appendix composition") {
    Lab lab;
    const TextEmbedding c0 = lab.vocab.encode_prompt({{"color", "red"}, {"object", "square"}});
    const TextEmbedding c1 = lab.vocab.encode_prompt({{"color", "blue"}, {"object", "square"}});
    const TextEmbedding c_attr = lab.vocab.encode_prompt({{"color", "blue"}});
    RngStream rng = derive_stream(44, 0);
    LatentImage z, zp;
    z.tokens = rng.normal_matrix(16, lab.vocab.width());
    z.timestep = 0;
    zp.tokens = rng.normal_matrix(16, lab.vocab.width());
    zp.timestep = 0;
    const Eigen::MatrixXd eps = rng.normal_matrix(16, lab.vocab.width());

    SUBCASE("c_attr equal to c1 vanishes") {
        CHECK(hsds_appendix_grad(lab.model, z, c1, c0, zp, c1, 20, eps, lab.sched)
                  .cwiseAbs()
                  .maxCoeff() < 1e-15);
    }

    SUBCASE("equals the difference of two dds calls") {
        const Eigen::MatrixXd lhs =
            hsds_appendix_grad(lab.model, z, c_attr, c0, zp, c1, 20, eps, lab.sched);
        const Eigen::MatrixXd rhs = dds_grad(lab.model, z, c_attr, zp, c0, 20, eps, lab.sched) -
                                    dds_grad(lab.model, z, c1, zp, c0, 20, eps, lab.sched);
        CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-12);
    }

    SUBCASE("cross-form gap recorded, not asserted") {
        LatentImage zt = z, ztp = zp;
        zt.timestep = ztp.timestep = 20;
        const Eigen::MatrixXd eq1 = hsds_grad(lab.model, zt, ztp, c1, c0, 0.5, lab.sched);
        const Eigen::MatrixXd app =
            hsds_appendix_grad(lab.model, z, c_attr, c0, zp, c1, 20, eps, lab.sched);
        MESSAGE("eq1 vs appendix form gap: " << (eq1 - app).norm());
        CHECK(eq1.allFinite());
        CHECK(app.allFinite());
    }
}

TEST_CASE("identify loop") {
    Lab lab;
    const TextEmbedding c_tilde =
        lab.vocab.encode_prompt({{"color", "blue"}, {"object", "square"}});
    const TextEmbedding z_s = lab.vocab.encode_prompt({{"color", "red"}, {"object", "square"}});
    HSDSConfig cfg;
    cfg.timestep = 38;

    Eigen::VectorXd f = Eigen::VectorXd::Constant(lab.model.factor_count(), 0.5);
    f(0) = 0.2;
    const LatentImage z0 = lab.model.sample_latent(f);
    RngStream rng = derive_stream(45, 0);
    const LatentImage zt =
        forward_noise(z0, 38, rng.normal_matrix(16, lab.vocab.width()), lab.sched);

    SUBCASE("zero gradient start stays at zero") {
        const auto [n, trace] = identify_image_direction(lab.model, zt, c_tilde, c_tilde, cfg,
                                                         lab.sched);
        CHECK(n.delta.cwiseAbs().maxCoeff() < 1e-15);
        CHECK(static_cast<int>(trace.grad_norm.size()) == cfg.iterations);
        CHECK(static_cast<int>(trace.step_size.size()) == cfg.iterations);
        CHECK(trace.step_size.front() == doctest::Approx(0.1));
        CHECK(trace.step_size.back() == doctest::Approx(0.01));
    }

    SUBCASE("squared norm concentrates in the target column") {
        double worst = 1.0;
        for (int s = 0; s < 50; ++s) {
            RngStream r = derive_stream(46, static_cast<std::uint64_t>(s));
            const LatentImage zts =
                forward_noise(z0, 38, r.normal_matrix(16, lab.vocab.width()), lab.sched);
            const auto [n, trace] =
                identify_image_direction(lab.model, zts, c_tilde, z_s, cfg, lab.sched);
            const Eigen::VectorXd proj =
                lab.model.loading().transpose() * lab.model.flatten(n.delta);
            const double frac = proj(0) * proj(0) / lab.model.flatten(n.delta).squaredNorm();
            worst = std::min(worst, frac);
        }
        CHECK(worst >= 0.9);
    }

    SUBCASE("constraint weight shrinks the direction") {
        double prev = -1.0;
        for (const double lambda : {0.0, 0.25, 0.5, 0.75, 1.0}) {
            HSDSConfig c = cfg;
            c.lambda = lambda;
            const auto [n, trace] =
                identify_image_direction(lab.model, zt, c_tilde, z_s, c, lab.sched);
            const double norm = n.delta.norm();
            if (prev >= 0.0)
                CHECK(norm < prev);
            prev = norm;
        }
    }
}
