#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "eimlab/diffusion.hpp"
#include "eimlab/gaussian_model.hpp"

using namespace eimlab;

TEST_CASE("schedule construction") {
    const NoiseSchedule one = build_schedule(1, 0.5, 0.5);
    REQUIRE(one.alpha_bars.size() == 2);
    CHECK(one.alpha_bars[0] == 1.0);
    CHECK(one.alpha_bars[1] == doctest::Approx(0.5).epsilon(1e-15));

    const NoiseSchedule sched = build_schedule(50, 1e-4, 0.02);
    // independent cumulative product
    long double prod = 1.0L;
    for (int t = 1; t <= 50; ++t) {
        const long double beta = 1e-4L + (0.02L - 1e-4L) * (t - 1) / 49.0L;
        prod *= 1.0L - beta;
        CHECK(sched.betas[static_cast<std::size_t>(t - 1)] ==
              doctest::Approx(static_cast<double>(beta)).epsilon(1e-14));
    }
    CHECK(std::abs(sched.alpha_bars[50] - static_cast<double>(prod)) < 1e-12);

    for (int t = 1; t < 50; ++t) {
        CHECK(sched.betas[static_cast<std::size_t>(t)] > sched.betas[static_cast<std::size_t>(t - 1)]);
        CHECK(sched.alpha_bars[static_cast<std::size_t>(t + 1)] <
              sched.alpha_bars[static_cast<std::size_t>(t)]);
    }

    CHECK_THROWS(build_schedule(0, 1e-4, 0.02));
    CHECK_THROWS(build_schedule(10, 0.0, 0.02));
    CHECK_THROWS(build_schedule(10, 0.02, 1e-4));
    CHECK_THROWS(build_schedule(10, 0.5, 1.0));
}

TEST_CASE("strength to timestep rounds half up") {
    CHECK(strength_to_timestep(0.75, 50) == 38);
    CHECK(strength_to_timestep(0.0, 50) == 0);
    CHECK(strength_to_timestep(1.0, 50) == 50);
    CHECK(strength_to_timestep(0.35, 10) == 4);  // 3.5 ties up
    CHECK(strength_to_timestep(0.45, 10) == 5);  // 4.5 ties up
}

TEST_CASE("forward noise") {
    const NoiseSchedule sched = default_schedule();
    RngStream rng = derive_stream(7, 1);
    LatentImage z0;
    z0.tokens = rng.normal_matrix(4, 8);
    z0.timestep = 0;
    const Eigen::MatrixXd eps = rng.normal_matrix(4, 8);

    SUBCASE("t=0 is identity") {
        const LatentImage zt = forward_noise(z0, 0, eps, sched);
        CHECK((zt.tokens - z0.tokens).cwiseAbs().maxCoeff() == 0.0);
        CHECK(zt.timestep == 0);
    }

    SUBCASE("symmetric coefficients at alpha_bar=0.5") {
        NoiseSchedule half = build_schedule(1, 0.5, 0.5);
        LatentImage ones;
        ones.tokens = Eigen::MatrixXd::Ones(2, 2);
        const LatentImage zt = forward_noise(ones, 1, Eigen::MatrixXd::Ones(2, 2), half);
        CHECK(zt.tokens(0, 0) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
        CHECK(zt.timestep == 1);
    }

    SUBCASE("monte carlo mean and variance at t=37") {
        const int n = 10000;
        const double ab = sched.alpha_bar(37);
        Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(4, 8);
        Eigen::MatrixXd sumsq = Eigen::MatrixXd::Zero(4, 8);
        RngStream mc = derive_stream(7, 2);
        for (int i = 0; i < n; ++i) {
            const LatentImage zt = forward_noise(z0, 37, mc.normal_matrix(4, 8), sched);
            sum += zt.tokens;
            sumsq += zt.tokens.cwiseProduct(zt.tokens);
        }
        const Eigen::MatrixXd mean = sum / n;
        // per-entry std of the mean is sqrt((1-ab)/n)
        const double se = std::sqrt((1.0 - ab) / n);
        CHECK((mean - std::sqrt(ab) * z0.tokens).cwiseAbs().maxCoeff() < 4.0 * se);
        const Eigen::MatrixXd var = sumsq / n - mean.cwiseProduct(mean);
        // Var(z_t) = (1 - ab) here since z0 is fixed; 3 SEs of a chi^2 mean
        const double var_se = (1.0 - ab) * std::sqrt(2.0 / n);
        CHECK((var.array() - (1.0 - ab)).abs().maxCoeff() < 4.0 * var_se);
    }

    SUBCASE("errors") {
        LatentImage noised = forward_noise(z0, 3, eps, sched);
        CHECK_THROWS(forward_noise(noised, 5, eps, sched));  // timestep != 0
        CHECK_THROWS(forward_noise(z0, 51, eps, sched));
        CHECK_THROWS(forward_noise(z0, -1, eps, sched));
        CHECK_THROWS(forward_noise(z0, 3, Eigen::MatrixXd::Zero(2, 2), sched));
    }
}

TEST_CASE("cfg combine") {
    Eigen::MatrixXd c(1, 1), u(1, 1);
    c << 0.2;
    u << 0.1;
    CHECK(cfg_combine(c, u, 1.0)(0, 0) == doctest::Approx(0.2).epsilon(1e-15));
    CHECK(cfg_combine(c, u, 0.0)(0, 0) == doctest::Approx(0.1).epsilon(1e-15));
    CHECK(cfg_combine(c, u, 7.5)(0, 0) == doctest::Approx(0.85).epsilon(1e-12));
    CHECK_THROWS(cfg_combine(c, Eigen::MatrixXd::Zero(2, 2), 1.0));

    // affine in w
    RngStream rng = derive_stream(3, 0);
    const Eigen::MatrixXd a = rng.normal_matrix(3, 4), b = rng.normal_matrix(3, 4);
    const double w1 = 1.5, w2 = 9.0, s = 0.3;
    const Eigen::MatrixXd mix =
        s * cfg_combine(a, b, w1) + (1.0 - s) * cfg_combine(a, b, w2);
    const Eigen::MatrixXd direct = cfg_combine(a, b, s * w1 + (1.0 - s) * w2);
    CHECK((mix - direct).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("derive_stream determinism and moments") {
    RngStream a = derive_stream(42, 0);
    RngStream b = derive_stream(42, 0);
    RngStream c = derive_stream(42, 1);
    bool all_equal = true, any_diff = false;
    for (int i = 0; i < 100; ++i) {
        const double va = a.normal(), vb = b.normal(), vc = c.normal();
        all_equal = all_equal && va == vb;
        any_diff = any_diff || va != vc;
    }
    CHECK(all_equal);
    CHECK(any_diff);

    RngStream m = derive_stream(42, 7);
    double sum = 0.0, sumsq = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        const double v = m.normal();
        sum += v;
        sumsq += v * v;
    }
    const double mean = sum / n;
    CHECK(std::abs(mean) < 0.01);
    CHECK(std::abs(sumsq / n - mean * mean - 1.0) < 0.02);
}

TEST_CASE("reverse sample") {
    const NoiseSchedule sched = default_schedule();
    const SemanticVocabulary vocab = SemanticVocabulary::default_vocabulary();
    const GaussianFactorModel model = GaussianFactorModel::make_synthetic(
        vocab, default_bindings(vocab), 16, vocab.width(), 101);
    SamplerConfig cfg;

    const Token color_tok{"color", "green"};  // bound factor mean 0.5
    std::vector<Token> prompt{color_tok, {"object", "square"}};
    const TextEmbedding cond = vocab.encode_prompt(prompt);
    const TextEmbedding uncond = vocab.null_prompt();

    SUBCASE("determinism and timestep contract") {
        Eigen::VectorXd f = Eigen::VectorXd::Constant(model.factor_count(), 0.5);
        const LatentImage z0 = model.sample_latent(f);
        RngStream r1 = derive_stream(9, 4);
        const LatentImage zt = forward_noise(z0, 38, r1.normal_matrix(16, vocab.width()), sched);
        RngStream s1 = derive_stream(9, 5);
        RngStream s2 = derive_stream(9, 5);
        const LatentImage a = reverse_sample(zt, cond, uncond, model, cfg, sched, s1);
        const LatentImage b = reverse_sample(zt, cond, uncond, model, cfg, sched, s2);
        CHECK(a.timestep == 0);
        CHECK((a.tokens - b.tokens).cwiseAbs().maxCoeff() == 0.0);
        CHECK_THROWS(reverse_sample(z0, cond, uncond, model, cfg, sched, s1));
    }

    SUBCASE("w=0 equals w=1 when cond == uncond predictor inputs") {
        Eigen::VectorXd f = Eigen::VectorXd::Constant(model.factor_count(), 0.4);
        const LatentImage z0 = model.sample_latent(f);
        RngStream r = derive_stream(9, 6);
        const LatentImage zt = forward_noise(z0, 20, r.normal_matrix(16, vocab.width()), sched);
        SamplerConfig c0 = cfg, c1 = cfg;
        c0.guidance_scale = 0.0;
        c1.guidance_scale = 1.0;
        RngStream sa = derive_stream(9, 7), sb = derive_stream(9, 7);
        const LatentImage a = reverse_sample(zt, cond, cond, model, c0, sched, sa);
        const LatentImage b = reverse_sample(zt, cond, cond, model, c1, sched, sb);
        CHECK((a.tokens - b.tokens).cwiseAbs().maxCoeff() < 1e-12);
    }

    SUBCASE("conditioned factor recovered near its pinned mean") {
        // conditioned on color=blue (factor mean 0.8), strength 0.75
        std::vector<Token> p{{"color", "blue"}, {"object", "square"}};
        const TextEmbedding cb = vocab.encode_prompt(p);
        const int color_idx = 0;
        double sum = 0.0;
        const int seeds = 100;
        for (int s = 0; s < seeds; ++s) {
            RngStream r = derive_stream(100, 10 + static_cast<std::uint64_t>(s));
            Eigen::VectorXd f(model.factor_count());
            for (int i = 0; i < f.size(); ++i) f(i) = r.uniform();
            f(color_idx) = 0.8;
            const LatentImage z0 = model.sample_latent(f);
            const LatentImage zt =
                forward_noise(z0, 38, r.normal_matrix(16, vocab.width()), sched);
            const LatentImage zr = reverse_sample(zt, cb, uncond, model, cfg, sched, r);
            sum += model.recover_factors(zr)(color_idx);
        }
        CHECK(std::abs(sum / seeds - 0.8) < 0.05);
    }
}
