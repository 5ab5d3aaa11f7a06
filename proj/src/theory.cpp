#include "eimlab/theory.hpp"

#include <cmath>
#include <stdexcept>
#include <thread>

#include "eimlab/rng.hpp"
#include "eimlab/text_codec.hpp"

namespace eimlab {

double tau_threshold(double alpha, int d) {
    if (d <= 2)
        throw std::invalid_argument("tau_threshold: d must exceed 2");
    if (alpha <= 0.0)
        throw std::invalid_argument("tau_threshold: alpha must be positive");
    return 2.0 * alpha * std::sqrt(static_cast<double>(d) / (d - 2));
}

Prop2Report prop2_check(const std::vector<Eigen::VectorXd>& directions) {
    if (directions.size() < 2)
        throw std::invalid_argument("prop2_check: need at least two directions");
    const int m = static_cast<int>(directions.size());
    for (const auto& n : directions)
        if (std::abs(n.norm() - 1.0) > 1e-9)
            throw std::invalid_argument("prop2_check: directions must be unit length");

    std::vector<Eigen::VectorXd> ext;
    ext.reserve(directions.size());
    for (int i = 0; i < m; ++i)
        ext.push_back(extended_direction(directions[static_cast<std::size_t>(i)], i + 1, m));

    Prop2Report rep;
    for (int i = 0; i < m; ++i) {
        rep.max_norm_error = std::max(rep.max_norm_error,
                                      std::abs(ext[static_cast<std::size_t>(i)].norm() - 1.0));
        for (int j = i + 1; j < m; ++j)
            rep.max_cross_inner = std::max(
                rep.max_cross_inner, std::abs(ext[static_cast<std::size_t>(i)].dot(
                                        ext[static_cast<std::size_t>(j)])));
    }
    return rep;
}

namespace {

constexpr std::uint64_t kChunk = 1u << 16;

// hits within one fixed-size chunk; chunk identity, not scheduling, fixes
// the stream, so any job count reproduces the same tally
std::uint64_t chunk_hits(int m, double tau, std::uint64_t seed, std::uint64_t chunk_index,
                         std::uint64_t count) {
    RngStream rng = derive_stream(seed, 0x9201ULL + chunk_index);
    std::uint64_t hits = 0;
    for (std::uint64_t s = 0; s < count; ++s) {
        double sum = 0.0;
        for (int i = 0; i < m; ++i)
            sum += rng.normal();
        hits += std::abs(sum) <= tau;
    }
    return hits;
}

} // namespace

Prop1Report prop1_mc(int m, int d, double alpha, double c, std::uint64_t samples,
                     std::uint64_t seed, int jobs) {
    if (m < 1)
        throw std::invalid_argument("prop1_mc: m must be positive");
    if (d < 4)
        throw std::invalid_argument("prop1_mc: d must be at least 4");
    if (alpha < 1.0)
        throw std::invalid_argument("prop1_mc: alpha must be at least 1");
    if (samples < 10000)
        throw std::invalid_argument("prop1_mc: need at least 1e4 samples");
    if (c <= 0.0)
        throw std::invalid_argument("prop1_mc: c must be positive");
    if (jobs < 1)
        jobs = 1;

    Prop1Report rep;
    rep.m = m;
    rep.d = d;
    rep.alpha = alpha;
    rep.samples = samples;
    rep.c = c;
    rep.tau = tau_threshold(alpha, d);

    const std::uint64_t chunks = (samples + kChunk - 1) / kChunk;
    std::vector<std::uint64_t> hits(chunks, 0);
    auto work = [&](std::uint64_t begin, std::uint64_t end) {
        for (std::uint64_t k = begin; k < end; ++k) {
            const std::uint64_t count = k + 1 == chunks ? samples - k * kChunk : kChunk;
            hits[k] = chunk_hits(m, rep.tau, seed, k, count);
        }
    };
    if (jobs == 1 || chunks == 1) {
        work(0, chunks);
    } else {
        std::vector<std::thread> pool;
        const std::uint64_t per = (chunks + jobs - 1) / jobs;
        for (int j = 0; j < jobs; ++j) {
            const std::uint64_t begin = per * static_cast<std::uint64_t>(j);
            const std::uint64_t end = std::min(chunks, begin + per);
            if (begin < end)
                pool.emplace_back(work, begin, end);
        }
        for (auto& th : pool)
            th.join();
    }
    std::uint64_t total_hits = 0;
    for (std::uint64_t h : hits)
        total_hits += h;

    rep.estimate = static_cast<double>(total_hits) / static_cast<double>(samples);
    rep.analytic = std::erf(rep.tau / std::sqrt(2.0 * m));
    rep.std_error =
        std::sqrt(std::max(rep.estimate * (1.0 - rep.estimate), 1e-12) / samples);
    const double factor = (1.0 - 3.0 * std::exp(-c * d)) *
                          (1.0 - (2.0 / alpha) * std::exp(-alpha * alpha / 2.0));
    rep.claimed_bound = std::pow(factor, m);
    rep.bound_holds = rep.estimate >= rep.claimed_bound;
    return rep;
}

} // namespace eimlab
