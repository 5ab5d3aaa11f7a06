#include "eimlab/rng.hpp"

#include <cmath>

namespace eimlab {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

RngStream::RngStream(std::uint64_t seed) {
    // xoshiro256** seeded via splitmix64, per the reference construction
    std::uint64_t s = seed;
    for (auto& w : state_) {
        s = splitmix64(s);
        w = s;
    }
}

static inline std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
}

std::uint64_t RngStream::next_u64() {
    std::uint64_t* s = state_;
    const std::uint64_t result = rotl(s[1] * 5, 7) * 9;
    const std::uint64_t t = s[1] << 17;
    s[2] ^= s[0];
    s[3] ^= s[1];
    s[1] ^= s[2];
    s[0] ^= s[3];
    s[2] ^= t;
    s[3] = rotl(s[3], 45);
    return result;
}

std::uint64_t RngStream::below(std::uint64_t n) {
    // modulo bias is negligible for n << 2^64 but reject anyway
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v;
    do {
        v = next_u64();
    } while (v >= limit);
    return v % n;
}

double RngStream::uniform() {
    return (next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u1, u2;
    do {
        u1 = uniform();
    } while (u1 <= 0.0);
    u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
}

Eigen::MatrixXd RngStream::normal_matrix(int rows, int cols) {
    Eigen::MatrixXd m(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j)
            m(i, j) = normal();
    return m;
}

RngStream derive_stream(std::uint64_t root_seed, std::uint64_t task_id) {
    return RngStream(splitmix64(root_seed) ^ splitmix64(splitmix64(task_id) + 0xa5a5a5a5a5a5a5a5ULL));
}

} // namespace eimlab
