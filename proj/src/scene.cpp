#include "eimlab/scene.hpp"

#include <cmath>
#include <stdexcept>

namespace eimlab {

const char* const kColorNames[3] = {"red", "green", "blue"};
const char* const kObjectNames[2] = {"square", "circle"};
const std::array<std::array<double, 3>, 3> kColorTriples = {{
    {{0.9, 0.1, 0.1}},
    {{0.1, 0.9, 0.1}},
    {{0.1, 0.1, 0.9}},
}};

static constexpr double kBackground = 0.5;

static double coverage_at(const FactorVector& f, double px, double py) {
    // 4x4 supersampling of the shape indicator inside pixel (px, py)
    const double cx = f.pos_x * kRasterSize;
    const double cy = f.pos_y * kRasterSize;
    const double half = 0.5 * f.size * kRasterSize;
    int inside = 0;
    for (int sy = 0; sy < 4; ++sy) {
        for (int sx = 0; sx < 4; ++sx) {
            const double x = px + (sx + 0.5) / 4.0;
            const double y = py + (sy + 0.5) / 4.0;
            bool in;
            if (f.object == 0) {
                in = std::abs(x - cx) <= half && std::abs(y - cy) <= half;
            } else {
                const double dx = x - cx, dy = y - cy;
                in = dx * dx + dy * dy <= half * half;
            }
            inside += in ? 1 : 0;
        }
    }
    return inside / 16.0;
}

std::vector<Token> prompt_for_factors(const FactorVector& f) {
    return {{"color", kColorNames[f.color]},
            {"object", kObjectNames[f.object]},
            {"size", f.size < 0.55 ? "small" : "large"}};
}

Scene render_scene(const FactorVector& f) {
    if (f.color < 0 || f.color > 2 || f.object < 0 || f.object > 1)
        throw std::invalid_argument("render_scene: categorical factor out of range");
    if (f.size < 0.3 || f.size > 0.8 || f.pos_x < 0.2 || f.pos_x > 0.8 || f.pos_y < 0.2 ||
        f.pos_y > 0.8)
        throw std::invalid_argument("render_scene: continuous factor out of range");

    Scene s;
    s.factors = f;
    for (auto& plane : s.raster)
        plane = Eigen::MatrixXd::Constant(kRasterSize, kRasterSize, kBackground);
    s.object_mask = Eigen::ArrayXXd::Zero(kRasterSize, kRasterSize);
    s.background_mask = Eigen::ArrayXXd::Ones(kRasterSize, kRasterSize);

    const auto& rgb = kColorTriples[static_cast<std::size_t>(f.color)];
    for (int y = 0; y < kRasterSize; ++y) {
        for (int x = 0; x < kRasterSize; ++x) {
            const double cov = coverage_at(f, x, y);
            if (cov > 0.0) {
                for (int c = 0; c < 3; ++c)
                    s.raster[static_cast<std::size_t>(c)](y, x) =
                        (1.0 - cov) * kBackground + cov * rgb[static_cast<std::size_t>(c)];
            }
            if (cov > 0.5) {
                s.object_mask(y, x) = 1.0;
                s.background_mask(y, x) = 0.0;
            }
        }
    }
    s.prompt = prompt_for_factors(f);
    return s;
}

std::vector<Scene> sample_dataset(int n, RngStream& rng) {
    if (n < 1)
        throw std::invalid_argument("sample_dataset: n must be positive");
    std::vector<Scene> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        FactorVector f;
        // stratified over colors when n divides evenly, uniform otherwise
        f.color = (n % 3 == 0) ? i % 3 : static_cast<int>(rng.below(3));
        f.object = static_cast<int>(rng.below(2));
        f.size = 0.3 + 0.5 * rng.uniform();
        f.pos_x = 0.2 + 0.6 * rng.uniform();
        f.pos_y = 0.2 + 0.6 * rng.uniform();
        out.push_back(render_scene(f));
    }
    return out;
}

FactorVector estimate_factors_from_raster(const Raster& raster) {
    FactorVector f;
    double area = 0.0, sx = 0.0, sy = 0.0;
    Eigen::Vector3d mean_rgb = Eigen::Vector3d::Zero();
    int min_x = kRasterSize, max_x = -1, min_y = kRasterSize, max_y = -1;
    for (int y = 0; y < kRasterSize; ++y) {
        for (int x = 0; x < kRasterSize; ++x) {
            const Eigen::Vector3d px(raster[0](y, x), raster[1](y, x), raster[2](y, x));
            if ((px - Eigen::Vector3d::Constant(kBackground)).norm() > 0.25) {
                area += 1.0;
                sx += x + 0.5;
                sy += y + 0.5;
                mean_rgb += px;
                min_x = std::min(min_x, x);
                max_x = std::max(max_x, x);
                min_y = std::min(min_y, y);
                max_y = std::max(max_y, y);
            }
        }
    }
    if (area < 1.0)
        return f; // featureless raster, defaults

    mean_rgb /= area;
    int best = 0;
    double best_d = 1e9;
    for (int c = 0; c < 3; ++c) {
        const auto& rgb = kColorTriples[static_cast<std::size_t>(c)];
        const double dist = (mean_rgb - Eigen::Vector3d(rgb[0], rgb[1], rgb[2])).norm();
        if (dist < best_d) {
            best_d = dist;
            best = c;
        }
    }
    f.color = best;
    f.pos_x = sx / area / kRasterSize;
    f.pos_y = sy / area / kRasterSize;
    // bounding-box fill ratio separates square (~1) from circle (~pi/4)
    const double bbox = static_cast<double>((max_x - min_x + 1) * (max_y - min_y + 1));
    const double fill = area / bbox;
    f.object = fill > 0.89 ? 0 : 1;
    if (f.object == 0)
        f.size = std::sqrt(area) / kRasterSize;
    else
        f.size = 2.0 * std::sqrt(area / M_PI) / kRasterSize;
    f.size = std::clamp(f.size, 0.3, 0.8);
    f.pos_x = std::clamp(f.pos_x, 0.2, 0.8);
    f.pos_y = std::clamp(f.pos_y, 0.2, 0.8);
    return f;
}

PatchCodec::PatchCodec(std::uint64_t seed) {
    RngStream rng = derive_stream(seed, 0xc0decULL);
    Eigen::MatrixXd rows(kLatentWidth, kPatchDim);
    rows.setZero();
    // channel-mean directions first, then random completions
    for (int c = 0; c < 3; ++c)
        for (int i = 0; i < 16; ++i)
            rows(c, c * 16 + i) = 0.25; // unit norm: sqrt(16 * (1/4)^2) = 1
    for (int r = 3; r < kLatentWidth; ++r)
        rows.row(r) = rng.normal_matrix(1, kPatchDim);
    // Gram-Schmidt
    for (int r = 0; r < kLatentWidth; ++r) {
        for (int p = 0; p < r; ++p)
            rows.row(r) -= rows.row(r).dot(rows.row(p)) * rows.row(p);
        rows.row(r).normalize();
    }
    basis_ = rows;
}

static Eigen::VectorXd patch_vector(const Raster& raster, int py, int px) {
    Eigen::VectorXd v(kPatchDim);
    int k = 0;
    for (int c = 0; c < 3; ++c)
        for (int dy = 0; dy < 4; ++dy)
            for (int dx = 0; dx < 4; ++dx)
                v(k++) = raster[static_cast<std::size_t>(c)](py * 4 + dy, px * 4 + dx) - 0.5;
    return v;
}

LatentImage PatchCodec::encode(const Raster& raster) const {
    LatentImage z;
    z.tokens.resize(kTokenCount, kLatentWidth);
    z.timestep = 0;
    for (int py = 0; py < kPatchGrid; ++py)
        for (int px = 0; px < kPatchGrid; ++px)
            z.tokens.row(py * kPatchGrid + px) = (basis_ * patch_vector(raster, py, px)).transpose();
    return z;
}

Raster PatchCodec::decode(const LatentImage& latent) const {
    if (latent.token_count() != kTokenCount || latent.width() != kLatentWidth)
        throw std::invalid_argument("PatchCodec::decode: latent shape mismatch");
    Raster raster;
    for (auto& plane : raster)
        plane = Eigen::MatrixXd::Zero(kRasterSize, kRasterSize);
    for (int py = 0; py < kPatchGrid; ++py) {
        for (int px = 0; px < kPatchGrid; ++px) {
            const Eigen::VectorXd patch =
                basis_.transpose() * latent.tokens.row(py * kPatchGrid + px).transpose();
            int k = 0;
            for (int c = 0; c < 3; ++c)
                for (int dy = 0; dy < 4; ++dy)
                    for (int dx = 0; dx < 4; ++dx)
                        raster[static_cast<std::size_t>(c)](py * 4 + dy, px * 4 + dx) =
                            std::clamp(patch(k++) + 0.5, 0.0, 1.0);
        }
    }
    return raster;
}

} // namespace eimlab
