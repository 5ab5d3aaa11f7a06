#ifndef EIMLAB_SCENE_HPP
#define EIMLAB_SCENE_HPP

#include <array>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "eimlab/diffusion.hpp"
#include "eimlab/text_codec.hpp"

namespace eimlab {

inline constexpr int kRasterSize = 16;
inline constexpr int kPatchGrid = 4;   // 4x4 patches of 4x4 pixels
inline constexpr int kPatchDim = 48;   // 4*4*3
inline constexpr int kTokenCount = 16;
inline constexpr int kLatentWidth = 32;

using Raster = std::array<Eigen::MatrixXd, 3>; // RGB planes, values in [0,1]

struct FactorVector {
    int color = 0;       // 0 red, 1 green, 2 blue
    int object = 0;      // 0 square, 1 circle
    double size = 0.55;  // [0.3, 0.8], fraction of image width
    double pos_x = 0.5;  // [0.2, 0.8]
    double pos_y = 0.5;  // [0.2, 0.8]
};

extern const char* const kColorNames[3];
extern const char* const kObjectNames[2];
extern const std::array<std::array<double, 3>, 3> kColorTriples;

struct Scene {
    FactorVector factors;
    Raster raster;
    Eigen::ArrayXXd object_mask;     // 1 inside the shape
    Eigen::ArrayXXd background_mask; // complement
    std::vector<Token> prompt;
};

Scene render_scene(const FactorVector& factors);

std::vector<Token> prompt_for_factors(const FactorVector& f);

// Uniform factors, color-stratified when n is a multiple of 3.
std::vector<Scene> sample_dataset(int n, RngStream& rng);

// Heuristic inverse renderer: color/object/size/position read back from
// pixels. Used as the factor-space recovery for trained denoisers.
FactorVector estimate_factors_from_raster(const Raster& raster);

// Fixed orthogonal patch codec between 16x16x3 rasters and 16x32 latents.
// The first three basis vectors are per-channel patch means, so color
// survives the projection exactly.
class PatchCodec {
public:
    explicit PatchCodec(std::uint64_t seed = 29);

    LatentImage encode(const Raster& raster) const;
    Raster decode(const LatentImage& latent) const;

private:
    Eigen::MatrixXd basis_; // kLatentWidth x kPatchDim, orthonormal rows
};

} // namespace eimlab

#endif
