#pragma once

#include <cstdint>
#include <utility>

#include "fusecurr/imgio.hpp"

namespace fusecurr::degrade {

/// Degradation knob vector, each component in [0, 1]. The identity point is
/// (0, 0, 0.5, 0.5, 0): jitter strengths of 0.5 map to unit gain factors.
struct DegradationParams {
    double blur = 0.0;
    double compress = 0.0;
    double brightness = 0.5;
    double contrast = 0.5;
    double noise = 0.0;

    static DegradationParams identity() { return {}; }
};

/// Separable Gaussian blur with an odd kernel, sigma = k/6, replicate
/// padding. k = 1 returns the input unchanged.
img::Image gaussian_blur_kernel(const img::Image& im, int k);

/// Strength-mapped blur: k = 2*round(3d) + 1, so d in [0,1] covers {1,3,5,7}.
img::Image gaussian_blur(const img::Image& im, double d);

/// Blockwise 8x8 orthonormal DCT-II quantization with step q = (1+49d)/255.
/// Edge blocks are replicate-padded to 8x8 and written back cropped.
img::Image dct_compress(const img::Image& im, double d);

/// Forward + inverse block transform with no quantization step; validates
/// that the DCT basis is orthonormal (output equals input to ~1e-15).
img::Image dct_roundtrip(const img::Image& im);

/// Brightness/contrast jitter: beta = 0.5+b, gamma = 0.5+c, output =
/// clamp(((I*beta) - mu) * gamma + mu) where mu is the mean of I*beta.
img::Image color_jitter(const img::Image& im, double b, double c);

/// Additive Gaussian noise, sigma = 0.1*d, one counter-based draw per pixel
/// in row-major order, clamped. d = 0 returns the input bit-identically.
img::Image add_noise(const img::Image& im, double d, std::uint64_t seed);

/// Full pipeline for one image: blur -> jitter -> noise -> compress.
img::Image degrade_image(const img::Image& im, const DegradationParams& p,
                         std::uint64_t noise_seed);

/// Apply the pipeline with identical strengths to both images of a pair;
/// the two noise streams use distinct seeds derived from `seed`.
std::pair<img::Image, img::Image> degrade_pair(const img::Image& ir,
                                               const img::Image& vi,
                                               const DegradationParams& p,
                                               std::uint64_t seed);

} // namespace fusecurr::degrade
