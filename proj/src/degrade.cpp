#include "fusecurr/degrade.hpp"

#include <algorithm>
#include <cmath>

#include "fusecurr/rng.hpp"

namespace fusecurr::degrade {

namespace {

double clamp01(double x) { return x < 0.0 ? 0.0 : (x > 1.0 ? 1.0 : x); }

double clamp_knob(double d) { return clamp01(d); }

} // namespace

img::Image gaussian_blur_kernel(const img::Image& im, int k) {
    if (k <= 1) return im;
    const double sigma = k / 6.0;
    const int r = k / 2;
    std::vector<double> taps(k);
    double sum = 0;
    for (int t = -r; t <= r; ++t) {
        taps[t + r] = std::exp(-(t * t) / (2.0 * sigma * sigma));
        sum += taps[t + r];
    }
    for (double& x : taps) x /= sum;

    const int h = im.height, w = im.width;
    // Accumulating tap-weighted deviations from the center pixel instead of
    // a plain dot product keeps constant regions bit-exact (the kernel sum
    // never quite equals 1.0 in floating point).
    std::vector<double> tmp(im.data.size());
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) {
            const double c = im.at(i, j);
            double acc = 0;
            for (int t = -r; t <= r; ++t)
                acc += taps[t + r] * (im.at(i, std::clamp(j + t, 0, w - 1)) - c);
            tmp[static_cast<size_t>(i) * w + j] = c + acc;
        }
    std::vector<double> out(im.data.size());
    auto tat = [&](int i, int j) { return tmp[static_cast<size_t>(i) * w + j]; };
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) {
            const double c = tat(i, j);
            double acc = 0;
            for (int t = -r; t <= r; ++t)
                acc += taps[t + r] * (tat(std::clamp(i + t, 0, h - 1), j) - c);
            out[static_cast<size_t>(i) * w + j] = clamp01(c + acc);
        }
    return img::Image(h, w, std::move(out));
}

img::Image gaussian_blur(const img::Image& im, double d) {
    d = clamp_knob(d);
    const int k = 2 * static_cast<int>(std::lround(3.0 * d)) + 1;  // 1, 3, 5, 7
    return gaussian_blur_kernel(im, k);
}

// ---- blockwise DCT quantization -------------------------------------------

namespace {

constexpr int kB = 8;

struct DctBasis {
    double c[kB][kB];  // c[u][i] = a(u) cos(pi (2i+1) u / 16)
    DctBasis() {
        for (int u = 0; u < kB; ++u) {
            const double a = u == 0 ? std::sqrt(1.0 / kB) : std::sqrt(2.0 / kB);
            for (int i = 0; i < kB; ++i)
                c[u][i] = a * std::cos(M_PI * (2 * i + 1) * u / (2.0 * kB));
        }
    }
};
const DctBasis kDct;

void dct2(const double in[kB][kB], double out[kB][kB]) {
    double t[kB][kB];
    for (int u = 0; u < kB; ++u)
        for (int j = 0; j < kB; ++j) {
            double acc = 0;
            for (int i = 0; i < kB; ++i) acc += kDct.c[u][i] * in[i][j];
            t[u][j] = acc;
        }
    for (int u = 0; u < kB; ++u)
        for (int v = 0; v < kB; ++v) {
            double acc = 0;
            for (int j = 0; j < kB; ++j) acc += kDct.c[v][j] * t[u][j];
            out[u][v] = acc;
        }
}

void idct2(const double in[kB][kB], double out[kB][kB]) {
    double t[kB][kB];
    for (int i = 0; i < kB; ++i)
        for (int v = 0; v < kB; ++v) {
            double acc = 0;
            for (int u = 0; u < kB; ++u) acc += kDct.c[u][i] * in[u][v];
            t[i][v] = acc;
        }
    for (int i = 0; i < kB; ++i)
        for (int j = 0; j < kB; ++j) {
            double acc = 0;
            for (int v = 0; v < kB; ++v) acc += kDct.c[v][j] * t[i][v];
            out[i][j] = acc;
        }
}

} // namespace

namespace {

// Shared block loop; q <= 0 skips the quantization step.
img::Image dct_blocks(const img::Image& im, double q) {
    const int h = im.height, w = im.width;
    std::vector<double> out(im.data.size());

    for (int bi = 0; bi < h; bi += kB)
        for (int bj = 0; bj < w; bj += kB) {
            double block[kB][kB], coef[kB][kB], rec[kB][kB];
            for (int i = 0; i < kB; ++i)
                for (int j = 0; j < kB; ++j)
                    // Edge blocks replicate the last row/column.
                    block[i][j] = im.at(std::min(bi + i, h - 1), std::min(bj + j, w - 1));
            dct2(block, coef);
            if (q > 0)
                for (int u = 0; u < kB; ++u)
                    for (int v = 0; v < kB; ++v)
                        coef[u][v] = std::round(coef[u][v] / q) * q;
            idct2(coef, rec);
            for (int i = 0; i < kB && bi + i < h; ++i)
                for (int j = 0; j < kB && bj + j < w; ++j)
                    out[static_cast<size_t>(bi + i) * w + bj + j] = clamp01(rec[i][j]);
        }
    return img::Image(h, w, std::move(out));
}

} // namespace

img::Image dct_compress(const img::Image& im, double d) {
    d = clamp_knob(d);
    return dct_blocks(im, (1.0 + 49.0 * d) / 255.0);
}

img::Image dct_roundtrip(const img::Image& im) { return dct_blocks(im, 0.0); }

img::Image color_jitter(const img::Image& im, double b, double c) {
    const double beta = 0.5 + clamp_knob(b);
    const double gamma = 0.5 + clamp_knob(c);
    std::vector<double> bright(im.data.size());
    double mu = 0;
    for (size_t i = 0; i < im.data.size(); ++i) {
        bright[i] = im.data[i] * beta;
        mu += bright[i];
    }
    mu /= static_cast<double>(im.data.size());
    // ((I*beta) - mu)*gamma + mu rearranged so gamma = 1 (and beta = 1) is a
    // bit-exact identity rather than identity up to round-off.
    std::vector<double> out(im.data.size());
    for (size_t i = 0; i < im.data.size(); ++i)
        out[i] = clamp01(bright[i] + (gamma - 1.0) * (bright[i] - mu));
    return img::Image(im.height, im.width, std::move(out));
}

img::Image add_noise(const img::Image& im, double d, std::uint64_t seed) {
    d = clamp_knob(d);
    if (d == 0.0) return im;
    const double sigma = 0.1 * d;
    std::vector<double> out(im.data.size());
    for (size_t i = 0; i < im.data.size(); ++i)
        out[i] = clamp01(im.data[i] + sigma * rng::normal(seed, i));
    return img::Image(im.height, im.width, std::move(out));
}

img::Image degrade_image(const img::Image& im, const DegradationParams& p,
                         std::uint64_t noise_seed) {
    img::Image x = gaussian_blur(im, p.blur);
    x = color_jitter(x, p.brightness, p.contrast);
    x = add_noise(x, p.noise, noise_seed);
    return dct_compress(x, p.compress);
}

std::pair<img::Image, img::Image> degrade_pair(const img::Image& ir,
                                               const img::Image& vi,
                                               const DegradationParams& p,
                                               std::uint64_t seed) {
    return {degrade_image(ir, p, rng::derive(seed, 1)),
            degrade_image(vi, p, rng::derive(seed, 2))};
}

} // namespace fusecurr::degrade
