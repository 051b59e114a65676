#include "fusecurr/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace fusecurr::metrics {

double avg_gradient(const img::Image& im) {
    const int h = im.height, w = im.width;
    double acc = 0;
    for (int i = 0; i + 1 < h; ++i)
        for (int j = 0; j + 1 < w; ++j) {
            const double dx = im.at(i, j + 1) - im.at(i, j);
            const double dy = im.at(i + 1, j) - im.at(i, j);
            acc += std::sqrt((dx * dx + dy * dy) / 2.0);
        }
    return acc / (static_cast<double>(h - 1) * (w - 1));
}

double spatial_frequency(const img::Image& im) {
    const int h = im.height, w = im.width;
    double rf = 0, cf = 0;
    for (int i = 0; i < h; ++i)
        for (int j = 1; j < w; ++j) {
            const double d = im.at(i, j) - im.at(i, j - 1);
            rf += d * d;
        }
    for (int i = 1; i < h; ++i)
        for (int j = 0; j < w; ++j) {
            const double d = im.at(i, j) - im.at(i - 1, j);
            cf += d * d;
        }
    rf /= static_cast<double>(h) * (w - 1);
    cf /= static_cast<double>(h - 1) * w;
    return std::sqrt(rf + cf);
}

std::vector<double> sobel_magnitude(const img::Image& im) {
    const int h = im.height, w = im.width;
    std::vector<double> mag(static_cast<size_t>(h) * w);
    auto px = [&](int i, int j) {
        i = std::clamp(i, 0, h - 1);
        j = std::clamp(j, 0, w - 1);
        return im.at(i, j);
    };
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) {
            // Paired differences so a constant image cancels exactly.
            const double gx = (px(i - 1, j + 1) - px(i - 1, j - 1)) +
                              2 * (px(i, j + 1) - px(i, j - 1)) +
                              (px(i + 1, j + 1) - px(i + 1, j - 1));
            const double gy = (px(i + 1, j - 1) - px(i - 1, j - 1)) +
                              2 * (px(i + 1, j) - px(i - 1, j)) +
                              (px(i + 1, j + 1) - px(i - 1, j + 1));
            mag[static_cast<size_t>(i) * w + j] = std::sqrt(gx * gx + gy * gy);
        }
    return mag;
}

double edge_intensity(const img::Image& im) {
    const auto mag = sobel_magnitude(im);
    double acc = 0;
    for (double m : mag) acc += m;
    return acc / static_cast<double>(mag.size());
}

double entropy(const img::Image& im) {
    int hist[256] = {0};
    for (double p : im.data) {
        int b = static_cast<int>(std::floor(p * 256.0));
        if (b > 255) b = 255;
        ++hist[b];
    }
    const double n = static_cast<double>(im.pixels());
    double en = 0;
    for (int b = 0; b < 256; ++b)
        if (hist[b] > 0) {
            const double q = hist[b] / n;
            en -= q * std::log2(q);
        }
    return en;
}

double std_dev(const img::Image& im) {
    // Anchored two-pass: shifting by the first pixel keeps a constant image
    // at exactly zero regardless of pixel count.
    const double n = static_cast<double>(im.pixels());
    const double anchor = im.data[0];
    double mean = 0;
    for (double p : im.data) mean += p - anchor;
    mean /= n;
    double acc = 0;
    for (double p : im.data) acc += (p - anchor - mean) * (p - anchor - mean);
    return std::sqrt(acc / n);
}

// ---- visual fidelity ------------------------------------------------------

namespace {

struct Plane {
    int h = 0, w = 0;
    std::vector<double> v;
    double at(int i, int j) const { return v[static_cast<size_t>(i) * w + j]; }
};

// Separable Gaussian window, replicate padding.
Plane gauss_filter(const Plane& p, const std::vector<double>& taps) {
    const int r = static_cast<int>(taps.size()) / 2;
    Plane tmp{p.h, p.w, std::vector<double>(p.v.size())};
    for (int i = 0; i < p.h; ++i)
        for (int j = 0; j < p.w; ++j) {
            double acc = 0;
            for (int t = -r; t <= r; ++t)
                acc += taps[t + r] * p.at(i, std::clamp(j + t, 0, p.w - 1));
            tmp.v[static_cast<size_t>(i) * p.w + j] = acc;
        }
    Plane out{p.h, p.w, std::vector<double>(p.v.size())};
    for (int i = 0; i < p.h; ++i)
        for (int j = 0; j < p.w; ++j) {
            double acc = 0;
            for (int t = -r; t <= r; ++t)
                acc += taps[t + r] * tmp.at(std::clamp(i + t, 0, p.h - 1), j);
            out.v[static_cast<size_t>(i) * p.w + j] = acc;
        }
    return out;
}

Plane decimate2(const Plane& p) {
    Plane out{(p.h + 1) / 2, (p.w + 1) / 2, {}};
    out.v.resize(static_cast<size_t>(out.h) * out.w);
    for (int i = 0; i < out.h; ++i)
        for (int j = 0; j < out.w; ++j)
            out.v[static_cast<size_t>(i) * out.w + j] = p.at(2 * i, 2 * j);
    return out;
}

std::vector<double> gauss_taps(int n) {
    const double sigma = n / 5.0;
    const int r = n / 2;
    std::vector<double> taps(n);
    double sum = 0;
    for (int t = -r; t <= r; ++t) {
        taps[t + r] = std::exp(-(t * t) / (2.0 * sigma * sigma));
        sum += taps[t + r];
    }
    for (double& x : taps) x /= sum;
    return taps;
}

Plane mul(const Plane& a, const Plane& b) {
    Plane out{a.h, a.w, std::vector<double>(a.v.size())};
    for (size_t i = 0; i < a.v.size(); ++i) out.v[i] = a.v[i] * b.v[i];
    return out;
}

} // namespace

double vif(const img::Image& reference, const img::Image& distorted) {
    if (reference.height != distorted.height || reference.width != distorted.width)
        throw DimensionError("vif inputs must have equal dimensions");
    {
        // The coarsest scale sees the image decimated three times.
        int h = reference.height, w = reference.width;
        for (int s = 0; s < 3; ++s) {
            h = (h + 1) / 2;
            w = (w + 1) / 2;
        }
        if (h < 8 || w < 8)
            throw DimensionError("vif needs at least 8x8 at the coarsest scale");
    }

    // Internal 0-255 scale; the noise variance constant assumes it.
    constexpr double kSigmaN2 = 2.0;
    Plane ref{reference.height, reference.width, {}};
    Plane dist{distorted.height, distorted.width, {}};
    ref.v.resize(reference.data.size());
    dist.v.resize(distorted.data.size());
    for (size_t i = 0; i < ref.v.size(); ++i) ref.v[i] = 255.0 * reference.data[i];
    for (size_t i = 0; i < dist.v.size(); ++i) dist.v[i] = 255.0 * distorted.data[i];

    double num = 0, den = 0;
    for (int scale = 1; scale <= 4; ++scale) {
        const int n = (1 << (5 - scale)) + 1;  // 17, 9, 5, 3
        const auto taps = gauss_taps(n);
        if (scale > 1) {
            ref = decimate2(gauss_filter(ref, taps));
            dist = decimate2(gauss_filter(dist, taps));
        }
        const Plane mu1 = gauss_filter(ref, taps);
        const Plane mu2 = gauss_filter(dist, taps);
        const Plane m11 = gauss_filter(mul(ref, ref), taps);
        const Plane m22 = gauss_filter(mul(dist, dist), taps);
        const Plane m12 = gauss_filter(mul(ref, dist), taps);

        for (size_t i = 0; i < mu1.v.size(); ++i) {
            double var1 = m11.v[i] - mu1.v[i] * mu1.v[i];
            double var2 = m22.v[i] - mu2.v[i] * mu2.v[i];
            const double cov = m12.v[i] - mu1.v[i] * mu2.v[i];
            if (var1 < 0) var1 = 0;
            if (var2 < 0) var2 = 0;
            // Flat reference windows carry no information in either sum.
            if (var1 < 1e-10) continue;
            double g = cov / var1;
            if (g < 0) g = 0;
            double sv = var2 - g * cov;
            if (sv < 0) sv = 0;
            num += std::log2(1.0 + g * g * var1 / (sv + kSigmaN2));
            den += std::log2(1.0 + var1 / kSigmaN2);
        }
    }
    if (den == 0) return 1.0;  // constant reference carries no information
    return num / den;
}

double viff_fusion(const img::Image& ir, const img::Image& vi, const img::Image& fused) {
    return 0.5 * (vif(ir, fused) + vif(vi, fused));
}

double iqa_star(const img::Image& im) {
    return 0.5 * std::tanh(4.0 * avg_gradient(im)) + 0.5 * std::tanh(4.0 * std_dev(im));
}

MetricVector metric_vector(const img::Image& fused, const img::Image& ir,
                           const img::Image& vi) {
    MetricVector m;
    m.ag = avg_gradient(fused);
    m.ei = edge_intensity(fused);
    m.vif = viff_fusion(ir, vi, fused);
    m.sd = std_dev(fused);
    m.iqa = iqa_star(fused);
    return m;
}

double RunningNormalizer::fold(int channel, double x) {
    Range& r = ranges_[channel];
    if (!r.seen) {
        r.lo = r.hi = x;
        r.seen = true;
    } else {
        r.lo = std::min(r.lo, x);
        r.hi = std::max(r.hi, x);
    }
    return (x - r.lo) / (r.hi - r.lo + eps_);
}

MetricVector RunningNormalizer::fold(const MetricVector& m) {
    MetricVector out;
    for (int c = 0; c < MetricVector::size(); ++c) out[c] = fold(c, m[c]);
    return out;
}

} // namespace fusecurr::metrics
