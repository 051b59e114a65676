#pragma once

#include <array>

#include "fusecurr/imgio.hpp"

namespace fusecurr::metrics {

// Scalar no-reference statistics. All take a single grayscale image unless
// noted. Formula variants are frozen here and relied on by the trainer, so
// changing any of them invalidates saved logs.

/// Mean forward-difference gradient magnitude: sqrt((dx^2 + dy^2) / 2)
/// averaged over the (H-1)(W-1) positions that have both neighbors.
double avg_gradient(const img::Image& im);

/// sqrt(RF^2 + CF^2) with RF the RMS horizontal difference and CF the RMS
/// vertical difference.
double spatial_frequency(const img::Image& im);

/// Mean Sobel gradient magnitude, replicate padding at the border.
double edge_intensity(const img::Image& im);

/// Shannon entropy (bits) over a 256-bin histogram; bin = min(floor(p*256), 255).
double entropy(const img::Image& im);

/// Population standard deviation.
double std_dev(const img::Image& im);

/// Per-pixel Sobel gradient magnitude map (replicate padding). Values are
/// not rescaled; shared by edge_intensity and the saliency-based fusion rule.
std::vector<double> sobel_magnitude(const img::Image& im);

/// Pixel-domain visual fidelity over 4 scales: Gaussian window N = 2^(5-s)+1
/// with sigma N/5, decimation by 2 before scales 2..4, noise variance 2 on a
/// 0-255 scale. Identical inputs give exactly 1.0; a constant reference gives
/// 1.0 by convention. Inputs must have equal dimensions and remain at least
/// 8x8 at the coarsest scale.
double vif(const img::Image& reference, const img::Image& distorted);

/// Fusion fidelity: mean of vif(ir, fused) and vif(vi, fused).
double viff_fusion(const img::Image& ir, const img::Image& vi, const img::Image& fused);

/// Bounded no-reference sharpness/contrast proxy:
/// 0.5*tanh(4*avg_gradient) + 0.5*tanh(4*std_dev).
double iqa_star(const img::Image& im);

/// The five statistics the training loop tracks, in a fixed channel order.
struct MetricVector {
    double ag = 0;
    double ei = 0;
    double vif = 0;  // viff_fusion against the source pair
    double sd = 0;
    double iqa = 0;

    double operator[](int i) const { return (&ag)[i]; }
    double& operator[](int i) { return (&ag)[i]; }
    static constexpr int size() { return 5; }
};

MetricVector metric_vector(const img::Image& fused, const img::Image& ir,
                           const img::Image& vi);

/// Running min/max normalizer with one channel per tracked metric. fold()
/// first widens the running range with the new value, then maps it through
/// (x - min) / (max - min + eps) with eps = 1e-6, so outputs stay in [0, 1)
/// and the first observation of a channel maps to 0.
class RunningNormalizer {
public:
    enum Channel { kAg = 0, kEi = 1, kVif = 2, kSd = 3, kIqa = 4 };

    explicit RunningNormalizer(double eps = 1e-6) : eps_(eps) {}

    double fold(int channel, double x);
    MetricVector fold(const MetricVector& m);

private:
    struct Range {
        double lo = 0, hi = 0;
        bool seen = false;
    };
    std::array<Range, MetricVector::size()> ranges_;
    double eps_;
};

} // namespace fusecurr::metrics
