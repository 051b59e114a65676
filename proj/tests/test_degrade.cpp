#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "fusecurr/degrade.hpp"
#include "fusecurr/metrics.hpp"
#include "fusecurr/rng.hpp"

using namespace fusecurr;

namespace {

img::Image random_image(int n, std::uint64_t seed) {
    rng::Stream rs(seed);
    std::vector<double> d(static_cast<size_t>(n) * n);
    for (double& x : d) x = rs.uniform();
    return img::Image(n, n, std::move(d));
}

img::Image constant(int n, double v) {
    return img::Image(n, n, std::vector<double>(static_cast<size_t>(n) * n, v));
}

bool bit_equal(const img::Image& a, const img::Image& b) {
    return a.height == b.height && a.width == b.width && a.data == b.data;
}

} // namespace

TEST_CASE("blur strength zero is a bit-exact identity") {
    const img::Image x = random_image(16, 1);
    CHECK(bit_equal(degrade::gaussian_blur(x, 0.0), x));
}

TEST_CASE("blur preserves constant images exactly") {
    const img::Image c = constant(16, 0.37);
    for (double d : {0.25, 0.5, 1.0}) CHECK(bit_equal(degrade::gaussian_blur(c, d), c));
}

TEST_CASE("blur impulse response equals the analytic separable kernel") {
    std::vector<double> data(81, 0.0);
    data[4 * 9 + 4] = 1.0;  // impulse at the center of a 9x9 zero image
    const img::Image out = degrade::gaussian_blur(img::Image(9, 9, std::move(data)), 1.0);

    // d = 1 -> k = 7, sigma = 7/6; taps computed independently here.
    const int k = 7;
    const double sigma = k / 6.0;
    std::vector<double> taps(k);
    double sum = 0;
    for (int t = 0; t < k; ++t) {
        const double u = t - (k - 1) / 2.0;
        taps[t] = std::exp(-u * u / (2 * sigma * sigma));
        sum += taps[t];
    }
    for (double& t : taps) t /= sum;

    for (int i = 0; i < 9; ++i)
        for (int j = 0; j < 9; ++j) {
            const int di = i - 4, dj = j - 4;
            const double expect =
                (std::abs(di) <= 3 && std::abs(dj) <= 3) ? taps[di + 3] * taps[dj + 3] : 0.0;
            CHECK(out.at(i, j) == doctest::Approx(expect).epsilon(1e-9).scale(1.0));
        }
}

TEST_CASE("blur strength grid maps to kernel sizes 1,3,5,5,7") {
    const img::Image x = random_image(16, 2);
    const img::Image b025 = degrade::gaussian_blur(x, 0.25);
    const img::Image b050 = degrade::gaussian_blur(x, 0.5);
    const img::Image b075 = degrade::gaussian_blur(x, 0.75);
    const img::Image b100 = degrade::gaussian_blur(x, 1.0);
    CHECK(bit_equal(b050, b075));       // both round to k = 5
    CHECK_FALSE(bit_equal(b025, b050)); // k = 3 vs k = 5
    CHECK_FALSE(bit_equal(b075, b100)); // k = 5 vs k = 7
}

TEST_CASE("dct compression error floors") {
    const img::Image x = random_image(16, 3);

    SUBCASE("d = 0 stays within the 1/255 quantization step") {
        const img::Image y = degrade::dct_compress(x, 0.0);
        for (int i = 0; i < x.pixels(); ++i)
            CHECK(std::abs(y.data[i] - x.data[i]) <= 1.0 / 255.0);
    }
    SUBCASE("constant blocks survive within q/16") {
        const img::Image c = constant(16, 0.52);
        for (double d : {0.0, 0.5, 1.0}) {
            const double q = (1.0 + 49.0 * d) / 255.0;
            const img::Image y = degrade::dct_compress(c, d);
            for (int i = 0; i < c.pixels(); ++i)
                CHECK(std::abs(y.data[i] - c.data[i]) <= q / 16.0 + 1e-12);
        }
    }
}

TEST_CASE("dct transform round-trips without quantization") {
    for (int n : {16, 24}) {
        const img::Image x = random_image(n, 4);
        const img::Image y = degrade::dct_roundtrip(x);
        for (int i = 0; i < x.pixels(); ++i)
            CHECK(std::abs(y.data[i] - x.data[i]) <= 1e-10);
    }
    // Non-multiple-of-8 dims exercise the replicate-padded edge blocks.
    rng::Stream rs(5);
    std::vector<double> d(12 * 20);
    for (double& v : d) v = rs.uniform();
    const img::Image odd(12, 20, std::move(d));
    const img::Image y = degrade::dct_roundtrip(odd);
    for (int i = 0; i < odd.pixels(); ++i)
        CHECK(std::abs(y.data[i] - odd.data[i]) <= 1e-10);
}

TEST_CASE("jitter identity point is bit-exact") {
    const img::Image x = random_image(16, 6);
    CHECK(bit_equal(degrade::color_jitter(x, 0.5, 0.5), x));
}

TEST_CASE("jitter on a constant image only applies brightness") {
    const img::Image c = constant(16, 0.4);
    const img::Image y = degrade::color_jitter(c, 1.0, 0.2);  // beta = 1.5
    for (double v : y.data) CHECK(v == doctest::Approx(0.6).epsilon(1e-12));
}

TEST_CASE("gamma 0.5 halves deviations around the mean") {
    // Two-level image {0.3, 0.7}, beta = 1 -> mu = 0.5; gamma = 0.5 maps the
    // levels to {0.4, 0.6}.
    std::vector<double> d(64);
    for (int i = 0; i < 64; ++i) d[i] = i < 32 ? 0.3 : 0.7;
    const img::Image y = degrade::color_jitter(img::Image(8, 8, std::move(d)), 0.5, 0.0);
    for (int i = 0; i < 64; ++i)
        CHECK(y.data[i] == doctest::Approx(i < 32 ? 0.4 : 0.6).epsilon(1e-12));
}

TEST_CASE("contrast deviation scales monotonically in |gamma - 1|") {
    // Low-contrast base so no clamping interferes across the whole gamma range.
    rng::Stream rs(7);
    std::vector<double> d(256);
    for (double& x : d) x = 0.4 + 0.2 * rs.uniform();
    const img::Image base(16, 16, std::move(d));

    // With beta = 1 and no clamping, sd scales by gamma exactly, so the shift
    // in deviation energy |sd - sd_base| grows with |gamma - 1| on both sides.
    const double sd_base = metrics::std_dev(base);
    auto shift_at = [&](double c) {
        return std::abs(metrics::std_dev(degrade::color_jitter(base, 0.5, c)) - sd_base);
    };
    CHECK(shift_at(0.0) > shift_at(0.25));   // gamma 0.5 vs 0.75
    CHECK(shift_at(0.25) > shift_at(0.45));  // gamma 0.75 vs 0.95
    CHECK(shift_at(0.55) < shift_at(0.75));  // gamma 1.05 vs 1.25
    CHECK(shift_at(0.75) < shift_at(1.0));   // gamma 1.25 vs 1.5
}

TEST_CASE("noise zero strength and determinism") {
    const img::Image x = random_image(16, 8);
    CHECK(bit_equal(degrade::add_noise(x, 0.0, 123), x));
    CHECK(bit_equal(degrade::add_noise(x, 0.7, 123), degrade::add_noise(x, 0.7, 123)));
    CHECK_FALSE(bit_equal(degrade::add_noise(x, 0.7, 123), degrade::add_noise(x, 0.7, 124)));
}

TEST_CASE("noise sample sigma is near 0.1 at full strength") {
    const img::Image mid = constant(64, 0.5);
    const img::Image y = degrade::add_noise(mid, 1.0, 42);
    double mu = 0;
    for (double v : y.data) mu += v - 0.5;
    mu /= y.pixels();
    double var = 0;
    for (double v : y.data) var += (v - 0.5 - mu) * (v - 0.5 - mu);
    const double sigma = std::sqrt(var / y.pixels());
    CHECK(sigma > 0.085);  // 3-sigma band around 0.1 for 4096 draws
    CHECK(sigma < 0.115);
    CHECK(std::abs(mu) < 0.005);
}

TEST_CASE("identity parameter point stays within the compression floor") {
    const img::Image ir = random_image(32, 9);
    const img::Image vi = random_image(32, 10);
    const auto [dir, dvi] =
        degrade::degrade_pair(ir, vi, degrade::DegradationParams::identity(), 55);
    for (int i = 0; i < ir.pixels(); ++i) {
        CHECK(std::abs(dir.data[i] - ir.data[i]) <= 1.0 / 255.0);
        CHECK(std::abs(dvi.data[i] - vi.data[i]) <= 1.0 / 255.0);
    }
}

TEST_CASE("degrade_pair is deterministic and uses distinct noise per image") {
    const img::Image x = random_image(32, 11);
    degrade::DegradationParams p;
    p.noise = 0.8;

    const auto [a1, b1] = degrade::degrade_pair(x, x, p, 5);
    const auto [a2, b2] = degrade::degrade_pair(x, x, p, 5);
    CHECK(bit_equal(a1, a2));
    CHECK(bit_equal(b1, b2));
    // Same source image, same params: only the per-image seed differs.
    CHECK_FALSE(bit_equal(a1, b1));
}

TEST_CASE("full-strength blur cannot raise the average gradient") {
    const img::Image x = random_image(64, 12);
    degrade::DegradationParams p;
    p.blur = 1.0;
    const auto [dx, dy] = degrade::degrade_pair(x, x, p, 1);
    CHECK(metrics::avg_gradient(dx) <= metrics::avg_gradient(x));
    CHECK(metrics::avg_gradient(dy) <= metrics::avg_gradient(x));
}

TEST_CASE("outputs stay inside [0,1] at the strongest settings") {
    const img::Image x = random_image(32, 13);
    degrade::DegradationParams p;
    p.blur = 1.0;
    p.compress = 1.0;
    p.brightness = 1.0;
    p.contrast = 1.0;
    p.noise = 1.0;
    const img::Image y = degrade::degrade_image(x, p, 99);
    for (double v : y.data) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
}

TEST_CASE("pipeline order is blur, jitter, noise, compress") {
    const img::Image x = random_image(32, 14);
    degrade::DegradationParams p;
    p.blur = 0.7;
    p.brightness = 0.9;
    p.contrast = 0.3;
    p.noise = 0.4;
    p.compress = 0.6;
    const std::uint64_t seed = 17;

    img::Image staged = degrade::gaussian_blur(x, p.blur);
    staged = degrade::color_jitter(staged, p.brightness, p.contrast);
    staged = degrade::add_noise(staged, p.noise, seed);
    staged = degrade::dct_compress(staged, p.compress);
    CHECK(bit_equal(degrade::degrade_image(x, p, seed), staged));
}
