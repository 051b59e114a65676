#include "fusecurr/imgio.hpp"

#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>

namespace fusecurr::img {

namespace {

constexpr int kMinSide = 8;

void check_dims(int h, int w) {
    if (h < kMinSide || w < kMinSide)
        throw DimensionError("image must be at least 8x8, got " + std::to_string(h) +
                             "x" + std::to_string(w));
}

void check_range(const std::vector<double>& d) {
    for (double x : d)
        if (!(x >= 0.0 && x <= 1.0))
            throw Error("image value out of [0,1]: " + std::to_string(x));
}

// Skips whitespace and '#' comment lines, then reads one unsigned decimal.
// PGM headers allow comments anywhere between tokens.
int read_header_int(std::istream& in, const char* what) {
    int c = in.get();
    while (c != EOF) {
        if (c == '#') {
            while (c != EOF && c != '\n') c = in.get();
        } else if (std::isspace(c)) {
            c = in.get();
        } else {
            break;
        }
    }
    if (c == EOF || !std::isdigit(c))
        throw ParseError(std::string("expected ") + what + " in PGM header");
    long v = 0;
    while (c != EOF && std::isdigit(c)) {
        v = v * 10 + (c - '0');
        if (v > 1 << 30) throw ParseError(std::string(what) + " out of range");
        c = in.get();
    }
    if (c != EOF) in.unget();
    return static_cast<int>(v);
}

} // namespace

Image::Image(int h, int w) : height(h), width(w), data(static_cast<size_t>(h) * w, 0.0) {
    check_dims(h, w);
}

Image::Image(int h, int w, std::vector<double> d)
    : height(h), width(w), data(std::move(d)) {
    check_dims(h, w);
    if (data.size() != static_cast<size_t>(h) * w)
        throw DimensionError("pixel count does not match dimensions");
    check_range(data);
}

ColorImage::ColorImage(int h, int w) : height(h), width(w) {
    check_dims(h, w);
    for (auto& p : planes) p.assign(static_cast<size_t>(h) * w, 0.0);
}

Image load_pgm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);

    char m0 = 0, m1 = 0;
    in.get(m0);
    in.get(m1);
    if (m0 != 'P' || (m1 != '5' && m1 != '2'))
        throw ParseError("not a PGM file (bad magic): " + path);
    const bool binary = m1 == '5';

    const int w = read_header_int(in, "width");
    const int h = read_header_int(in, "height");
    const int maxval = read_header_int(in, "maxval");
    if (maxval < 1 || maxval > 65535)
        throw ParseError("maxval out of range: " + std::to_string(maxval));
    check_dims(h, w);

    const size_t n = static_cast<size_t>(h) * w;
    std::vector<double> px(n);
    const double scale = 1.0 / maxval;

    if (binary) {
        // Exactly one whitespace byte separates the header from the raster.
        int sep = in.get();
        if (sep == EOF || !std::isspace(sep))
            throw ParseError("missing whitespace after maxval");
        const int bytes = maxval > 255 ? 2 : 1;
        std::vector<unsigned char> raw(n * bytes);
        in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
        if (static_cast<size_t>(in.gcount()) != raw.size())
            throw ParseError("truncated pixel data in " + path);
        for (size_t i = 0; i < n; ++i) {
            unsigned v = bytes == 2
                             ? (unsigned(raw[2 * i]) << 8) | raw[2 * i + 1]  // big-endian
                             : raw[i];
            if (v > static_cast<unsigned>(maxval))
                throw ParseError("sample exceeds maxval in " + path);
            px[i] = v * scale;
        }
    } else {
        for (size_t i = 0; i < n; ++i) {
            const int v = read_header_int(in, "sample");
            if (v > maxval) throw ParseError("sample exceeds maxval in " + path);
            px[i] = v * scale;
        }
    }
    return Image(h, w, std::move(px));
}

void save_pgm(const std::string& path, const Image& im, int maxval) {
    if (maxval != 255 && maxval != 65535)
        throw Error("save_pgm: maxval must be 255 or 65535");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);

    out << "P5\n" << im.width << " " << im.height << "\n" << maxval << "\n";
    const int bytes = maxval > 255 ? 2 : 1;
    std::vector<unsigned char> raw(static_cast<size_t>(im.pixels()) * bytes);
    for (int i = 0; i < im.pixels(); ++i) {
        double v = std::round(im.data[i] * maxval);
        v = std::min(static_cast<double>(maxval), std::max(0.0, v));
        const unsigned u = static_cast<unsigned>(v);
        if (bytes == 2) {
            raw[2 * i] = static_cast<unsigned char>(u >> 8);
            raw[2 * i + 1] = static_cast<unsigned char>(u & 0xff);
        } else {
            raw[i] = static_cast<unsigned char>(u);
        }
    }
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!out) throw IoError("write failed for " + path);
}

namespace {
double clamp01(double x) { return x < 0.0 ? 0.0 : (x > 1.0 ? 1.0 : x); }
} // namespace

std::array<Image, 3> rgb_to_ycbcr(const ColorImage& rgb) {
    const size_t n = static_cast<size_t>(rgb.height) * rgb.width;
    std::vector<double> y(n), cb(n), cr(n);
    for (size_t i = 0; i < n; ++i) {
        const double r = rgb.planes[0][i], g = rgb.planes[1][i], b = rgb.planes[2][i];
        y[i] = clamp01(0.299 * r + 0.587 * g + 0.114 * b);
        cb[i] = clamp01(-0.168736 * r - 0.331264 * g + 0.5 * b + 0.5);
        cr[i] = clamp01(0.5 * r - 0.418688 * g - 0.081312 * b + 0.5);
    }
    return {Image(rgb.height, rgb.width, std::move(y)),
            Image(rgb.height, rgb.width, std::move(cb)),
            Image(rgb.height, rgb.width, std::move(cr))};
}

ColorImage ycbcr_to_rgb(const Image& y, const Image& cb, const Image& cr) {
    if (y.height != cb.height || y.width != cb.width || y.height != cr.height ||
        y.width != cr.width)
        throw DimensionError("YCbCr planes disagree in size");
    ColorImage rgb(y.height, y.width);
    const size_t n = static_cast<size_t>(y.height) * y.width;
    for (size_t i = 0; i < n; ++i) {
        const double yy = y.data[i], u = cb.data[i] - 0.5, v = cr.data[i] - 0.5;
        rgb.planes[0][i] = clamp01(yy + 1.402 * v);
        rgb.planes[1][i] = clamp01(yy - 0.344136 * u - 0.714136 * v);
        rgb.planes[2][i] = clamp01(yy + 1.772 * u);
    }
    return rgb;
}

} // namespace fusecurr::img
