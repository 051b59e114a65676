#pragma once

#include <array>
#include <string>
#include <vector>

#include "fusecurr/errors.hpp"

namespace fusecurr::img {

/// Grayscale image, row-major doubles in [0, 1]. The constructor enforces the
/// size floor (8x8) and the value range; operations clamp before constructing.
struct Image {
    int height = 0;
    int width = 0;
    std::vector<double> data;

    Image() = default;
    Image(int h, int w);                          // zero-filled
    Image(int h, int w, std::vector<double> d);   // validates range

    double at(int i, int j) const { return data[static_cast<size_t>(i) * width + j]; }
    double& at(int i, int j) { return data[static_cast<size_t>(i) * width + j]; }
    int pixels() const { return height * width; }
};

/// Three-plane RGB image, same layout rules per plane.
struct ColorImage {
    int height = 0;
    int width = 0;
    std::array<std::vector<double>, 3> planes;  // R, G, B

    ColorImage() = default;
    ColorImage(int h, int w);
};

/// Read a PGM file (binary P5 or ASCII P2, maxval up to 65535, multi-byte
/// samples big-endian). Header comments (#) are honored. Throws ParseError on
/// malformed content, DimensionError for images under 8x8, IoError if the
/// file cannot be opened.
Image load_pgm(const std::string& path);

/// Write binary P5. maxval must be 255 or 65535; values are scaled, rounded
/// to nearest and clamped.
void save_pgm(const std::string& path, const Image& im, int maxval = 255);

/// BT.601 full-range conversions with chroma offset +0.5; outputs clamped.
/// Channel order in/out of the YCbCr triple is {Y, Cb, Cr}.
std::array<Image, 3> rgb_to_ycbcr(const ColorImage& rgb);
ColorImage ycbcr_to_rgb(const Image& y, const Image& cb, const Image& cr);

} // namespace fusecurr::img
