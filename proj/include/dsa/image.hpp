#pragma once

#include <cstdint>
#include <vector>

#include "dsa/geometry.hpp"

namespace dsa {

/// Dense RGB raster, row-major, values in [0, 1]. Channel layout is
/// data[(y * width + x) * 3 + c].
struct Image {
    int height = 0;
    int width = 0;
    std::vector<double> data;

    Image() = default;
    Image(int h, int w) : height(h), width(w), data(static_cast<std::size_t>(h) * w * 3, 0.0) {}

    double& at(int x, int y, int c) { return data[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
    double at(int x, int y, int c) const { return data[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }

    bool in_bounds(int x, int y) const { return x >= 0 && x < width && y >= 0 && y < height; }

    /// Exact (0,0,0), the blank test used by compositing.
    bool is_black(int x, int y) const {
        const std::size_t i = (static_cast<std::size_t>(y) * width + x) * 3;
        return data[i] == 0.0 && data[i + 1] == 0.0 && data[i + 2] == 0.0;
    }

    std::size_t value_count() const { return data.size(); }
};

/// Binary raster aligned with an Image.
struct Mask {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> data;

    Mask() = default;
    Mask(int h, int w) : height(h), width(w), data(static_cast<std::size_t>(h) * w, 0) {}

    std::uint8_t& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
    std::uint8_t at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }

    std::size_t count() const;
};

struct PixelCoord {
    int x = 0;
    int y = 0;
    bool operator==(const PixelCoord&) const = default;
};

/// Unordered set of pixel coordinates, stored sorted row-major.
using PixelSet = std::vector<PixelCoord>;

/// Euclidean norm of the RGB triple at (x, y).
double pixel_norm(const Image& img, int x, int y);

/// Pixels whose color magnitude strictly exceeds t0. With t0 = 0 this is
/// exactly the set of non-black pixels.
Mask support_mask(const Image& img, double t0);

PixelSet mask_pixels(const Mask& m);

/// Sub-raster over the integer pixels of box intersected with the image.
/// Throws std::invalid_argument when the intersection is empty.
Image crop(const Image& img, const BoundingBox& box);

} // namespace dsa
