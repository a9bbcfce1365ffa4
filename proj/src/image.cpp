#include "dsa/image.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace dsa {

std::size_t Mask::count() const {
    return std::accumulate(data.begin(), data.end(), std::size_t{0},
                           [](std::size_t acc, std::uint8_t v) { return acc + (v != 0); });
}

double pixel_norm(const Image& img, int x, int y) {
    const double r = img.at(x, y, 0);
    const double g = img.at(x, y, 1);
    const double b = img.at(x, y, 2);
    return std::sqrt(r * r + g * g + b * b);
}

Mask support_mask(const Image& img, double t0) {
    Mask m(img.height, img.width);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            if (pixel_norm(img, x, y) > t0) m.at(x, y) = 1;
    return m;
}

PixelSet mask_pixels(const Mask& m) {
    PixelSet out;
    for (int y = 0; y < m.height; ++y)
        for (int x = 0; x < m.width; ++x)
            if (m.at(x, y)) out.push_back({x, y});
    return out;
}

Image crop(const Image& img, const BoundingBox& box) {
    const RasterBox r = raster_box(box, img.width, img.height);
    if (r.empty()) throw std::invalid_argument("box outside image");
    Image out(r.height(), r.width());
    for (int y = r.y0; y < r.y1; ++y)
        for (int x = r.x0; x < r.x1; ++x)
            for (int c = 0; c < 3; ++c)
                out.at(x - r.x0, y - r.y0, c) = img.at(x, y, c);
    return out;
}

} // namespace dsa
