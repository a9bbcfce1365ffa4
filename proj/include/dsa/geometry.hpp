#pragma once

#include <algorithm>
#include <cmath>

namespace dsa {

/// Axis-aligned box in real pixel coordinates, half-open on both axes:
/// integer pixel (ix, iy) lies inside iff x_min <= ix < x_max and
/// y_min <= iy < y_max. Boxes may extend beyond the image.
struct BoundingBox {
    double x_min = 0.0;
    double y_min = 0.0;
    double x_max = 0.0;
    double y_max = 0.0;

    double width() const { return x_max - x_min; }
    double height() const { return y_max - y_min; }
    double area() const { return valid() ? width() * height() : 0.0; }
    double center_x() const { return 0.5 * (x_min + x_max); }
    double center_y() const { return 0.5 * (y_min + y_max); }
    bool valid() const { return x_max > x_min && y_max > y_min; }
};

/// One candidate object hypothesis.
struct Detection {
    double score = 0.0; ///< objectness in [0, 1]
    BoundingBox box;
    double occ = 0.0;   ///< occlusion score in [0, 1]; higher paints first
    int cls = 0;        ///< class label in {1..10}
};

inline double intersection_area(const BoundingBox& a, const BoundingBox& b) {
    const double w = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
    const double h = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
    if (w <= 0.0 || h <= 0.0) return 0.0;
    return w * h;
}

/// Intersection over union; 0 when the union is degenerate.
inline double iou(const BoundingBox& a, const BoundingBox& b) {
    const double inter = intersection_area(a, b);
    const double uni = a.area() + b.area() - inter;
    if (uni <= 0.0) return 0.0;
    return inter / uni;
}

/// Distance-IoU: iou minus squared center distance over squared diagonal of
/// the smallest enclosing box. Negative for distant disjoint boxes.
inline double diou(const BoundingBox& a, const BoundingBox& b) {
    const double dx = a.center_x() - b.center_x();
    const double dy = a.center_y() - b.center_y();
    const double ex = std::max(a.x_max, b.x_max) - std::min(a.x_min, b.x_min);
    const double ey = std::max(a.y_max, b.y_max) - std::min(a.y_min, b.y_min);
    const double c2 = ex * ex + ey * ey;
    if (c2 <= 0.0) return iou(a, b);
    return iou(a, b) - (dx * dx + dy * dy) / c2;
}

/// Integer pixel span covered by a box (half-open), before image clipping.
struct RasterBox {
    int x0 = 0;
    int y0 = 0;
    int x1 = 0;
    int y1 = 0;

    int width() const { return x1 - x0; }
    int height() const { return y1 - y0; }
    bool empty() const { return x1 <= x0 || y1 <= y0; }
};

inline RasterBox raster_box(const BoundingBox& b) {
    return RasterBox{static_cast<int>(std::ceil(b.x_min)), static_cast<int>(std::ceil(b.y_min)),
                     static_cast<int>(std::ceil(b.x_max)), static_cast<int>(std::ceil(b.y_max))};
}

/// Raster span clipped to an image of the given size.
inline RasterBox raster_box(const BoundingBox& b, int image_width, int image_height) {
    RasterBox r = raster_box(b);
    r.x0 = std::max(r.x0, 0);
    r.y0 = std::max(r.y0, 0);
    r.x1 = std::min(r.x1, image_width);
    r.y1 = std::min(r.y1, image_height);
    return r;
}

} // namespace dsa
