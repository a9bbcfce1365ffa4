#include "dsa/scenegen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "dsa/rng.hpp"

namespace dsa::scenegen {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr int kClasses = 10;

// Base half extents (unit scale, unrotated) per class. Triangle vertices
// are listed separately.
struct ShapeDef {
    double hx;
    double hy;
    double inner; // annulus inner radius
};

constexpr ShapeDef kShapes[kClasses + 1] = {
    {0, 0, 0},      // unused slot 0
    {21, 21, 0},    // 1 disk
    {25, 15, 0},    // 2 ellipse
    {23, 23, 12},   // 3 annulus
    {17, 17, 0},    // 4 square
    {24, 5, 0},     // 5 wide thin rectangle
    {5, 24, 0},     // 6 tall thin rectangle
    {17, 12, 0},    // 7 medium rectangle
    {9, 21, 0},     // 8 tall narrow rectangle
    {21, 9, 0},     // 9 wide narrow rectangle
    {20, 18, 0},    // 10 triangle
};

constexpr double kTriX[3] = {0.0, -20.0, 20.0};
constexpr double kTriY[3] = {-18.0, 18.0, 18.0};

double shade_gamma(int cls) { return 0.18 + 0.032 * cls; }
int shade_power(int cls) { return 1 + cls % 3; }

bool inside_local(int cls, double u, double v) {
    const ShapeDef& s = kShapes[cls];
    switch (cls) {
        case 1:
            return u * u + v * v <= s.hx * s.hx;
        case 2:
            return (u / s.hx) * (u / s.hx) + (v / s.hy) * (v / s.hy) <= 1.0;
        case 3: {
            const double r2 = u * u + v * v;
            return r2 <= s.hx * s.hx && r2 >= s.inner * s.inner;
        }
        case 10: {
            // half-plane tests; the vertex loop runs clockwise in raster
            // coordinates (y down), so interior points sit on the negative
            // side of every edge
            for (int i = 0; i < 3; ++i) {
                const int j = (i + 1) % 3;
                const double ex = kTriX[j] - kTriX[i];
                const double ey = kTriY[j] - kTriY[i];
                if (ex * (v - kTriY[i]) - ey * (u - kTriX[i]) > 0.0) return false;
            }
            return true;
        }
        default:
            return std::fabs(u) <= s.hx && std::fabs(v) <= s.hy;
    }
}

double shade_at(int cls, double u, double v) {
    const ShapeDef& s = kShapes[cls];
    const double nu = u / s.hx;
    const double nv = v / s.hy;
    double rho = std::sqrt(nu * nu + nv * nv);
    if (rho > 1.0) rho = 1.0;
    double f = rho;
    for (int p = 1; p < shade_power(cls); ++p) f *= rho;
    return 1.0 - shade_gamma(cls) * f;
}

struct LocalFrame {
    double cx, cy, inv_scale, cos_r, sin_r;
    bool rotate;
};

LocalFrame local_frame(const ObjectSpec& o) {
    LocalFrame f;
    f.cx = o.center_x;
    f.cy = o.center_y;
    f.inv_scale = 1.0 / o.scale;
    f.rotate = !rotation_invariant(o.cls) && o.rotation != 0.0;
    const double a = o.rotation * (kPi / 180.0);
    f.cos_r = std::cos(a);
    f.sin_r = std::sin(a);
    return f;
}

// World lattice point to unrotated local shape coordinates.
inline void to_local(const LocalFrame& f, double x, double y, double* u, double* v) {
    const double dx = (x - f.cx) * f.inv_scale;
    const double dy = (y - f.cy) * f.inv_scale;
    if (f.rotate) {
        *u = f.cos_r * dx + f.sin_r * dy;
        *v = -f.sin_r * dx + f.cos_r * dy;
    } else {
        *u = dx;
        *v = dy;
    }
}

double wrap_degrees(double deg) {
    double r = std::fmod(deg, 360.0);
    if (r < 0.0) r += 360.0;
    return r;
}

Image upscale_bilinear(const Image& src, int x0, int y0, int side, int out_h, int out_w) {
    Image out(out_h, out_w);
    const double fx = static_cast<double>(side) / out_w;
    const double fy = static_cast<double>(side) / out_h;
    for (int y = 0; y < out_h; ++y) {
        const double sy = y0 + (y + 0.5) * fy - 0.5;
        const int iy = static_cast<int>(std::floor(sy));
        const double wy = sy - iy;
        for (int x = 0; x < out_w; ++x) {
            const double sx = x0 + (x + 0.5) * fx - 0.5;
            const int ix = static_cast<int>(std::floor(sx));
            const double wx = sx - ix;
            for (int c = 0; c < 3; ++c) {
                double acc = 0.0;
                for (int j = 0; j < 2; ++j) {
                    const int py = iy + j;
                    if (py < 0 || py >= src.height) continue;
                    for (int i = 0; i < 2; ++i) {
                        const int px = ix + i;
                        if (px < 0 || px >= src.width) continue;
                        acc += (i ? wx : 1.0 - wx) * (j ? wy : 1.0 - wy) * src.at(px, py, c);
                    }
                }
                out.at(x, y, c) = acc;
            }
        }
    }
    return out;
}

Mask resample_nearest(const Mask& src, int x0, int y0, int side, int out_h, int out_w) {
    Mask out(out_h, out_w);
    const double fx = static_cast<double>(side) / out_w;
    const double fy = static_cast<double>(side) / out_h;
    for (int y = 0; y < out_h; ++y) {
        int sy = y0 + static_cast<int>(std::floor((y + 0.5) * fy));
        sy = std::clamp(sy, 0, src.height - 1);
        for (int x = 0; x < out_w; ++x) {
            int sx = x0 + static_cast<int>(std::floor((x + 0.5) * fx));
            sx = std::clamp(sx, 0, src.width - 1);
            out.at(x, y) = src.at(sx, sy);
        }
    }
    return out;
}

BoundingBox tight_box(const Mask& m) {
    int x0 = m.width, y0 = m.height, x1 = -1, y1 = -1;
    for (int y = 0; y < m.height; ++y)
        for (int x = 0; x < m.width; ++x)
            if (m.at(x, y)) {
                x0 = std::min(x0, x);
                y0 = std::min(y0, y);
                x1 = std::max(x1, x);
                y1 = std::max(y1, y);
            }
    if (x1 < 0) return BoundingBox{};
    return BoundingBox{static_cast<double>(x0), static_cast<double>(y0),
                       static_cast<double>(x1 + 1), static_cast<double>(y1 + 1)};
}

ObjectSpec sample_object(int cls, Rng& rng, const SceneConfig& cfg) {
    ObjectSpec o;
    o.cls = cls;
    o.scale = rng.uniform(cfg.scale_lo, cfg.scale_hi);
    // Anisotropic classes stay within a limited rotation band so no class
    // masquerades as another's 90-degree twin; the invariant classes spin
    // freely.
    o.rotation = rotation_invariant(cls) ? rng.uniform(0.0, 360.0)
                                         : wrap_degrees(rng.uniform(-25.0, 25.0));
    double hx = 0.0, hy = 0.0;
    footprint_half_extents(cls, o.rotation, &hx, &hy);
    hx *= o.scale;
    hy *= o.scale;
    const double mx = hx + 1.5;
    const double my = hy + 1.5;
    o.center_x = rng.uniform(mx, cfg.canvas_w - mx);
    o.center_y = rng.uniform(my, cfg.canvas_h - my);
    return o;
}

Color sample_color(Rng& rng) {
    for (;;) {
        Color c{rng.uniform(), rng.uniform(), rng.uniform()};
        if (c.r + c.g + c.b >= 1.0) return c;
    }
}

std::size_t overlap_count(const Mask& a, const Mask& b) {
    std::size_t n = 0;
    for (std::size_t i = 0; i < a.data.size(); ++i) n += (a.data[i] && b.data[i]);
    return n;
}

} // namespace

int num_classes() { return kClasses; }

bool rotation_invariant(int cls) { return cls == 1 || cls == 3; }

void footprint_half_extents(int cls, double rotation_deg, double* hx, double* hy) {
    const ShapeDef& s = kShapes[cls];
    if (rotation_invariant(cls)) {
        *hx = s.hx;
        *hy = s.hy;
        return;
    }
    const double a = rotation_deg * (kPi / 180.0);
    const double ca = std::cos(a), sa = std::sin(a);
    if (cls == 2) {
        *hx = std::sqrt(s.hx * s.hx * ca * ca + s.hy * s.hy * sa * sa);
        *hy = std::sqrt(s.hx * s.hx * sa * sa + s.hy * s.hy * ca * ca);
        return;
    }
    if (cls == 10) {
        double mx = 0.0, my = 0.0;
        for (int i = 0; i < 3; ++i) {
            const double rx = ca * kTriX[i] - sa * kTriY[i];
            const double ry = sa * kTriX[i] + ca * kTriY[i];
            mx = std::max(mx, std::fabs(rx));
            my = std::max(my, std::fabs(ry));
        }
        *hx = mx;
        *hy = my;
        return;
    }
    *hx = s.hx * std::fabs(ca) + s.hy * std::fabs(sa);
    *hy = s.hx * std::fabs(sa) + s.hy * std::fabs(ca);
}

std::pair<Image, GroundTruth> render_scene(const std::vector<ObjectSpec>& specs,
                                           const Color& color, int canvas_h, int canvas_w) {
    const int n = static_cast<int>(specs.size());
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return specs[a].depth_rank < specs[b].depth_rank; });

    GroundTruth gt;
    gt.color = color;
    gt.objects.reserve(n);
    for (int k : order) gt.objects.push_back(specs[k]);
    gt.amodal_masks.assign(n, Mask());
    gt.visible_masks.assign(n, Mask(canvas_h, canvas_w));
    gt.boxes.assign(n, BoundingBox{});

    Image img(canvas_h, canvas_w);
    std::vector<int> owner(static_cast<std::size_t>(canvas_h) * canvas_w, -1);

    for (int i = 0; i < n; ++i) {
        const ObjectSpec& o = gt.objects[i];
        const LocalFrame f = local_frame(o);
        double hx = 0.0, hy = 0.0;
        footprint_half_extents(o.cls, o.rotation, &hx, &hy);
        const int x0 = std::max(0, static_cast<int>(std::floor(o.center_x - hx * o.scale)) - 1);
        const int y0 = std::max(0, static_cast<int>(std::floor(o.center_y - hy * o.scale)) - 1);
        const int x1 = std::min(canvas_w, static_cast<int>(std::ceil(o.center_x + hx * o.scale)) + 2);
        const int y1 = std::min(canvas_h, static_cast<int>(std::ceil(o.center_y + hy * o.scale)) + 2);

        Mask amodal(canvas_h, canvas_w);
        bool any = false;
        for (int y = y0; y < y1; ++y) {
            for (int x = x0; x < x1; ++x) {
                double u = 0.0, v = 0.0;
                to_local(f, x, y, &u, &v);
                if (!inside_local(o.cls, u, v)) continue;
                amodal.at(x, y) = 1;
                any = true;
                int& own = owner[static_cast<std::size_t>(y) * canvas_w + x];
                if (own >= 0) continue;
                own = i;
                gt.visible_masks[i].at(x, y) = 1;
                const double shade = shade_at(o.cls, u, v);
                img.at(x, y, 0) = color.r * shade;
                img.at(x, y, 1) = color.g * shade;
                img.at(x, y, 2) = color.b * shade;
            }
        }
        if (!any) throw std::runtime_error("degenerate placement: object " + std::to_string(i) +
                                           " fully off-canvas");
        gt.amodal_masks[i] = std::move(amodal);
        gt.boxes[i] = tight_box(gt.amodal_masks[i]);
    }
    return {std::move(img), std::move(gt)};
}

std::pair<Image, GroundTruth> materialize(const SceneRecord& rec, const SceneConfig& cfg) {
    auto [img, gt] = render_scene(rec.objects, rec.color, cfg.canvas_h, cfg.canvas_w);
    if (rec.enlarge_side <= 0) return {std::move(img), std::move(gt)};

    const int side = rec.enlarge_side;
    const double f = static_cast<double>(cfg.canvas_w) / side;
    Image out = upscale_bilinear(img, rec.enlarge_x0, rec.enlarge_y0, side, cfg.canvas_h,
                                 cfg.canvas_w);
    for (std::size_t i = 0; i < gt.boxes.size(); ++i) {
        BoundingBox& b = gt.boxes[i];
        b = BoundingBox{(b.x_min - rec.enlarge_x0) * f, (b.y_min - rec.enlarge_y0) * f,
                        (b.x_max - rec.enlarge_x0) * f, (b.y_max - rec.enlarge_y0) * f};
        gt.amodal_masks[i] = resample_nearest(gt.amodal_masks[i], rec.enlarge_x0, rec.enlarge_y0,
                                              side, cfg.canvas_h, cfg.canvas_w);
        gt.visible_masks[i] = resample_nearest(gt.visible_masks[i], rec.enlarge_x0,
                                               rec.enlarge_y0, side, cfg.canvas_h, cfg.canvas_w);
    }
    return {std::move(out), std::move(gt)};
}

std::vector<SceneRecord> gen_pairs_dataset(std::uint64_t seed, int n_per_class,
                                           const SceneConfig& cfg) {
    std::vector<int> classes;
    classes.reserve(static_cast<std::size_t>(kClasses) * n_per_class);
    for (int c = 1; c <= kClasses; ++c)
        for (int k = 0; k < n_per_class; ++k) classes.push_back(c);

    Rng shuffle_rng = sub_rng(seed, Stream::pairs, ~0ull);
    for (int i = static_cast<int>(classes.size()) - 1; i > 0; --i)
        std::swap(classes[i], classes[shuffle_rng.uniform_int(0, i)]);

    const int n_scenes = static_cast<int>(classes.size()) / 2;
    std::vector<SceneRecord> out;
    out.reserve(n_scenes);
    for (int s = 0; s < n_scenes; ++s) {
        Rng rng = sub_rng(seed, Stream::pairs, static_cast<std::uint64_t>(s));
        const int cls_a = classes[2 * s];
        const int cls_b = classes[2 * s + 1];
        int fail_sep = 0, fail_overlap = 0, fail_visible = 0;
        bool placed = false;
        SceneRecord rec;
        for (int attempt = 0; attempt < cfg.max_attempts && !placed; ++attempt) {
            rec.color = sample_color(rng);
            ObjectSpec a = sample_object(cls_a, rng, cfg);
            ObjectSpec b = sample_object(cls_b, rng, cfg);
            const bool a_front = rng.uniform() < 0.5;
            a.depth_rank = a_front ? 0 : 1;
            b.depth_rank = a_front ? 1 : 0;
            const double dx = a.center_x - b.center_x;
            const double dy = a.center_y - b.center_y;
            if (std::sqrt(dx * dx + dy * dy) < cfg.min_center_sep) {
                ++fail_sep;
                continue;
            }
            rec.objects = {a, b};
            auto [img, gt] = render_scene(rec.objects, rec.color, cfg.canvas_h, cfg.canvas_w);
            (void)img;
            if (overlap_count(gt.amodal_masks[0], gt.amodal_masks[1]) <
                static_cast<std::size_t>(cfg.min_pair_overlap)) {
                ++fail_overlap;
                continue;
            }
            if (gt.visible_masks[0].count() < static_cast<std::size_t>(cfg.min_visible) ||
                gt.visible_masks[1].count() < static_cast<std::size_t>(cfg.min_visible)) {
                ++fail_visible;
                continue;
            }
            placed = true;
        }
        if (!placed)
            throw std::runtime_error(
                "pair scene " + std::to_string(s) + ": rejection budget exhausted (sep " +
                std::to_string(fail_sep) + ", overlap " + std::to_string(fail_overlap) +
                ", visible " + std::to_string(fail_visible) + ")");
        out.push_back(std::move(rec));
    }
    return out;
}

std::vector<Image> decoder_class_images(const std::vector<SceneRecord>& pairs, int cls,
                                        const SceneConfig& cfg) {
    const int d = cfg.decoder_d;
    const int scratch = 160;
    std::vector<Image> out;
    for (const SceneRecord& rec : pairs) {
        for (const ObjectSpec& o : rec.objects) {
            if (o.cls != cls) continue;
            // The rotated footprint of some classes is asymmetric about the
            // object center, so measure the true tight span with a scratch
            // render before rescaling it to fill the decoder raster.
            ObjectSpec probe = o;
            probe.center_x = probe.center_y = 0.5 * scratch;
            probe.depth_rank = 0;
            auto [pimg, pgt] = render_scene({probe}, rec.color, scratch, scratch);
            const BoundingBox& tb = pgt.boxes[0];
            const double span = std::max(tb.width(), tb.height());
            const double grow = static_cast<double>(d) / span;
            ObjectSpec iso = probe;
            iso.scale = o.scale * grow;
            iso.center_x = 0.5 * d - grow * (tb.center_x() - probe.center_x);
            iso.center_y = 0.5 * d - grow * (tb.center_y() - probe.center_y);
            out.push_back(render_scene({iso}, rec.color, d, d).first);
        }
    }
    return out;
}

namespace {

std::vector<SceneRecord> gen_scenes(std::uint64_t seed, Stream stream, std::uint64_t index_base,
                                    int n_objects, int n_scenes, const SceneConfig& cfg) {
    std::vector<SceneRecord> out;
    out.reserve(n_scenes);
    for (int s = 0; s < n_scenes; ++s) {
        Rng rng = sub_rng(seed, stream, index_base + static_cast<std::uint64_t>(s));
        int fail_sep = 0, fail_visible = 0;
        bool placed = false;
        SceneRecord rec;
        for (int attempt = 0; attempt < cfg.max_attempts && !placed; ++attempt) {
            rec.color = sample_color(rng);
            rec.objects.clear();
            for (int i = 0; i < n_objects; ++i)
                rec.objects.push_back(sample_object(rng.uniform_int(1, kClasses), rng, cfg));
            for (int i = 0; i < n_objects; ++i) rec.objects[i].depth_rank = i;
            for (int i = n_objects - 1; i > 0; --i)
                std::swap(rec.objects[i].depth_rank, rec.objects[rng.uniform_int(0, i)].depth_rank);

            bool sep_ok = true;
            for (int i = 0; i < n_objects && sep_ok; ++i)
                for (int j = i + 1; j < n_objects && sep_ok; ++j) {
                    const double dx = rec.objects[i].center_x - rec.objects[j].center_x;
                    const double dy = rec.objects[i].center_y - rec.objects[j].center_y;
                    if (std::sqrt(dx * dx + dy * dy) < cfg.min_center_sep) sep_ok = false;
                }
            if (!sep_ok) {
                ++fail_sep;
                continue;
            }
            auto [img, gt] = render_scene(rec.objects, rec.color, cfg.canvas_h, cfg.canvas_w);
            (void)img;
            bool vis_ok = true;
            for (const Mask& m : gt.visible_masks)
                if (m.count() < static_cast<std::size_t>(cfg.min_visible)) vis_ok = false;
            if (!vis_ok) {
                ++fail_visible;
                continue;
            }
            placed = true;
        }
        if (!placed)
            throw std::runtime_error("eval scene (" + std::to_string(n_objects) + " objects, #" +
                                     std::to_string(s) + "): rejection budget exhausted (sep " +
                                     std::to_string(fail_sep) + ", visible " +
                                     std::to_string(fail_visible) + ")");
        out.push_back(std::move(rec));
    }
    return out;
}

} // namespace

EvalSets gen_eval_sets(std::uint64_t seed, const EvalSizes& sizes, const SceneConfig& cfg) {
    EvalSets sets;
    std::uint64_t base = 0;
    auto extend = [&](std::vector<SceneRecord>& dst, int n_objects, int n_scenes) {
        auto part = gen_scenes(seed, Stream::eval_scenes, base, n_objects, n_scenes, cfg);
        base += static_cast<std::uint64_t>(n_scenes);
        dst.insert(dst.end(), part.begin(), part.end());
    };
    extend(sets.val, 3, sizes.val3);
    extend(sets.val, 4, sizes.val4);
    extend(sets.test, 5, sizes.test5);
    extend(sets.test, 6, sizes.test6);
    extend(sets.test, 7, sizes.test7);
    return sets;
}

std::vector<SceneRecord> perturb_rotate(const std::vector<SceneRecord>& recs, double degrees) {
    const double delta = std::fmod(degrees, 360.0);
    if (delta == 0.0) return recs;
    std::vector<SceneRecord> out = recs;
    for (SceneRecord& rec : out)
        for (ObjectSpec& o : rec.objects) o.rotation = wrap_degrees(o.rotation + delta);
    return out;
}

std::vector<SceneRecord> perturb_enlarge(const std::vector<SceneRecord>& recs, int crop_side,
                                         const SceneConfig& cfg) {
    std::vector<SceneRecord> out = recs;
    for (SceneRecord& rec : out) {
        auto [img, gt] = render_scene(rec.objects, rec.color, cfg.canvas_h, cfg.canvas_w);
        (void)img;
        double x0 = cfg.canvas_w, y0 = cfg.canvas_h, x1 = 0.0, y1 = 0.0;
        for (const BoundingBox& b : gt.boxes) {
            x0 = std::min(x0, b.x_min);
            y0 = std::min(y0, b.y_min);
            x1 = std::max(x1, b.x_max);
            y1 = std::max(y1, b.y_max);
        }
        if (x1 - x0 > crop_side || y1 - y0 > crop_side)
            throw std::runtime_error("enlarge: objects exceed the crop window");
        int wx = static_cast<int>(std::lround(0.5 * (x0 + x1) - 0.5 * crop_side));
        int wy = static_cast<int>(std::lround(0.5 * (y0 + y1) - 0.5 * crop_side));
        wx = std::clamp(wx, 0, cfg.canvas_w - crop_side);
        wy = std::clamp(wy, 0, cfg.canvas_h - crop_side);
        rec.enlarge_x0 = wx;
        rec.enlarge_y0 = wy;
        rec.enlarge_side = crop_side;
    }
    return out;
}

} // namespace dsa::scenegen
