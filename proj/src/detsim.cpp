#include "dsa/detsim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dsa/rng.hpp"

namespace dsa::detsim {

namespace {

double clamp01(double v) { return std::min(1.0, std::max(0.0, v)); }

/// Integer-valued box clipped to the canvas, at least one pixel on each axis.
BoundingBox round_clip(double x0, double y0, double x1, double y1, int w, int h) {
    if (x1 < x0) std::swap(x0, x1);
    if (y1 < y0) std::swap(y0, y1);
    long ix0 = std::lround(std::min(std::max(x0, 0.0), static_cast<double>(w)));
    long ix1 = std::lround(std::min(std::max(x1, 0.0), static_cast<double>(w)));
    long iy0 = std::lround(std::min(std::max(y0, 0.0), static_cast<double>(h)));
    long iy1 = std::lround(std::min(std::max(y1, 0.0), static_cast<double>(h)));
    if (ix1 <= ix0) {
        ix1 = ix0 + 1;
        if (ix1 > w) { ix1 = w; ix0 = w - 1; }
    }
    if (iy1 <= iy0) {
        iy1 = iy0 + 1;
        if (iy1 > h) { iy1 = h; iy0 = h - 1; }
    }
    return {static_cast<double>(ix0), static_cast<double>(iy0), static_cast<double>(ix1),
            static_cast<double>(iy1)};
}

BoundingBox jitter_box(const BoundingBox& b, double sd, Rng& rng, int w, int h) {
    const double x0 = b.x_min + rng.normal() * sd;
    const double y0 = b.y_min + rng.normal() * sd;
    const double x1 = b.x_max + rng.normal() * sd;
    const double y1 = b.y_max + rng.normal() * sd;
    return round_clip(x0, y0, x1, y1, w, h);
}

int flip_label(int cls, const NoiseConfig& cfg, Rng& rng) {
    if (cfg.label_flip_prob > 0.0 && rng.uniform() < cfg.label_flip_prob) {
        int other = rng.uniform_int(1, scenegen::num_classes() - 1);
        if (other >= cls) ++other;
        cls = other;
    }
    for (const auto& pair : cfg.confusion) {
        if (cls != pair.from) continue;
        if (pair.prob >= 1.0 || rng.uniform() < pair.prob) cls = pair.to;
        break;
    }
    return cls;
}

} // namespace

NoiseConfig shift_profile(const std::string& name) {
    NoiseConfig cfg;
    if (name == "baseline") return cfg;
    if (name == "score_shift") {
        cfg.score_floor = 0.3;
        cfg.score_ceiling = 0.95;
        return cfg;
    }
    if (name == "label_shift") {
        cfg.confusion.push_back({8, 9, 0.8});
        return cfg;
    }
    throw std::invalid_argument("unknown noise profile: " + name);
}

std::vector<Detection> simulate_detections(const scenegen::GroundTruth& gt,
                                           const NoiseConfig& cfg) {
    const int n = static_cast<int>(gt.objects.size());
    if (n == 0) return {};
    const int w = gt.visible_masks.front().width;
    const int h = gt.visible_masks.front().height;
    Rng rng(cfg.seed);

    std::vector<Detection> dets;
    dets.reserve(static_cast<std::size_t>(n) * 2 + 4);
    for (int i = 0; i < n; ++i) {
        Detection d;
        d.box = jitter_box(gt.boxes[i], cfg.box_jitter_sd, rng, w, h);
        d.score = rng.uniform(cfg.score_floor, cfg.score_ceiling);
        const double rank = static_cast<double>(gt.objects[i].depth_rank);
        d.occ = clamp01(1.0 - rank / n + rng.normal() * cfg.occ_noise_sd);
        d.cls = flip_label(gt.objects[i].cls, cfg, rng);
        dets.push_back(d);
    }

    const int n_dup = rng.poisson(cfg.dup_rate * n);
    for (int k = 0; k < n_dup; ++k) {
        const int parent = rng.uniform_int(0, n - 1);
        Detection d;
        d.box = jitter_box(gt.boxes[parent], cfg.box_jitter_sd * 1.5, rng, w, h);
        d.score = dets[parent].score * rng.uniform(0.8, 0.97);
        d.occ = clamp01(dets[parent].occ + rng.normal() * (cfg.occ_noise_sd + 0.05));
        d.cls = dets[parent].cls;
        dets.push_back(d);
    }

    const int n_fp = rng.poisson(cfg.fp_rate);
    for (int k = 0; k < n_fp; ++k) {
        Detection d;
        if (rng.uniform() < 0.5) {
            const double bw = rng.uniform(15.0, 60.0);
            const double bh = rng.uniform(15.0, 60.0);
            const double x0 = rng.uniform(0.0, w - bw);
            const double y0 = rng.uniform(0.0, h - bh);
            d.box = round_clip(x0, y0, x0 + bw, y0 + bh, w, h);
        } else {
            const auto& b = gt.boxes[rng.uniform_int(0, n - 1)];
            const double fw = rng.uniform(0.4, 0.7) * b.width();
            const double fh = rng.uniform(0.4, 0.7) * b.height();
            const double x0 = b.x_min + rng.uniform(0.0, b.width() - fw);
            const double y0 = b.y_min + rng.uniform(0.0, b.height() - fh);
            d.box = round_clip(x0, y0, x0 + fw, y0 + fh, w, h);
        }
        d.score = rng.uniform(cfg.fp_score_lo, cfg.fp_score_hi);
        d.occ = rng.uniform(0.0, 1.0);
        d.cls = rng.uniform_int(1, scenegen::num_classes());
        dets.push_back(d);
    }

    std::stable_sort(dets.begin(), dets.end(),
                     [](const Detection& a, const Detection& b) { return a.score > b.score; });
    return dets;
}

} // namespace dsa::detsim
