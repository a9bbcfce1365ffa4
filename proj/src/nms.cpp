#include "dsa/nms.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace dsa::nms {

namespace {

std::vector<int> score_order(const std::vector<Detection>& dets) {
    std::vector<int> order(dets.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return dets[a].score > dets[b].score; });
    return order;
}

std::vector<Detection> hard_suppress(const std::vector<Detection>& dets, const NmsConfig& cfg,
                                     double (*overlap)(const BoundingBox&, const BoundingBox&)) {
    const auto order = score_order(dets);
    std::vector<char> dropped(dets.size(), 0);
    std::vector<Detection> kept;
    for (std::size_t i = 0; i < order.size(); ++i) {
        const int a = order[i];
        if (dropped[a]) continue;
        kept.push_back(dets[a]);
        for (std::size_t j = i + 1; j < order.size(); ++j) {
            const int b = order[j];
            if (dropped[b]) continue;
            if (cfg.class_aware && dets[a].cls != dets[b].cls) continue;
            if (overlap(dets[a].box, dets[b].box) > cfg.threshold) dropped[b] = 1;
        }
    }
    return kept;
}

} // namespace

std::vector<Detection> nms(const std::vector<Detection>& dets, const NmsConfig& cfg) {
    return hard_suppress(dets, cfg, &iou);
}

std::vector<Detection> diou_nms(const std::vector<Detection>& dets, const NmsConfig& cfg) {
    return hard_suppress(dets, cfg, &diou);
}

std::vector<Detection> soft_nms(const std::vector<Detection>& dets, const NmsConfig& cfg) {
    std::vector<Detection> pool = dets;
    std::vector<char> taken(pool.size(), 0);
    std::vector<Detection> out;
    out.reserve(pool.size());
    for (std::size_t round = 0; round < pool.size(); ++round) {
        int best = -1;
        for (std::size_t i = 0; i < pool.size(); ++i) {
            if (taken[i]) continue;
            if (best < 0 || pool[i].score > pool[best].score) best = static_cast<int>(i);
        }
        taken[best] = 1;
        out.push_back(pool[best]);
        for (std::size_t i = 0; i < pool.size(); ++i) {
            if (taken[i]) continue;
            if (cfg.class_aware && pool[i].cls != pool[best].cls) continue;
            const double v = iou(pool[best].box, pool[i].box);
            const double factor = cfg.soft_mode == SoftMode::linear
                                      ? 1.0 - v
                                      : std::exp(-(v * v) / cfg.soft_sigma);
            pool[i].score *= factor;
        }
    }
    return out;
}

std::vector<Detection> threshold_select(const std::vector<Detection>& dets, double t) {
    std::vector<Detection> out;
    for (const auto& d : dets)
        if (d.score > t) out.push_back(d);
    return out;
}

} // namespace dsa::nms
