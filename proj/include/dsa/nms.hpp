#pragma once

#include <vector>

#include "dsa/geometry.hpp"

namespace dsa::nms {

enum class SoftMode { linear, gaussian };

struct NmsConfig {
    double threshold = 0.5;      // overlap threshold for hard variants
    bool class_aware = false;    // suppress within the same class only
    SoftMode soft_mode = SoftMode::linear;
    double soft_sigma = 0.5;     // gaussian decay width
};

/// Greedy suppression: walk detections by descending score, drop any later
/// detection whose IoU with a kept one exceeds the threshold.
std::vector<Detection> nms(const std::vector<Detection>& dets, const NmsConfig& cfg);

/// Score-decay suppression: repeatedly select the highest-scoring remaining
/// detection and rescale the others by (1 - iou) or exp(-iou^2 / sigma).
/// Output carries decayed scores in selection order; no detection is removed.
std::vector<Detection> soft_nms(const std::vector<Detection>& dets, const NmsConfig& cfg);

/// Hard suppression on distance-penalized IoU (IoU minus the squared center
/// distance over the squared enclosing-box diagonal).
std::vector<Detection> diou_nms(const std::vector<Detection>& dets, const NmsConfig& cfg);

/// Detections with score strictly above t, order preserved.
std::vector<Detection> threshold_select(const std::vector<Detection>& dets, double t);

} // namespace dsa::nms
