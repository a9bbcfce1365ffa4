#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dsa/geometry.hpp"
#include "dsa/scenegen.hpp"

namespace dsa::detsim {

/// Deterministic label confusion applied after the uniform flip.
struct ConfusionPair {
    int from = 0;
    int to = 0;
    double prob = 0.0;
};

struct NoiseConfig {
    double box_jitter_sd = 1.0;
    double score_floor = 0.7;
    double score_ceiling = 0.98;
    double occ_noise_sd = 0.05;
    double label_flip_prob = 0.0;
    std::vector<ConfusionPair> confusion;
    double dup_rate = 0.5;          // expected duplicates per true object
    double fp_rate = 0.5;           // expected false positives per scene
    double fp_score_lo = 0.1;
    double fp_score_hi = 0.6;
    std::uint64_t seed = 0;
};

/// Named noise profiles: "baseline", "score_shift", "label_shift".
NoiseConfig shift_profile(const std::string& name);

/// Simulates a detector on rendered ground truth: one jittered detection per
/// object plus duplicates and false positives, sorted by descending score.
/// With all noise terms zeroed (jitter, occ noise, dup and fp rates at zero,
/// score_floor == score_ceiling) the output is an exact lift of the ground
/// truth boxes and labels.
std::vector<Detection> simulate_detections(const scenegen::GroundTruth& gt,
                                           const NoiseConfig& cfg);

} // namespace dsa::detsim
