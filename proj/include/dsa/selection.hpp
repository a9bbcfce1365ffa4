#pragma once

#include <string>
#include <utility>
#include <vector>

#include "dsa/geometry.hpp"
#include "dsa/image.hpp"
#include "dsa/recon.hpp"

namespace dsa::select {

struct DsaConfig {
    double lambda = 15.0;          // per-box penalty
    double sigma = 0.1;
    double min_objectness = 0.25;  // candidates below this score are dropped
    std::vector<std::pair<int, int>> competition_pairs; // (source, target) labels
    enum class CacheMode { paper, invalidate };
    CacheMode cache_mode = CacheMode::paper;
    recon::ReconConfig recon;      // sigma here is overridden by the field above
};

/// total = recon_term + count_term + kl_term, computed as that exact sum.
struct InterpretationLoss {
    double total = 0.0;
    double recon_term = 0.0;       // squared residual between image and canvas
    double count_term = 0.0;       // lambda * |subset|
    double kl_term = 0.0;          // sigma^2 * sum_j (|mu|^2 + sum tau^2 - 2 sum log tau)
};

struct GreedyStep {
    int step = 0;                  // 1-based position in the candidate walk
    int cand_index = 0;
    int label = 0;                 // label the candidate was evaluated under
    double l_prev = 0.0;
    double l_add = 0.0;
    double l_swap = 0.0;           // NaN when no swap partner existed
    std::string action;            // "keep" | "add" | "swap"
    int swap_victim = -1;          // detection index removed on swap
};

struct Interpretation {
    std::vector<recon::IndexedDetection> selected; // selection order
    recon::ReconCache cache;
    InterpretationLoss loss;
    std::vector<GreedyStep> log;
};

/// Log of the normalized geometric count prior p(k) = (1 - e^-l0) e^(-l0 k).
double count_prior_log(int k, double lambda0);

/// Gaussian negative log-likelihood of the image given the composite canvas:
/// (|I|/2) log(2 pi sigma^2) + ||I - canvas||^2 / (2 sigma^2), black
/// background included via the canvas zeros.
double image_nll(const Image& image, const Image& canvas, double sigma);

/// The three-term selection loss of a fixed subset. Under CacheMode::paper
/// reconstructions come from (and are added to) the supplied cache; under
/// invalidate every call recomputes from scratch and leaves the cache alone.
InterpretationLoss interpretation_loss(const Image& image,
                                       const std::vector<recon::IndexedDetection>& subset,
                                       recon::ReconCache& cache, const recon::ModelSet& models,
                                       const DsaConfig& cfg);

/// Greedy selection with one-step-back search: walks candidates by
/// descending score; for each, takes the best of keep / add / swap-with-the-
/// max-IoU-partner, with ties resolved in that priority order. Detections
/// whose class is the source of a competition pair are evaluated under both
/// labels and enter with the cheaper one.
Interpretation greedy_select(const Image& image, const std::vector<Detection>& dets,
                             const recon::ModelSet& models, const DsaConfig& cfg);

} // namespace dsa::select
