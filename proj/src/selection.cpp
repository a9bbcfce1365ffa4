#include "dsa/selection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "dsa/kernels.hpp"

namespace dsa::select {

double count_prior_log(int k, double lambda0) {
    if (lambda0 <= 0.0) throw std::invalid_argument("count_prior_log: lambda0 must be > 0");
    if (k < 0) throw std::invalid_argument("count_prior_log: k must be >= 0");
    return std::log1p(-std::exp(-lambda0)) - lambda0 * k;
}

double image_nll(const Image& image, const Image& canvas, double sigma) {
    if (image.height != canvas.height || image.width != canvas.width)
        throw std::invalid_argument("image_nll: shape mismatch");
    const double n = static_cast<double>(image.value_count());
    const double sse =
        kernels::reduce_sq_diff(image.data.data(), canvas.data.data(), image.value_count(), false);
    return 0.5 * n * std::log(2.0 * 3.14159265358979323846 * sigma * sigma) +
           0.5 * sse / (sigma * sigma);
}

namespace {

recon::ReconConfig recon_config(const DsaConfig& cfg) {
    recon::ReconConfig rc = cfg.recon;
    rc.sigma = cfg.sigma;
    return rc;
}

InterpretationLoss subset_loss(const Image& image,
                               const std::vector<recon::IndexedDetection>& subset,
                               recon::ReconCache& cache, const recon::ModelSet& models,
                               const DsaConfig& cfg, const recon::ReconConfig& rc) {
    const Image canvas = recon::whole_reconstruction(subset, cache, image, models, rc);
    InterpretationLoss il;
    il.recon_term = kernels::reduce_sq_diff(image.data.data(), canvas.data.data(),
                                            image.value_count(), rc.parallel);
    il.count_term = cfg.lambda * static_cast<double>(subset.size());
    double kl_sum = 0.0;
    for (const auto& d : subset) {
        const recon::SingleRecon* sr = cache.find(d.index, d.det.cls);
        if (!sr) throw std::logic_error("interpretation_loss: reconstruction missing from cache");
        double sq = 0.0, var = 0.0, lt = 0.0;
        for (std::size_t i = 0; i < sr->posterior.mu.size(); ++i) {
            sq += sr->posterior.mu[i] * sr->posterior.mu[i];
            const double tau = std::exp(sr->posterior.log_tau[i]);
            var += tau * tau;
            lt += sr->posterior.log_tau[i];
        }
        kl_sum += sq + var - 2.0 * lt;
    }
    il.kl_term = cfg.sigma * cfg.sigma * kl_sum;
    il.total = il.recon_term + il.count_term + il.kl_term;
    return il;
}

/// Competition target for a label, or 0 when none applies.
int competition_target(int cls, const DsaConfig& cfg) {
    for (const auto& pair : cfg.competition_pairs)
        if (pair.first == cls) return pair.second;
    return 0;
}

} // namespace

InterpretationLoss interpretation_loss(const Image& image,
                                       const std::vector<recon::IndexedDetection>& subset,
                                       recon::ReconCache& cache, const recon::ModelSet& models,
                                       const DsaConfig& cfg) {
    const recon::ReconConfig rc = recon_config(cfg);
    if (cfg.cache_mode == DsaConfig::CacheMode::invalidate) {
        recon::ReconCache fresh;
        return subset_loss(image, subset, fresh, models, cfg, rc);
    }
    return subset_loss(image, subset, cache, models, cfg, rc);
}

Interpretation greedy_select(const Image& image, const std::vector<Detection>& dets,
                             const recon::ModelSet& models, const DsaConfig& cfg) {
    std::vector<Detection> work;
    for (const auto& d : dets)
        if (d.score >= cfg.min_objectness) work.push_back(d);
    std::stable_sort(work.begin(), work.end(),
                     [](const Detection& a, const Detection& b) { return a.score > b.score; });

    Interpretation out;
    if (work.empty()) {
        out.loss = interpretation_loss(image, {}, out.cache, models, cfg);
        return out;
    }

    const double nan = std::numeric_limits<double>::quiet_NaN();
    std::vector<recon::IndexedDetection> sel;
    double l_prev = std::numeric_limits<double>::infinity();
    InterpretationLoss cur;

    for (int i = 0; i < static_cast<int>(work.size()); ++i) {
        recon::IndexedDetection cand{work[i], i};

        auto trial = sel;
        trial.push_back(cand);
        InterpretationLoss add_loss = interpretation_loss(image, trial, out.cache, models, cfg);
        const int alt = competition_target(cand.det.cls, cfg);
        if (alt != 0) {
            if (models.find(alt) == models.end())
                throw std::runtime_error("class competition: no decoder for class " +
                                         std::to_string(alt));
            recon::IndexedDetection cand2 = cand;
            cand2.det.cls = alt;
            trial.back() = cand2;
            const InterpretationLoss alt_loss =
                interpretation_loss(image, trial, out.cache, models, cfg);
            if (alt_loss.total < add_loss.total) {
                cand = cand2;
                add_loss = alt_loss;
                out.cache.erase(cand.index, work[i].cls);
            } else {
                out.cache.erase(cand.index, alt);
            }
        }

        int victim_pos = -1;
        double best_iou = 0.0;
        for (int j = 0; j < static_cast<int>(sel.size()); ++j) {
            const double v = iou(sel[j].det.box, cand.det.box);
            if (v <= 0.0) continue;
            if (victim_pos < 0 || v > best_iou ||
                (v == best_iou && sel[j].index < sel[victim_pos].index)) {
                best_iou = v;
                victim_pos = j;
            }
        }
        InterpretationLoss swap_loss;
        double l_swap = nan;
        if (victim_pos >= 0) {
            auto strial = sel;
            strial.erase(strial.begin() + victim_pos);
            strial.push_back(cand);
            swap_loss = interpretation_loss(image, strial, out.cache, models, cfg);
            l_swap = swap_loss.total;
        }

        GreedyStep row;
        row.step = i + 1;
        row.cand_index = i;
        row.label = cand.det.cls;
        row.l_prev = l_prev;
        row.l_add = add_loss.total;
        row.l_swap = l_swap;
        row.action = "keep";
        double best = l_prev;
        if (add_loss.total < best) {
            best = add_loss.total;
            row.action = "add";
        }
        if (victim_pos >= 0 && l_swap < best) {
            best = l_swap;
            row.action = "swap";
        }
        if (!(best <= l_prev))
            throw std::logic_error("greedy_select: loss increased");

        if (row.action == "add") {
            sel.push_back(cand);
            cur = add_loss;
        } else if (row.action == "swap") {
            row.swap_victim = sel[victim_pos].index;
            sel.erase(sel.begin() + victim_pos);
            sel.push_back(cand);
            cur = swap_loss;
        }
        l_prev = best;
        out.log.push_back(std::move(row));
    }

    out.selected = std::move(sel);
    out.loss = cur;
    return out;
}

} // namespace dsa::select
