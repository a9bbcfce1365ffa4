#pragma once

#include <cstdint>
#include <map>
#include <utility>
#include <vector>

#include "dsa/decoder.hpp"
#include "dsa/geometry.hpp"
#include "dsa/image.hpp"
#include "dsa/rng.hpp"

namespace dsa::recon {

struct ReconConfig {
    int n_iter = 300;
    double sigma = 0.1;
    double t0 = 0.15;              // support threshold on RGB norm
    double lr_latent = 0.01;
    bool use_mean_for_final = true;
    bool enable_rotation = false;
    std::uint64_t seed = 0;
    bool parallel = false;
};

struct LatentPosterior {
    std::vector<double> mu;
    std::vector<double> log_tau;
    double t_x = 0.0;
    double t_y = 0.0;
    double alpha = 0.0;            // degrees; optimized only when rotation is on
};

struct TraceRow {
    int step = 0;
    double kl = 0.0;
    double recon = 0.0;            // data term, (1/2 sigma^2) * visible SSE
    double total = 0.0;
};

/// Amodal reconstruction of one detection on its L x L frame.
struct SingleRecon {
    Image recon;                   // L x L
    LatentPosterior posterior;
    BoundingBox bb_star;           // L x L box centered on the detection box
    Mask support;
    double final_loss = 0.0;       // loss at the final latent state
    double kl = 0.0;               // KL at the final posterior
    bool unconstrained = false;    // true when the visible set was empty
    int L = 0;
    std::vector<TraceRow> trace;
};

struct IndexedDetection {
    Detection det;
    int index = 0;
};

using ModelSet = std::map<int, decoder::DecoderModel>;

/// Reconstructions keyed by (detection index, label). The label component
/// only varies under class competition, where one detection is probed under
/// two classes; otherwise the key degenerates to the detection index.
class ReconCache {
  public:
    const SingleRecon* find(int index, int cls) const {
        auto it = entries_.find({index, cls});
        return it == entries_.end() ? nullptr : &it->second;
    }
    const SingleRecon& put(int index, int cls, SingleRecon value) {
        return entries_.insert_or_assign({index, cls}, std::move(value)).first->second;
    }
    void erase(int index, int cls) { entries_.erase({index, cls}); }
    void clear() { entries_.clear(); }
    std::size_t size() const { return entries_.size(); }

    /// True when no detection index appears under two labels (competition
    /// trials drop the losing label's entry to keep this).
    bool one_entry_per_index() const {
        int last = entries_.empty() ? 0 : entries_.begin()->first.first - 1;
        for (const auto& [key, value] : entries_) {
            if (key.first == last) return false;
            last = key.first;
        }
        return true;
    }

    /// Total single reconstructions ever computed into this cache.
    std::size_t computed = 0;

  private:
    std::map<std::pair<int, int>, SingleRecon> entries_;
};

/// Decode z and resample the d x d output onto an L x L frame with scale
/// d/L, translation t and optional rotation (degrees) about the frame
/// center. Double precision end to end; with L == d, t == 0 and no rotation
/// the result is bit-equal to decoder_forward.
Image warp_decode(const decoder::DecoderModel& model, const std::vector<double>& z, double t_x,
                  double t_y, double alpha_deg, bool rotate, int L);

struct LatentGrads {
    std::vector<double> d_mu;
    std::vector<double> d_log_tau;
    double d_t_x = 0.0;
    double d_t_y = 0.0;
    double d_alpha = 0.0;          // per degree
};

/// One-step objective of the latent optimization at a fixed noise draw:
/// kl_diag_gaussian + (1/2 sigma^2) * sum over visible of the squared
/// residual between the centered crop of the warped decode and the target.
/// Double precision; analytic gradients returned when grads is non-null.
double latent_loss(const decoder::DecoderModel& model, const Image& target,
                   const PixelSet& visible, const LatentPosterior& state,
                   const std::vector<double>& eps, double sigma, bool rotate, int L,
                   LatentGrads* grads);

/// Variational fit of one detection against its visible pixels. target is
/// the crop of the scene image at crop_box (the detection box clipped to the
/// image); visible holds target-frame coordinates. An empty visible set
/// skips optimization and returns the prior mean decode, flagged
/// unconstrained.
SingleRecon single_reconstruction(const Image& target, const PixelSet& visible,
                                  const Detection& det, const decoder::DecoderModel& model,
                                  const ReconConfig& cfg, const RasterBox& crop_box, Rng& rng);

/// Occlusion-ordered compositing: processes detections by descending occ
/// (ties: higher score, then lower index), reconstructs each against the
/// pixels of its box still blank on the canvas (cached by index and label),
/// and paints every support pixel whose canvas target is blank. provenance,
/// if given, receives the painting detection index per pixel (-1 = black).
Image whole_reconstruction(const std::vector<IndexedDetection>& subset, ReconCache& cache,
                           const Image& image, const ModelSet& models, const ReconConfig& cfg,
                           std::vector<int>* provenance = nullptr);

} // namespace dsa::recon
