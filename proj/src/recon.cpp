#include "dsa/recon.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <type_traits>

#include "dsa/kernels.hpp"
#include "dsa/optim.hpp"

namespace dsa::recon {

namespace {

constexpr double kPi = 3.14159265358979323846;

/// Model weights as T arrays: direct pointers for float (the storage type),
/// an upcast copy for double.
template <typename T>
struct WeightView {
    const T* w1 = nullptr;
    const T* b1 = nullptr;
    const T* w2 = nullptr;
    const T* b2 = nullptr;
    const T* w1t = nullptr;
    const T* w2t = nullptr;
    std::vector<T> storage;
};

template <typename T>
WeightView<T> make_weight_view(const decoder::DecoderModel& m) {
    WeightView<T> v;
    if constexpr (std::is_same_v<T, float>) {
        v.w1 = m.w1.data();
        v.b1 = m.b1.data();
        v.w2 = m.w2.data();
        v.b2 = m.b2.data();
        v.w1t = m.w1t.data();
        v.w2t = m.w2t.data();
    } else {
        const std::vector<float>* parts[6] = {&m.w1, &m.b1, &m.w2, &m.b2, &m.w1t, &m.w2t};
        std::size_t total = 0;
        for (const auto* p : parts) total += p->size();
        v.storage.reserve(total);
        const T* ptrs[6];
        for (int i = 0; i < 6; ++i) {
            const std::size_t off = v.storage.size();
            v.storage.insert(v.storage.end(), parts[i]->begin(), parts[i]->end());
            ptrs[i] = v.storage.data() + off;
        }
        v.w1 = ptrs[0];
        v.b1 = ptrs[1];
        v.w2 = ptrs[2];
        v.b2 = ptrs[3];
        v.w1t = ptrs[4];
        v.w2t = ptrs[5];
    }
    return v;
}

template <typename T>
double kl_of(const T* mu, const T* log_tau, int n_z) {
    double sq = 0.0, var = 0.0, lt = 0.0;
    for (int i = 0; i < n_z; ++i) {
        sq += static_cast<double>(mu[i]) * mu[i];
        const double tau = std::exp(static_cast<double>(log_tau[i]));
        var += tau * tau;
        lt += log_tau[i];
    }
    return 0.5 * (sq + var - n_z) - lt;
}

/// Decode-warp-compare pipeline for one detection at precision T.
template <typename T>
struct Engine {
    const decoder::DecoderModel& m;
    WeightView<T> w;
    int L;
    int n_z;
    int d;
    int out;
    double sigma;
    bool parallel;
    kernels::WarpPose pose;
    std::vector<T> z, h_pre, h, dec, R, g, d_dec, d_opre, d_h, d_z;

    Engine(const decoder::DecoderModel& model, int L_, bool rotate, double sigma_, bool par)
        : m(model), w(make_weight_view<T>(model)), L(L_), n_z(model.n_z), d(model.d),
          out(model.out_dim()), sigma(sigma_), parallel(par) {
        pose.s_x = pose.s_y = static_cast<double>(d) / L;
        pose.rotate = rotate;
        z.resize(n_z);
        h_pre.resize(m.hidden);
        h.resize(m.hidden);
        dec.resize(out);
        R.resize(static_cast<std::size_t>(L) * L * 3);
        g.resize(R.size());
        d_dec.resize(out);
        d_opre.resize(out);
        d_h.resize(m.hidden);
        d_z.resize(n_z);
    }

    void decode() {
        kernels::linear_forward(w.w1, w.b1, z.data(), h_pre.data(), 1, m.hidden, n_z, parallel);
        for (int i = 0; i < m.hidden; ++i) h[i] = h_pre[i] > T(0) ? h_pre[i] : T(0);
        kernels::linear_forward(w.w2, w.b2, h.data(), dec.data(), 1, out, m.hidden, parallel);
        for (int i = 0; i < out; ++i) dec[i] = T(1) / (T(1) + std::exp(-dec[i]));
    }

    void warp(double t_x, double t_y, double alpha_deg) {
        pose.t_x = t_x;
        pose.t_y = t_y;
        pose.alpha_deg = alpha_deg;
        kernels::warp_forward(dec.data(), d, pose, R.data(), L, parallel);
    }

    /// Visible-set SSE against the target; fills g with d(data term)/dR.
    double residual(const Image& target, const PixelSet& visible, int off_x, int off_y) {
        std::fill(g.begin(), g.end(), T(0));
        const double inv_var = 1.0 / (sigma * sigma);
        double sse = 0.0;
        for (const auto& p : visible) {
            const std::size_t ri =
                (static_cast<std::size_t>(p.y + off_y) * L + (p.x + off_x)) * 3;
            for (int c = 0; c < 3; ++c) {
                const double r = static_cast<double>(R[ri + c]) - target.at(p.x, p.y, c);
                sse += r * r;
                g[ri + c] = static_cast<T>(r * inv_var);
            }
        }
        return sse;
    }

    /// Backprop g through warp and decoder into d_z and pose gradients
    /// (alpha gradient per degree).
    void backward(double* dt_x, double* dt_y, double* dalpha_deg) {
        std::fill(d_dec.begin(), d_dec.end(), T(0));
        kernels::warp_backward(dec.data(), d, pose, g.data(), L, d_dec.data(), dt_x, dt_y,
                               dalpha_deg, parallel);
        for (int i = 0; i < out; ++i) {
            const T s = dec[i];
            d_opre[i] = d_dec[i] * s * (T(1) - s);
        }
        kernels::linear_backward_data(w.w2t, d_opre.data(), d_h.data(), 1, out, m.hidden,
                                      parallel);
        for (int i = 0; i < m.hidden; ++i)
            if (h_pre[i] <= T(0)) d_h[i] = T(0);
        kernels::linear_backward_data(w.w1t, d_h.data(), d_z.data(), 1, m.hidden, n_z, parallel);
    }
};

} // namespace

Image warp_decode(const decoder::DecoderModel& model, const std::vector<double>& z, double t_x,
                  double t_y, double alpha_deg, bool rotate, int L) {
    if (static_cast<int>(z.size()) != model.n_z)
        throw std::invalid_argument("warp_decode: latent size mismatch");
    Engine<double> e(model, L, rotate, 1.0, false);
    std::copy(z.begin(), z.end(), e.z.begin());
    e.decode();
    e.warp(t_x, t_y, alpha_deg);
    Image out(L, L);
    std::copy(e.R.begin(), e.R.end(), out.data.begin());
    return out;
}

double latent_loss(const decoder::DecoderModel& model, const Image& target,
                   const PixelSet& visible, const LatentPosterior& state,
                   const std::vector<double>& eps, double sigma, bool rotate, int L,
                   LatentGrads* grads) {
    const int n_z = model.n_z;
    if (static_cast<int>(state.mu.size()) != n_z ||
        static_cast<int>(state.log_tau.size()) != n_z ||
        static_cast<int>(eps.size()) != n_z)
        throw std::invalid_argument("latent_loss: latent size mismatch");
    if (target.width > L || target.height > L)
        throw std::invalid_argument("latent_loss: target exceeds the L x L frame");
    const int off_x = (L - target.width) / 2;
    const int off_y = (L - target.height) / 2;
    Engine<double> e(model, L, rotate, sigma, false);
    for (int i = 0; i < n_z; ++i) e.z[i] = state.mu[i] + std::exp(state.log_tau[i]) * eps[i];
    e.decode();
    e.warp(state.t_x, state.t_y, state.alpha);
    const double sse = e.residual(target, visible, off_x, off_y);
    const double kl = decoder::kl_diag_gaussian(state.mu, state.log_tau);
    const double total = kl + 0.5 * sse / (sigma * sigma);
    if (grads) {
        double dtx = 0.0, dty = 0.0, dad = 0.0;
        e.backward(&dtx, &dty, &dad);
        grads->d_mu.resize(n_z);
        grads->d_log_tau.resize(n_z);
        for (int i = 0; i < n_z; ++i) {
            const double tau = std::exp(state.log_tau[i]);
            grads->d_mu[i] = e.d_z[i] + state.mu[i];
            grads->d_log_tau[i] = e.d_z[i] * eps[i] * tau + (tau * tau - 1.0);
        }
        grads->d_t_x = dtx;
        grads->d_t_y = dty;
        grads->d_alpha = rotate ? dad : 0.0;
    }
    return total;
}

SingleRecon single_reconstruction(const Image& target, const PixelSet& visible,
                                  const Detection& det, const decoder::DecoderModel& model,
                                  const ReconConfig& cfg, const RasterBox& crop_box, Rng& rng) {
    using T = float;
    (void)det;
    if (crop_box.width() != target.width || crop_box.height() != target.height)
        throw std::invalid_argument("single_reconstruction: crop_box does not match target");
    const int n_z = model.n_z;
    const int L = std::max(target.width, target.height);
    const int off_x = (L - target.width) / 2;
    const int off_y = (L - target.height) / 2;

    SingleRecon sr;
    sr.L = L;
    const double ul_x = crop_box.x0 - off_x;
    const double ul_y = crop_box.y0 - off_y;
    sr.bb_star = {ul_x, ul_y, ul_x + L, ul_y + L};

    Engine<T> e(model, L, cfg.enable_rotation, cfg.sigma, cfg.parallel);
    const int n_par = 2 * n_z + 2 + (cfg.enable_rotation ? 1 : 0);
    // Parameter block [mu | log_tau | t_x t_y | alpha_rad]; radians keep the
    // rotation on the same step scale as the unit-magnitude parameters.
    std::vector<T> par(n_par, T(0)), grad(n_par, T(0)), eps(n_z, T(0));
    Adam<T> opt(static_cast<std::size_t>(n_par), cfg.lr_latent);

    const auto alpha_deg = [&]() {
        return cfg.enable_rotation ? static_cast<double>(par[2 * n_z + 2]) * 180.0 / kPi : 0.0;
    };

    if (visible.empty()) {
        sr.unconstrained = true;
    } else {
        sr.trace.reserve(static_cast<std::size_t>(cfg.n_iter));
        for (int it = 0; it < cfg.n_iter; ++it) {
            for (int i = 0; i < n_z; ++i) {
                eps[i] = static_cast<T>(rng.normal());
                e.z[i] = par[i] + std::exp(par[n_z + i]) * eps[i];
            }
            e.decode();
            e.warp(par[2 * n_z], par[2 * n_z + 1], alpha_deg());
            const double sse = e.residual(target, visible, off_x, off_y);
            const double kl = kl_of(par.data(), par.data() + n_z, n_z);
            const double data = 0.5 * sse / (cfg.sigma * cfg.sigma);
            sr.trace.push_back({it, kl, data, kl + data});
            double dtx = 0.0, dty = 0.0, dad = 0.0;
            e.backward(&dtx, &dty, &dad);
            for (int i = 0; i < n_z; ++i) {
                const T tau = std::exp(par[n_z + i]);
                grad[i] = e.d_z[i] + par[i];
                grad[n_z + i] = e.d_z[i] * eps[i] * tau + (tau * tau - T(1));
            }
            grad[2 * n_z] = static_cast<T>(dtx);
            grad[2 * n_z + 1] = static_cast<T>(dty);
            if (cfg.enable_rotation) grad[2 * n_z + 2] = static_cast<T>(dad * 180.0 / kPi);
            opt.step(par.data(), grad.data(), n_par);
        }
    }

    for (int i = 0; i < n_z; ++i) {
        e.z[i] = par[i];
        if (!cfg.use_mean_for_final)
            e.z[i] += std::exp(par[n_z + i]) * static_cast<T>(rng.normal());
    }
    e.decode();
    e.warp(par[2 * n_z], par[2 * n_z + 1], alpha_deg());
    sr.recon = Image(L, L);
    for (std::size_t i = 0; i < e.R.size(); ++i) sr.recon.data[i] = e.R[i];
    sr.support = support_mask(sr.recon, cfg.t0);

    sr.posterior.mu.assign(par.begin(), par.begin() + n_z);
    sr.posterior.log_tau.assign(par.begin() + n_z, par.begin() + 2 * n_z);
    sr.posterior.t_x = par[2 * n_z];
    sr.posterior.t_y = par[2 * n_z + 1];
    sr.posterior.alpha = alpha_deg();
    sr.kl = decoder::kl_diag_gaussian(sr.posterior.mu, sr.posterior.log_tau);

    double sse = 0.0;
    for (const auto& p : visible) {
        for (int c = 0; c < 3; ++c) {
            const double r = sr.recon.at(p.x + off_x, p.y + off_y, c) - target.at(p.x, p.y, c);
            sse += r * r;
        }
    }
    sr.final_loss = sr.kl + 0.5 * sse / (cfg.sigma * cfg.sigma);
    return sr;
}

Image whole_reconstruction(const std::vector<IndexedDetection>& subset, ReconCache& cache,
                           const Image& image, const ModelSet& models, const ReconConfig& cfg,
                           std::vector<int>* provenance) {
    std::vector<const IndexedDetection*> order;
    order.reserve(subset.size());
    for (const auto& d : subset) order.push_back(&d);
    std::stable_sort(order.begin(), order.end(),
                     [](const IndexedDetection* a, const IndexedDetection* b) {
                         if (a->det.occ != b->det.occ) return a->det.occ > b->det.occ;
                         if (a->det.score != b->det.score) return a->det.score > b->det.score;
                         return a->index < b->index;
                     });

    Image canvas(image.height, image.width);
    if (provenance)
        provenance->assign(static_cast<std::size_t>(image.height) * image.width, -1);

    for (const auto* idet : order) {
        const Detection& det = idet->det;
        const SingleRecon* sr = cache.find(idet->index, det.cls);
        if (!sr) {
            const auto mit = models.find(det.cls);
            if (mit == models.end())
                throw std::runtime_error("whole_reconstruction: no decoder for class " +
                                         std::to_string(det.cls));
            const RasterBox cb = raster_box(det.box, image.width, image.height);
            const Image target = crop(image, det.box);
            PixelSet vis;
            for (int y = 0; y < target.height; ++y)
                for (int x = 0; x < target.width; ++x)
                    if (canvas.is_black(cb.x0 + x, cb.y0 + y)) vis.push_back({x, y});
            Rng rng = sub_rng(cfg.seed, Stream::recon_latent,
                              static_cast<std::uint64_t>(idet->index));
            sr = &cache.put(idet->index, det.cls,
                            single_reconstruction(target, vis, det, mit->second, cfg, cb, rng));
            ++cache.computed;
        }
        const int ul_x = static_cast<int>(sr->bb_star.x_min);
        const int ul_y = static_cast<int>(sr->bb_star.y_min);
        for (int py = 0; py < sr->L; ++py) {
            const int cy = ul_y + py;
            if (cy < 0 || cy >= canvas.height) continue;
            for (int px = 0; px < sr->L; ++px) {
                const int cx = ul_x + px;
                if (cx < 0 || cx >= canvas.width) continue;
                if (!sr->support.at(px, py) || !canvas.is_black(cx, cy)) continue;
                for (int c = 0; c < 3; ++c) canvas.at(cx, cy, c) = sr->recon.at(px, py, c);
                if (provenance)
                    (*provenance)[static_cast<std::size_t>(cy) * canvas.width + cx] =
                        idet->index;
            }
        }
    }
    return canvas;
}

} // namespace dsa::recon
