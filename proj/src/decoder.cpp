#include "dsa/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "dsa/kernels.hpp"
#include "dsa/optim.hpp"
#include "dsa/rng.hpp"

namespace dsa::decoder {

namespace {

std::vector<double> upcast(const std::vector<float>& v) {
    return std::vector<double>(v.begin(), v.end());
}

void transpose_into(const std::vector<float>& src, std::vector<float>& dst, int rows, int cols) {
    dst.resize(src.size());
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
            dst[static_cast<std::size_t>(c) * rows + r] = src[static_cast<std::size_t>(r) * cols + c];
}

} // namespace

void DecoderModel::rebuild_transposes() {
    transpose_into(w1, w1t, hidden, n_z);
    transpose_into(w2, w2t, out_dim(), hidden);
}

DecoderModel init_decoder(int cls, std::uint64_t seed, int n_z, int d, int hidden) {
    DecoderModel m;
    m.cls = cls;
    m.n_z = n_z;
    m.d = d;
    m.hidden = hidden;
    Rng rng(seed);
    const int out = m.out_dim();
    m.w1.resize(static_cast<std::size_t>(hidden) * n_z);
    m.b1.assign(hidden, 0.0f);
    m.w2.resize(static_cast<std::size_t>(out) * hidden);
    m.b2.assign(out, 0.0f);
    const double s1 = 1.0 / std::sqrt(static_cast<double>(n_z));
    for (auto& w : m.w1) w = static_cast<float>(rng.uniform(-s1, s1));
    const double s2 = 1.0 / std::sqrt(static_cast<double>(hidden));
    for (auto& w : m.w2) w = static_cast<float>(rng.uniform(-s2, s2));
    m.rebuild_transposes();
    return m;
}

std::vector<double> decoder_forward(const DecoderModel& m, const std::vector<double>& z) {
    if (static_cast<int>(z.size()) != m.n_z)
        throw std::invalid_argument("decoder_forward: latent size mismatch");
    const int out = m.out_dim();
    const auto w1 = upcast(m.w1);
    const auto b1 = upcast(m.b1);
    const auto w2 = upcast(m.w2);
    const auto b2 = upcast(m.b2);
    std::vector<double> h(m.hidden), o(out);
    kernels::linear_forward(w1.data(), b1.data(), z.data(), h.data(), 1, m.hidden, m.n_z, false);
    for (auto& v : h) v = std::max(0.0, v);
    kernels::linear_forward(w2.data(), b2.data(), h.data(), o.data(), 1, out, m.hidden, false);
    for (auto& v : o) v = 1.0 / (1.0 + std::exp(-v));
    return o;
}

std::vector<double> decoder_gradients(const DecoderModel& m, const std::vector<double>& z,
                                      const std::vector<double>& upstream) {
    if (static_cast<int>(z.size()) != m.n_z)
        throw std::invalid_argument("decoder_gradients: latent size mismatch");
    const int out = m.out_dim();
    if (static_cast<int>(upstream.size()) != out)
        throw std::invalid_argument("decoder_gradients: upstream size mismatch");
    const auto w1 = upcast(m.w1);
    const auto b1 = upcast(m.b1);
    const auto w2 = upcast(m.w2);
    const auto b2 = upcast(m.b2);
    const auto w1t = upcast(m.w1t);
    const auto w2t = upcast(m.w2t);
    std::vector<double> h_pre(m.hidden), h(m.hidden), o(out);
    kernels::linear_forward(w1.data(), b1.data(), z.data(), h_pre.data(), 1, m.hidden, m.n_z, false);
    for (int i = 0; i < m.hidden; ++i) h[i] = std::max(0.0, h_pre[i]);
    kernels::linear_forward(w2.data(), b2.data(), h.data(), o.data(), 1, out, m.hidden, false);
    std::vector<double> d_opre(out);
    for (int i = 0; i < out; ++i) {
        const double s = 1.0 / (1.0 + std::exp(-o[i]));
        d_opre[i] = upstream[i] * s * (1.0 - s);
    }
    std::vector<double> d_h(m.hidden), d_z(m.n_z);
    kernels::linear_backward_data(w2t.data(), d_opre.data(), d_h.data(), 1, out, m.hidden, false);
    for (int i = 0; i < m.hidden; ++i)
        if (h_pre[i] <= 0.0) d_h[i] = 0.0;
    kernels::linear_backward_data(w1t.data(), d_h.data(), d_z.data(), 1, m.hidden, m.n_z, false);
    return d_z;
}

double kl_diag_gaussian(const std::vector<double>& mu, const std::vector<double>& log_tau) {
    if (mu.size() != log_tau.size())
        throw std::invalid_argument("kl_diag_gaussian: size mismatch");
    double sq = 0.0, var = 0.0, lt = 0.0;
    for (std::size_t i = 0; i < mu.size(); ++i) {
        sq += mu[i] * mu[i];
        const double tau = std::exp(log_tau[i]);
        var += tau * tau;
        lt += log_tau[i];
    }
    return 0.5 * (sq + var - static_cast<double>(mu.size())) - lt;
}

namespace {

struct BatchBuffers {
    std::vector<float> z, eps, h_pre, h, o, d_opre, d_h, d_z;
    void resize(int n, int n_z, int hidden, int out) {
        z.resize(static_cast<std::size_t>(n) * n_z);
        eps.resize(static_cast<std::size_t>(n) * n_z);
        h_pre.resize(static_cast<std::size_t>(n) * hidden);
        h.resize(static_cast<std::size_t>(n) * hidden);
        o.resize(static_cast<std::size_t>(n) * out);
        d_opre.resize(static_cast<std::size_t>(n) * out);
        d_h.resize(static_cast<std::size_t>(n) * hidden);
        d_z.resize(static_cast<std::size_t>(n) * n_z);
    }
};

double kl_float(const float* mu, const float* log_tau, int n_z) {
    double sq = 0.0, var = 0.0, lt = 0.0;
    for (int i = 0; i < n_z; ++i) {
        sq += static_cast<double>(mu[i]) * mu[i];
        const double tau = std::exp(static_cast<double>(log_tau[i]));
        var += tau * tau;
        lt += log_tau[i];
    }
    return 0.5 * (sq + var - n_z) - lt;
}

/// Forward Z -> sigmoid output for rows [0, n); fills h_pre, h, o.
void batch_forward(const DecoderModel& m, BatchBuffers& buf, int n, bool parallel) {
    const int out = m.out_dim();
    kernels::linear_forward(m.w1.data(), m.b1.data(), buf.z.data(), buf.h_pre.data(), n,
                            m.hidden, m.n_z, parallel);
    const std::size_t nh = static_cast<std::size_t>(n) * m.hidden;
    for (std::size_t i = 0; i < nh; ++i) buf.h[i] = buf.h_pre[i] > 0.0f ? buf.h_pre[i] : 0.0f;
    kernels::linear_forward(m.w2.data(), m.b2.data(), buf.h.data(), buf.o.data(), n, out,
                            m.hidden, parallel);
    const std::size_t no = static_cast<std::size_t>(n) * out;
    for (std::size_t i = 0; i < no; ++i) buf.o[i] = 1.0f / (1.0f + std::exp(-buf.o[i]));
}

} // namespace

TrainResult svi_train(const std::vector<Image>& images, int cls, const TrainConfig& cfg) {
    const int n_img = static_cast<int>(images.size());
    if (n_img == 0) throw std::invalid_argument("svi_train: no images");
    const int d = images[0].height;
    for (const auto& img : images)
        if (img.height != d || img.width != d)
            throw std::invalid_argument("svi_train: images must be square and same size");

    DecoderModel m = init_decoder(cls,
                                  mix_seed(cfg.seed,
                                           static_cast<std::uint64_t>(Stream::decoder_init),
                                           static_cast<std::uint64_t>(cls)),
                                  10, d, 300);
    const int n_z = m.n_z;
    const int out = m.out_dim();
    const double inv_var = 1.0 / (cfg.sigma * cfg.sigma);

    std::vector<float> x(static_cast<std::size_t>(n_img) * out);
    for (int i = 0; i < n_img; ++i)
        for (int j = 0; j < out; ++j)
            x[static_cast<std::size_t>(i) * out + j] = static_cast<float>(images[i].data[j]);

    // Per-image variational state: params = [mu | log_tau], warm-started
    // across epochs, each image with its own draw stream and Adam moments.
    std::vector<std::vector<float>> lat(n_img, std::vector<float>(2 * n_z, 0.0f));
    std::vector<Adam<float>> lat_opt;
    lat_opt.reserve(n_img);
    std::vector<Rng> streams;
    streams.reserve(n_img);
    for (int i = 0; i < n_img; ++i) {
        lat_opt.emplace_back(static_cast<std::size_t>(2 * n_z), cfg.lr_latent);
        streams.push_back(sub_rng(cfg.seed, Stream::train_latent, static_cast<std::uint64_t>(i)));
    }

    Adam<float> opt_w1(m.w1.size(), cfg.lr_decoder), opt_b1(m.b1.size(), cfg.lr_decoder);
    Adam<float> opt_w2(m.w2.size(), cfg.lr_decoder), opt_b2(m.b2.size(), cfg.lr_decoder);
    std::vector<float> g_w1(m.w1.size()), g_b1(m.b1.size()), g_w2(m.w2.size()), g_b2(m.b2.size());

    const int batch = std::max(1, std::min(cfg.batch, n_img));
    BatchBuffers buf;
    buf.resize(batch, n_z, m.hidden, out);
    std::vector<double> last_loss(n_img, 0.0);

    auto draw_batch_z = [&](int start, int n) {
        for (int i = 0; i < n; ++i) {
            const auto& p = lat[start + i];
            float* eps = buf.eps.data() + static_cast<std::size_t>(i) * n_z;
            float* z = buf.z.data() + static_cast<std::size_t>(i) * n_z;
            for (int j = 0; j < n_z; ++j) {
                eps[j] = static_cast<float>(streams[start + i].normal());
                z[j] = p[j] + std::exp(p[n_z + j]) * eps[j];
            }
        }
    };

    auto batch_data_loss = [&](int start, int i) {
        const float* o = buf.o.data() + static_cast<std::size_t>(i) * out;
        const float* xi = x.data() + static_cast<std::size_t>(start + i) * out;
        double acc = 0.0;
        for (int j = 0; j < out; ++j) {
            const double r = static_cast<double>(o[j]) - static_cast<double>(xi[j]);
            acc += r * r;
        }
        return acc;
    };

    TrainResult result;
    result.epoch_loss.reserve(cfg.epochs + 1);

    // Pre-training loss at the initial decoder and latents.
    {
        double total = 0.0;
        for (int start = 0; start < n_img; start += batch) {
            const int n = std::min(batch, n_img - start);
            draw_batch_z(start, n);
            batch_forward(m, buf, n, cfg.parallel);
            for (int i = 0; i < n; ++i) {
                const auto& p = lat[start + i];
                total += kl_float(p.data(), p.data() + n_z, n_z) +
                         0.5 * inv_var * batch_data_loss(start, i);
            }
        }
        result.epoch_loss.push_back(total / n_img);
    }

    std::vector<float> g_lat(2 * n_z);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (int start = 0; start < n_img; start += batch) {
            const int n = std::min(batch, n_img - start);
            for (int step = 0; step < cfg.latent_steps; ++step) {
                draw_batch_z(start, n);
                batch_forward(m, buf, n, cfg.parallel);
                for (int i = 0; i < n; ++i) {
                    const auto& p = lat[start + i];
                    last_loss[start + i] = kl_float(p.data(), p.data() + n_z, n_z) +
                                           0.5 * inv_var * batch_data_loss(start, i);
                    const float* o = buf.o.data() + static_cast<std::size_t>(i) * out;
                    const float* xi = x.data() + static_cast<std::size_t>(start + i) * out;
                    float* dp = buf.d_opre.data() + static_cast<std::size_t>(i) * out;
                    for (int j = 0; j < out; ++j)
                        dp[j] = (o[j] - xi[j]) * o[j] * (1.0f - o[j]) * static_cast<float>(inv_var);
                }
                kernels::linear_backward_data(m.w2t.data(), buf.d_opre.data(), buf.d_h.data(), n,
                                              out, m.hidden, cfg.parallel);
                const std::size_t nh = static_cast<std::size_t>(n) * m.hidden;
                for (std::size_t i = 0; i < nh; ++i)
                    if (buf.h_pre[i] <= 0.0f) buf.d_h[i] = 0.0f;
                kernels::linear_backward_data(m.w1t.data(), buf.d_h.data(), buf.d_z.data(), n,
                                              m.hidden, n_z, cfg.parallel);
                for (int i = 0; i < n; ++i) {
                    auto& p = lat[start + i];
                    const float* eps = buf.eps.data() + static_cast<std::size_t>(i) * n_z;
                    const float* dz = buf.d_z.data() + static_cast<std::size_t>(i) * n_z;
                    for (int j = 0; j < n_z; ++j) {
                        const float tau = std::exp(p[n_z + j]);
                        g_lat[j] = dz[j] + p[j];
                        g_lat[n_z + j] = dz[j] * eps[j] * tau + (tau * tau - 1.0f);
                    }
                    lat_opt[start + i].step(p.data(), g_lat.data(), 2 * n_z);
                }
            }

            // Decoder step on a fresh sample, gradients averaged over the batch.
            draw_batch_z(start, n);
            batch_forward(m, buf, n, cfg.parallel);
            const float scale = static_cast<float>(inv_var / n);
            for (int i = 0; i < n; ++i) {
                const float* o = buf.o.data() + static_cast<std::size_t>(i) * out;
                const float* xi = x.data() + static_cast<std::size_t>(start + i) * out;
                float* dp = buf.d_opre.data() + static_cast<std::size_t>(i) * out;
                for (int j = 0; j < out; ++j)
                    dp[j] = (o[j] - xi[j]) * o[j] * (1.0f - o[j]) * scale;
            }
            kernels::linear_param_grad(buf.h.data(), buf.d_opre.data(), g_w2.data(), g_b2.data(),
                                       n, out, m.hidden, cfg.parallel);
            kernels::linear_backward_data(m.w2t.data(), buf.d_opre.data(), buf.d_h.data(), n, out,
                                          m.hidden, cfg.parallel);
            const std::size_t nh = static_cast<std::size_t>(n) * m.hidden;
            for (std::size_t i = 0; i < nh; ++i)
                if (buf.h_pre[i] <= 0.0f) buf.d_h[i] = 0.0f;
            kernels::linear_param_grad(buf.z.data(), buf.d_h.data(), g_w1.data(), g_b1.data(), n,
                                       m.hidden, n_z, cfg.parallel);
            opt_w1.step(m.w1.data(), g_w1.data(), m.w1.size());
            opt_b1.step(m.b1.data(), g_b1.data(), m.b1.size());
            opt_w2.step(m.w2.data(), g_w2.data(), m.w2.size());
            opt_b2.step(m.b2.data(), g_b2.data(), m.b2.size());
            m.rebuild_transposes();
        }
        double total = 0.0;
        for (int i = 0; i < n_img; ++i) total += last_loss[i];
        result.epoch_loss.push_back(total / n_img);
    }

    result.model = std::move(m);
    return result;
}

namespace {

void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void put_floats(std::ostream& os, const std::vector<float>& v) {
    os.write(reinterpret_cast<const char*>(v.data()),
             static_cast<std::streamsize>(v.size() * sizeof(float)));
}

void get_floats(std::istream& is, std::vector<float>& v, std::size_t n) {
    v.resize(n);
    is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(float)));
}

} // namespace

void save_model(const DecoderModel& m, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("save_model: cannot open " + path);
    os.write("DSAM", 4);
    put_u32(os, static_cast<std::uint32_t>(m.cls));
    put_u32(os, static_cast<std::uint32_t>(m.n_z));
    put_u32(os, static_cast<std::uint32_t>(m.d));
    put_u32(os, static_cast<std::uint32_t>(m.hidden));
    put_floats(os, m.w1);
    put_floats(os, m.b1);
    put_floats(os, m.w2);
    put_floats(os, m.b2);
    if (!os) throw std::runtime_error("save_model: write failed for " + path);
}

DecoderModel load_model(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("load_model: cannot open " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "DSAM", 4) != 0)
        throw std::runtime_error("load_model: bad magic in " + path);
    DecoderModel m;
    m.cls = static_cast<int>(get_u32(is));
    m.n_z = static_cast<int>(get_u32(is));
    m.d = static_cast<int>(get_u32(is));
    m.hidden = static_cast<int>(get_u32(is));
    if (m.n_z <= 0 || m.d <= 0 || m.hidden <= 0)
        throw std::runtime_error("load_model: corrupt header in " + path);
    const std::size_t out = static_cast<std::size_t>(m.out_dim());
    get_floats(is, m.w1, static_cast<std::size_t>(m.hidden) * m.n_z);
    get_floats(is, m.b1, static_cast<std::size_t>(m.hidden));
    get_floats(is, m.w2, out * m.hidden);
    get_floats(is, m.b2, out);
    if (!is) throw std::runtime_error("load_model: truncated file " + path);
    m.rebuild_transposes();
    return m;
}

} // namespace dsa::decoder
