#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dsa/image.hpp"

namespace dsa::decoder {

/// Per-class generative decoder: z -> Linear -> ReLU -> Linear -> sigmoid,
/// producing a d x d RGB patch flattened row-major (pixel-major, channel-minor).
/// Weights are stored float32; that is also the on-disk precision, so
/// save/load round-trips are bit-exact.
struct DecoderModel {
    int cls = 0;
    int n_z = 10;
    int d = 50;
    int hidden = 300;
    std::vector<float> w1; // hidden x n_z, row-major
    std::vector<float> b1; // hidden
    std::vector<float> w2; // out x hidden, row-major
    std::vector<float> b2; // out
    std::vector<float> w1t; // n_z x hidden, derived
    std::vector<float> w2t; // hidden x out, derived

    int out_dim() const { return d * d * 3; }
    void rebuild_transposes();
};

/// Fresh decoder with U(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases.
DecoderModel init_decoder(int cls, std::uint64_t seed, int n_z = 10, int d = 50,
                          int hidden = 300);

/// Forward pass in double precision (weights upcast). Returns out_dim() values.
std::vector<double> decoder_forward(const DecoderModel& m, const std::vector<double>& z);

/// Analytic dL/dz given upstream dL/d(output), double precision throughout.
std::vector<double> decoder_gradients(const DecoderModel& m, const std::vector<double>& z,
                                      const std::vector<double>& upstream);

/// KL(q || N(0,I)) for q = N(mu, diag(tau^2)) with log_tau parameterization.
double kl_diag_gaussian(const std::vector<double>& mu, const std::vector<double>& log_tau);

struct TrainConfig {
    int epochs = 400;
    int batch = 100;
    int latent_steps = 10;
    double lr_decoder = 1e-4;
    double lr_latent = 1e-2;
    double sigma = 0.1;
    std::uint64_t seed = 0;
    bool parallel = false;
};

struct TrainResult {
    DecoderModel model;
    /// epoch_loss[0] is the pre-training loss at the initial decoder and
    /// latents; entries 1..epochs are per-epoch mean training losses.
    std::vector<double> epoch_loss;
};

/// Stochastic variational training: alternating per-image latent updates and
/// decoder updates. Images must all be d x d and are matched against the
/// decoder output in [0,1].
TrainResult svi_train(const std::vector<Image>& images, int cls, const TrainConfig& cfg);

void save_model(const DecoderModel& m, const std::string& path);
DecoderModel load_model(const std::string& path);

} // namespace dsa::decoder
