#pragma once

#include <cstdint>
#include <string>

namespace dsa::config {

/// Flat run configuration: one key per line as key=value, '#' comments.
/// Every field below is a documented default; unknown keys are rejected.
struct RunConfig {
    std::uint64_t seed = 0;
    double scale = 1.0;              // dataset-size multiplier
    int n_per_class = 500;           // paired-dataset appearances per class

    // decoder training
    int epochs = 400;
    int batch = 100;
    int latent_steps = 10;
    double lr_decoder = 1e-4;
    double lr_latent_train = 1e-2;

    // reconstruction / selection
    int n_iter = 300;
    double sigma = 0.1;
    double t0 = 0.15;
    double lr_latent = 0.01;
    double lambda = 15.0;
    bool tune_lambda = false;
    double min_objectness = 0.25;
    double nms_nt = 0.5;
    std::string cache_mode = "paper"; // paper | invalidate
    bool enable_rotation = false;
    bool competition = true;

    // experiment
    std::string scenario = "baseline";
    std::string noise_profile = "baseline";
    double rotate_degrees = 10.0;
    int enlarge_side = 180;
    int jobs = 1;
    std::string out_dir = "out";
};

/// Applies one key=value pair; throws std::invalid_argument on unknown keys
/// or unparsable values.
void apply_kv(RunConfig& cfg, const std::string& key, const std::string& value);

/// Parses a config file on top of the defaults.
RunConfig load_config(const std::string& path);

/// The configuration as a parseable key=value listing.
std::string dump_config(const RunConfig& cfg);

} // namespace dsa::config
