#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dsa/detsim.hpp"
#include "dsa/recon.hpp"
#include "dsa/scenegen.hpp"
#include "dsa/selection.hpp"

namespace dsa::eval {

struct SceneResult {
    int scene_id = 0;
    int true_count = 0;
    int pred_count = 0;
    std::vector<int> true_labels; // sorted multiset
    std::vector<int> pred_labels; // sorted multiset
    std::string method;
    double wall_ms = 0.0;
};

struct Metric {
    double p = 0.0;
    double se = 0.0;
};

/// Binomial standard error sqrt(p (1 - p) / n).
double standard_error(double p, std::size_t n);

/// Fraction of scenes whose predicted object count matches the truth.
Metric accuracy_boxes(const std::vector<SceneResult>& results);

/// Fraction whose predicted label multiset matches the truth exactly
/// (multiset equality implies count equality).
Metric accuracy_labels(const std::vector<SceneResult>& results);

/// Grid value with the best score; ties resolved by the median of the
/// argmax set (lower-median for even ties).
double pick_best(const std::vector<double>& grid, const std::vector<double>& scores);

/// A rendered scene plus its simulated detections, shared across methods.
struct PreparedScene {
    int id = 0;
    Image image;
    int true_count = 0;
    std::vector<int> true_labels;
    std::vector<Detection> dets;
};

/// Materializes records and runs the detection simulator, one noise
/// sub-stream per scene. split_tag keeps validation and test draws apart.
std::vector<PreparedScene> prepare_scenes(const std::vector<scenegen::SceneRecord>& recs,
                                          const scenegen::SceneConfig& scene_cfg,
                                          const detsim::NoiseConfig& noise, std::uint64_t seed,
                                          std::uint64_t split_tag);

struct Report {
    std::string method;
    std::string param_name;   // "T" for baselines, "lambda" for DSA methods
    double param_boxes = 0.0;
    double param_labels = 0.0;
    double acc_boxes = 0.0;
    double se_boxes = 0.0;
    double acc_labels = 0.0;
    double se_labels = 0.0;
    std::size_t n = 0;
    std::string cache_mode;   // "paper" | "invalidate" for DSA rows, "-" otherwise
};

struct ExpConfig {
    std::string scenario = "baseline"; // baseline | fixed05 | score-shift | rotate10 | enlarge
    std::uint64_t seed = 0;
    double scale = 1.0;                // scales the published dataset sizes
    scenegen::SceneConfig scene;
    select::DsaConfig dsa;
    bool tune_lambda = false;          // false: dsa.lambda is pinned
    std::vector<double> lambda_grid = {10.0, 20.0, 30.0, 40.0, 50.0};
    std::vector<std::string> methods = {"nms", "soft-nms", "diou-nms", "nms+dsa",
                                        "soft-nms+dsa"};
    double nms_nt = 0.5;
    int jobs = 1;
    std::string out_dir;               // when set: report CSV, scene + decision logs
    double rotate_degrees = 10.0;
    int enlarge_side = 180;
    bool enable_competition = true;    // rotate10 only: label competition (9 -> 8)
};

/// Threshold grid 0.01 .. 0.99 used for baseline tuning.
std::vector<double> threshold_grid();

/// Per-scenario pipeline: generate validation and test scenes, simulate
/// detections, tune each method's parameter on validation (unless pinned),
/// evaluate on test, and emit one Report per method.
std::vector<Report> run_experiment(const ExpConfig& cfg, const recon::ModelSet& models);

std::string report_csv(const std::vector<Report>& reports);
std::string report_table(const std::vector<Report>& reports);

} // namespace dsa::eval
