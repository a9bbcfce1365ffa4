#include "dsa/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

#include "dsa/nms.hpp"
#include "dsa/rng.hpp"

namespace dsa::eval {

double standard_error(double p, std::size_t n) {
    if (n == 0) throw std::invalid_argument("standard_error: empty sample");
    return std::sqrt(p * (1.0 - p) / static_cast<double>(n));
}

Metric accuracy_boxes(const std::vector<SceneResult>& results) {
    if (results.empty()) throw std::invalid_argument("accuracy_boxes: empty results");
    std::size_t hits = 0;
    for (const auto& r : results)
        if (r.pred_count == r.true_count) ++hits;
    Metric m;
    m.p = static_cast<double>(hits) / results.size();
    m.se = standard_error(m.p, results.size());
    return m;
}

Metric accuracy_labels(const std::vector<SceneResult>& results) {
    if (results.empty()) throw std::invalid_argument("accuracy_labels: empty results");
    std::size_t hits = 0;
    for (const auto& r : results)
        if (r.pred_labels == r.true_labels) ++hits;
    Metric m;
    m.p = static_cast<double>(hits) / results.size();
    m.se = standard_error(m.p, results.size());
    return m;
}

double pick_best(const std::vector<double>& grid, const std::vector<double>& scores) {
    if (grid.empty() || grid.size() != scores.size())
        throw std::invalid_argument("pick_best: grid/scores mismatch");
    const double best = *std::max_element(scores.begin(), scores.end());
    std::vector<double> arg;
    for (std::size_t i = 0; i < grid.size(); ++i)
        if (scores[i] == best) arg.push_back(grid[i]);
    std::sort(arg.begin(), arg.end());
    return arg[(arg.size() - 1) / 2];
}

std::vector<double> threshold_grid() {
    std::vector<double> g;
    g.reserve(99);
    for (int i = 1; i <= 99; ++i) g.push_back(i / 100.0);
    return g;
}

std::vector<PreparedScene> prepare_scenes(const std::vector<scenegen::SceneRecord>& recs,
                                          const scenegen::SceneConfig& scene_cfg,
                                          const detsim::NoiseConfig& noise, std::uint64_t seed,
                                          std::uint64_t split_tag) {
    std::vector<PreparedScene> out;
    out.reserve(recs.size());
    for (std::size_t i = 0; i < recs.size(); ++i) {
        auto [image, gt] = scenegen::materialize(recs[i], scene_cfg);
        PreparedScene s;
        s.id = static_cast<int>(i);
        s.image = std::move(image);
        s.true_count = static_cast<int>(gt.objects.size());
        for (const auto& o : gt.objects) s.true_labels.push_back(o.cls);
        std::sort(s.true_labels.begin(), s.true_labels.end());
        detsim::NoiseConfig nc = noise;
        nc.seed = mix_seed(seed, static_cast<std::uint64_t>(Stream::detsim),
                           (split_tag << 32) | i);
        s.dets = detsim::simulate_detections(gt, nc);
        out.push_back(std::move(s));
    }
    return out;
}

namespace {

std::vector<int> sorted_labels(const std::vector<Detection>& dets) {
    std::vector<int> out;
    out.reserve(dets.size());
    for (const auto& d : dets) out.push_back(d.cls);
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<int> sorted_labels(const std::vector<recon::IndexedDetection>& dets) {
    std::vector<int> out;
    out.reserve(dets.size());
    for (const auto& d : dets) out.push_back(d.det.cls);
    std::sort(out.begin(), out.end());
    return out;
}

bool is_dsa_method(const std::string& m) { return m.size() > 4 && m.ends_with("+dsa"); }

std::vector<Detection> baseline_suppress(const std::vector<Detection>& dets,
                                         const std::string& method, double nt) {
    nms::NmsConfig nc;
    nc.threshold = nt;
    if (method == "nms") return nms::nms(dets, nc);
    if (method == "diou-nms") return nms::diou_nms(dets, nc);
    if (method == "soft-nms") return nms::soft_nms(dets, nc);
    throw std::invalid_argument("unknown method: " + method);
}

/// Pre-suppression feeding a DSA run: the part before "+dsa".
std::vector<Detection> dsa_prefilter(const std::vector<Detection>& dets,
                                     const std::string& method, double nt) {
    const std::string base = method.substr(0, method.size() - 4);
    return baseline_suppress(dets, base, nt);
}

/// Validation accuracy per grid threshold for one baseline method.
void baseline_val_scores(const std::vector<PreparedScene>& scenes, const std::string& method,
                         double nt, const std::vector<double>& grid,
                         std::vector<double>* boxes_scores,
                         std::vector<double>* labels_scores) {
    boxes_scores->assign(grid.size(), 0.0);
    labels_scores->assign(grid.size(), 0.0);
    for (const auto& s : scenes) {
        const auto supp = baseline_suppress(s.dets, method, nt);
        for (std::size_t g = 0; g < grid.size(); ++g) {
            const auto sel = nms::threshold_select(supp, grid[g]);
            if (static_cast<int>(sel.size()) == s.true_count) {
                (*boxes_scores)[g] += 1.0;
                if (sorted_labels(sel) == s.true_labels) (*labels_scores)[g] += 1.0;
            }
        }
    }
    for (auto& v : *boxes_scores) v /= static_cast<double>(scenes.size());
    for (auto& v : *labels_scores) v /= static_cast<double>(scenes.size());
}

std::vector<SceneResult> evaluate_baseline(const std::vector<PreparedScene>& scenes,
                                           const std::string& method, double nt, double t) {
    std::vector<SceneResult> out;
    out.reserve(scenes.size());
    for (const auto& s : scenes) {
        const auto t0 = std::chrono::steady_clock::now();
        const auto sel = nms::threshold_select(baseline_suppress(s.dets, method, nt), t);
        const auto t1 = std::chrono::steady_clock::now();
        SceneResult r;
        r.scene_id = s.id;
        r.true_count = s.true_count;
        r.pred_count = static_cast<int>(sel.size());
        r.true_labels = s.true_labels;
        r.pred_labels = sorted_labels(sel);
        r.method = method;
        r.wall_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
        out.push_back(std::move(r));
    }
    return out;
}

struct DsaSceneOutput {
    SceneResult result;
    std::vector<select::GreedyStep> decisions;
};

std::vector<DsaSceneOutput> evaluate_dsa(const std::vector<PreparedScene>& scenes,
                                         const std::string& method,
                                         const recon::ModelSet& models,
                                         const select::DsaConfig& base, double lambda,
                                         double nt, std::uint64_t seed,
                                         std::uint64_t split_tag, int jobs) {
    std::vector<DsaSceneOutput> out(scenes.size());
    std::vector<std::exception_ptr> errors(scenes.size());
    const int n = static_cast<int>(scenes.size());
#pragma omp parallel for schedule(dynamic) num_threads(std::max(1, jobs)) if (jobs > 1)
    for (int i = 0; i < n; ++i) {
        try {
            const auto& s = scenes[i];
            const auto t0 = std::chrono::steady_clock::now();
            select::DsaConfig dc = base;
            dc.lambda = lambda;
            dc.recon.seed = mix_seed(seed, static_cast<std::uint64_t>(Stream::recon_scene),
                                     (split_tag << 32) | static_cast<std::uint64_t>(s.id));
            const auto pre = dsa_prefilter(s.dets, method, nt);
            auto interp = select::greedy_select(s.image, pre, models, dc);
            const auto t1 = std::chrono::steady_clock::now();
            SceneResult r;
            r.scene_id = s.id;
            r.true_count = s.true_count;
            r.pred_count = static_cast<int>(interp.selected.size());
            r.true_labels = s.true_labels;
            r.pred_labels = sorted_labels(interp.selected);
            r.method = method;
            r.wall_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
            out[i].result = std::move(r);
            out[i].decisions = std::move(interp.log);
        } catch (...) {
            errors[i] = std::current_exception();
        }
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
    return out;
}

std::vector<SceneResult> dsa_results(const std::vector<DsaSceneOutput>& outs) {
    std::vector<SceneResult> r;
    r.reserve(outs.size());
    for (const auto& o : outs) r.push_back(o.result);
    return r;
}

void write_scene_log(const std::string& path, const std::vector<SceneResult>& results,
                     double param) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path);
    for (const auto& r : results) {
        nlohmann::json j{{"scene", r.scene_id},    {"method", r.method},
                         {"param", param},         {"true_count", r.true_count},
                         {"pred_count", r.pred_count}, {"true_labels", r.true_labels},
                         {"pred_labels", r.pred_labels}, {"wall_ms", r.wall_ms}};
        os << j.dump() << "\n";
    }
}

void write_decision_log(const std::string& path, const std::vector<DsaSceneOutput>& outs) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path);
    for (const auto& o : outs) {
        for (const auto& d : o.decisions) {
            nlohmann::json j{{"scene", o.result.scene_id},
                             {"step", d.step},
                             {"cand", d.cand_index},
                             {"label", d.label},
                             {"l_prev", d.l_prev},
                             {"l_add", d.l_add},
                             {"l_swap", d.l_swap},
                             {"action", d.action},
                             {"victim", d.swap_victim}};
            os << j.dump() << "\n";
        }
    }
}

} // namespace

std::vector<Report> run_experiment(const ExpConfig& cfg, const recon::ModelSet& models) {
    scenegen::EvalSizes sizes;
    const auto scaled = [&](int v) {
        return std::max(1, static_cast<int>(std::lround(v * cfg.scale)));
    };
    sizes.val3 = scaled(sizes.val3);
    sizes.val4 = scaled(sizes.val4);
    sizes.test5 = scaled(sizes.test5);
    sizes.test6 = scaled(sizes.test6);
    sizes.test7 = scaled(sizes.test7);
    auto sets = scenegen::gen_eval_sets(cfg.seed, sizes, cfg.scene);

    detsim::NoiseConfig val_noise = detsim::shift_profile("baseline");
    detsim::NoiseConfig test_noise = val_noise;
    std::vector<scenegen::SceneRecord> test_recs = sets.test;
    select::DsaConfig dsa = cfg.dsa;
    bool pin_half = false;

    if (cfg.scenario == "baseline") {
    } else if (cfg.scenario == "fixed05") {
        pin_half = true;
    } else if (cfg.scenario == "score-shift") {
        test_noise = detsim::shift_profile("score_shift");
    } else if (cfg.scenario == "rotate10") {
        test_recs = scenegen::perturb_rotate(test_recs, cfg.rotate_degrees);
        test_noise = detsim::shift_profile("label_shift");
        dsa.recon.enable_rotation = true;
        if (cfg.enable_competition) {
            if (dsa.competition_pairs.empty()) dsa.competition_pairs.push_back({9, 8});
        } else {
            dsa.competition_pairs.clear();
        }
    } else if (cfg.scenario == "enlarge") {
        test_recs = scenegen::perturb_enlarge(test_recs, cfg.enlarge_side, cfg.scene);
    } else {
        throw std::invalid_argument("unknown scenario: " + cfg.scenario);
    }

    const auto val = prepare_scenes(sets.val, cfg.scene, val_noise, cfg.seed, 0);
    const auto test = prepare_scenes(test_recs, cfg.scene, test_noise, cfg.seed, 1);
    const auto grid = threshold_grid();

    const bool want_logs = !cfg.out_dir.empty();
    if (want_logs) std::filesystem::create_directories(cfg.out_dir);

    std::vector<Report> reports;
    for (const auto& method : cfg.methods) {
        Report rep;
        rep.method = method;
        rep.n = test.size();
        if (!is_dsa_method(method)) {
            rep.param_name = "T";
            rep.cache_mode = "-";
            double tb = 0.5, tl = 0.5;
            if (!pin_half) {
                std::vector<double> sb, sl;
                baseline_val_scores(val, method, cfg.nms_nt, grid, &sb, &sl);
                tb = pick_best(grid, sb);
                tl = pick_best(grid, sl);
            }
            rep.param_boxes = tb;
            rep.param_labels = tl;
            const auto res_b = evaluate_baseline(test, method, cfg.nms_nt, tb);
            const auto res_l = tl == tb ? res_b : evaluate_baseline(test, method, cfg.nms_nt, tl);
            const Metric mb = accuracy_boxes(res_b);
            const Metric ml = accuracy_labels(res_l);
            rep.acc_boxes = mb.p;
            rep.se_boxes = mb.se;
            rep.acc_labels = ml.p;
            rep.se_labels = ml.se;
            if (want_logs) {
                write_scene_log(cfg.out_dir + "/scenes_" + method + "_boxes.jsonl", res_b, tb);
                write_scene_log(cfg.out_dir + "/scenes_" + method + "_labels.jsonl", res_l, tl);
            }
        } else {
            if (models.empty())
                throw std::runtime_error(
                    "no decoder models loaded; run train-decoder and pass --models");
            rep.param_name = "lambda";
            rep.cache_mode =
                dsa.cache_mode == select::DsaConfig::CacheMode::paper ? "paper" : "invalidate";
            double lb = dsa.lambda, ll = dsa.lambda;
            if (cfg.tune_lambda) {
                std::vector<double> sb(cfg.lambda_grid.size(), 0.0),
                    sl(cfg.lambda_grid.size(), 0.0);
                for (std::size_t g = 0; g < cfg.lambda_grid.size(); ++g) {
                    const auto outs = evaluate_dsa(val, method, models, dsa, cfg.lambda_grid[g],
                                                   cfg.nms_nt, cfg.seed, 0, cfg.jobs);
                    const auto res = dsa_results(outs);
                    sb[g] = accuracy_boxes(res).p;
                    sl[g] = accuracy_labels(res).p;
                }
                lb = pick_best(cfg.lambda_grid, sb);
                ll = pick_best(cfg.lambda_grid, sl);
            }
            rep.param_boxes = lb;
            rep.param_labels = ll;
            const auto outs_b =
                evaluate_dsa(test, method, models, dsa, lb, cfg.nms_nt, cfg.seed, 1, cfg.jobs);
            const auto res_b = dsa_results(outs_b);
            std::vector<SceneResult> res_l;
            if (ll == lb) {
                res_l = res_b;
            } else {
                const auto outs_l = evaluate_dsa(test, method, models, dsa, ll, cfg.nms_nt,
                                                 cfg.seed, 1, cfg.jobs);
                res_l = dsa_results(outs_l);
            }
            const Metric mb = accuracy_boxes(res_b);
            const Metric ml = accuracy_labels(res_l);
            rep.acc_boxes = mb.p;
            rep.se_boxes = mb.se;
            rep.acc_labels = ml.p;
            rep.se_labels = ml.se;
            if (want_logs) {
                write_scene_log(cfg.out_dir + "/scenes_" + method + "_boxes.jsonl", res_b, lb);
                write_scene_log(cfg.out_dir + "/scenes_" + method + "_labels.jsonl", res_l, ll);
                write_decision_log(cfg.out_dir + "/decisions_" + method + ".jsonl", outs_b);
            }
        }
        reports.push_back(std::move(rep));
    }

    if (want_logs) {
        std::ofstream os(cfg.out_dir + "/report.csv");
        os << report_csv(reports);
    }
    return reports;
}

std::string report_csv(const std::vector<Report>& reports) {
    std::ostringstream os;
    os << "method,param_name,param_boxes,param_labels,acc_boxes,se_boxes,acc_labels,"
          "se_labels,n,cache_mode\n";
    os << std::setprecision(10);
    for (const auto& r : reports) {
        os << r.method << ',' << r.param_name << ',' << r.param_boxes << ',' << r.param_labels
           << ',' << r.acc_boxes << ',' << r.se_boxes << ',' << r.acc_labels << ','
           << r.se_labels << ',' << r.n << ',' << r.cache_mode << "\n";
    }
    return os.str();
}

std::string report_table(const std::vector<Report>& reports) {
    std::ostringstream os;
    os << std::left << std::setw(14) << "method" << std::setw(8) << "param" << std::setw(10)
       << "p_boxes" << std::setw(10) << "p_labels" << std::setw(18) << "acc_boxes(se)"
       << std::setw(18) << "acc_labels(se)" << std::setw(6) << "n" << "cache\n";
    for (const auto& r : reports) {
        std::ostringstream ab, al;
        ab << std::fixed << std::setprecision(3) << r.acc_boxes << " (" << std::setprecision(4)
           << r.se_boxes << ")";
        al << std::fixed << std::setprecision(3) << r.acc_labels << " (" << std::setprecision(4)
           << r.se_labels << ")";
        os << std::left << std::setw(14) << r.method << std::setw(8) << r.param_name
           << std::setw(10) << r.param_boxes << std::setw(10) << r.param_labels << std::setw(18)
           << ab.str() << std::setw(18) << al.str() << std::setw(6) << r.n << r.cache_mode
           << "\n";
    }
    return os.str();
}

} // namespace dsa::eval
