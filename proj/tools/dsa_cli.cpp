#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "dsa/artifacts.hpp"
#include "dsa/config.hpp"
#include "dsa/decoder.hpp"
#include "dsa/detsim.hpp"
#include "dsa/eval.hpp"
#include "dsa/io.hpp"
#include "dsa/nms.hpp"
#include "dsa/recon.hpp"
#include "dsa/rng.hpp"
#include "dsa/scenegen.hpp"
#include "dsa/selection.hpp"

namespace fs = std::filesystem;
using dsa::config::RunConfig;

namespace {

std::optional<std::uint64_t> env_seed() {
    const char* s = std::getenv("DSA_SEED");
    if (!s || !*s) return std::nullopt;
    try {
        return std::stoull(s);
    } catch (const std::exception&) {
        throw std::runtime_error("DSA_SEED is not a valid integer");
    }
}

/// Precedence: flag > config file > DSA_SEED > defaults.
RunConfig base_config(const std::string& config_path) {
    RunConfig rc;
    if (const auto es = env_seed()) rc.seed = *es;
    if (!config_path.empty()) {
        std::ifstream is(config_path);
        if (!is) throw std::runtime_error("config: cannot open " + config_path);
        std::string line;
        int line_no = 0;
        while (std::getline(is, line)) {
            ++line_no;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line = line.substr(0, hash);
            const auto a = line.find_first_not_of(" \t\r\n");
            if (a == std::string::npos) continue;
            const auto b = line.find_last_not_of(" \t\r\n");
            line = line.substr(a, b - a + 1);
            const auto eq = line.find('=');
            if (eq == std::string::npos)
                throw std::runtime_error("config: line " + std::to_string(line_no) +
                                         " is not key=value");
            auto trim = [](std::string s) {
                const auto x = s.find_first_not_of(" \t");
                if (x == std::string::npos) return std::string();
                const auto y = s.find_last_not_of(" \t");
                return s.substr(x, y - x + 1);
            };
            dsa::config::apply_kv(rc, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
        }
    }
    return rc;
}

dsa::scenegen::EvalSizes scaled_sizes(double scale) {
    dsa::scenegen::EvalSizes s;
    const auto f = [&](int v) { return std::max(1, static_cast<int>(std::lround(v * scale))); };
    s.val3 = f(s.val3);
    s.val4 = f(s.val4);
    s.test5 = f(s.test5);
    s.test6 = f(s.test6);
    s.test7 = f(s.test7);
    return s;
}

dsa::recon::ModelSet load_models(const std::string& dir) {
    dsa::recon::ModelSet models;
    if (fs::is_directory(dir)) {
        std::vector<fs::path> paths;
        for (const auto& e : fs::directory_iterator(dir)) {
            const auto name = e.path().filename().string();
            if (name.size() > 5 && name.substr(name.size() - 5) == ".dsam") paths.push_back(e.path());
        }
        std::sort(paths.begin(), paths.end());
        for (const auto& p : paths) {
            auto m = dsa::decoder::load_model(p.string());
            models.emplace(m.cls, std::move(m));
        }
    }
    if (models.empty())
        throw std::runtime_error("no decoder models in " + dir + "; run train-decoder first");
    return models;
}

std::vector<std::pair<int, int>> parse_pairs(const std::vector<std::string>& specs) {
    std::vector<std::pair<int, int>> out;
    for (const auto& s : specs) {
        const auto colon = s.find(':');
        if (colon == std::string::npos)
            throw std::runtime_error("bad competition pair (want src:dst): " + s);
        out.emplace_back(std::stoi(s.substr(0, colon)), std::stoi(s.substr(colon + 1)));
    }
    return out;
}

std::string class_file(int cls) {
    return "class_" + std::to_string(cls);
}

void cmd_gen_data(const RunConfig& rc, const std::string& out) {
    const dsa::scenegen::SceneConfig scene;
    const int n_pc = std::max(1, static_cast<int>(std::lround(rc.n_per_class * rc.scale)));
    const auto sizes = scaled_sizes(rc.scale);

    fs::create_directories(out);
    const auto pairs = dsa::scenegen::gen_pairs_dataset(rc.seed, n_pc, scene);
    dsa::artifacts::write_scene_records(out + "/pairs.jsonl", pairs);
    const auto sets = dsa::scenegen::gen_eval_sets(rc.seed, sizes, scene);
    dsa::artifacts::write_scene_records(out + "/scenes_val.jsonl", sets.val);
    dsa::artifacts::write_scene_records(out + "/scenes_test.jsonl", sets.test);

    std::size_t per_class = 0;
    for (int cls = 1; cls <= dsa::scenegen::num_classes(); ++cls) {
        const auto imgs = dsa::scenegen::decoder_class_images(pairs, cls, scene);
        per_class = imgs.size();
        const std::string dir = out + "/decoder/" + class_file(cls);
        fs::create_directories(dir);
        for (std::size_t i = 0; i < imgs.size(); ++i) {
            std::ostringstream name;
            name << dir << "/img_" << std::setw(4) << std::setfill('0') << i << ".imgf";
            dsa::io::write_imgf(imgs[i], name.str());
        }
    }

    nlohmann::json manifest{{"seed", rc.seed},
                            {"scale", rc.scale},
                            {"n_per_class", n_pc},
                            {"classes", dsa::scenegen::num_classes()},
                            {"decoder_images_per_class", per_class},
                            {"pair_scenes", pairs.size()},
                            {"val_scenes", sets.val.size()},
                            {"test_scenes", sets.test.size()},
                            {"canvas", {scene.canvas_h, scene.canvas_w}},
                            {"decoder_d", scene.decoder_d},
                            {"formats", {{"image", "imgf"}, {"model", "dsam"}}}};
    std::ofstream ms(out + "/manifest.json");
    ms << manifest.dump(2) << "\n";
    std::cout << "wrote " << pairs.size() << " pair scenes, " << per_class
              << " decoder images/class, " << sets.val.size() << " val scenes, "
              << sets.test.size() << " test scenes to " << out << "\n";
}

void cmd_train_decoder(const RunConfig& rc, const std::string& data, const std::string& out,
                       const std::vector<int>& classes) {
    if (!fs::is_directory(data + "/decoder"))
        throw std::runtime_error("decoder dataset not found under " + data +
                                 "; run gen-data first");
    fs::create_directories(out);
    for (int cls : classes) {
        const std::string dir = data + "/decoder/" + class_file(cls);
        if (!fs::is_directory(dir))
            throw std::runtime_error("decoder dataset not found under " + dir +
                                     "; run gen-data first");
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(dir))
            if (e.path().extension() == ".imgf") files.push_back(e.path());
        std::sort(files.begin(), files.end());
        if (files.empty())
            throw std::runtime_error("no training images under " + dir + "; run gen-data first");
        std::vector<dsa::Image> imgs;
        imgs.reserve(files.size());
        for (const auto& f : files) imgs.push_back(dsa::io::read_imgf(f.string()));

        dsa::decoder::TrainConfig tc;
        tc.epochs = rc.epochs;
        tc.batch = rc.batch;
        tc.latent_steps = rc.latent_steps;
        tc.lr_decoder = rc.lr_decoder;
        tc.lr_latent = rc.lr_latent_train;
        tc.sigma = rc.sigma;
        tc.seed = rc.seed;
        tc.parallel = rc.jobs > 1;
        const auto result = dsa::decoder::svi_train(imgs, cls, tc);
        dsa::decoder::save_model(result.model, out + "/" + class_file(cls) + ".dsam");
        std::ofstream csv(out + "/loss_" + class_file(cls) + ".csv");
        csv << "epoch,mean_loss\n" << std::setprecision(12);
        for (std::size_t e = 0; e < result.epoch_loss.size(); ++e)
            csv << e << "," << result.epoch_loss[e] << "\n";
        std::cout << "class " << cls << ": " << imgs.size() << " images, loss "
                  << result.epoch_loss.front() << " -> " << result.epoch_loss.back() << "\n";
    }
}

void cmd_simulate(const RunConfig& rc, const std::string& data, const std::string& split,
                  const std::string& profile, const std::string& out) {
    const dsa::scenegen::SceneConfig scene;
    const auto recs = dsa::artifacts::read_scene_records(data + "/scenes_" + split + ".jsonl");
    const auto noise = dsa::detsim::shift_profile(profile);
    const std::uint64_t split_tag = split == "test" ? 1 : 0;
    std::vector<std::vector<dsa::Detection>> per_scene;
    per_scene.reserve(recs.size());
    for (std::size_t i = 0; i < recs.size(); ++i) {
        auto [image, gt] = dsa::scenegen::materialize(recs[i], scene);
        auto nc = noise;
        nc.seed = dsa::mix_seed(rc.seed, static_cast<std::uint64_t>(dsa::Stream::detsim),
                                (split_tag << 32) | i);
        per_scene.push_back(dsa::detsim::simulate_detections(gt, nc));
    }
    dsa::artifacts::write_detections(out, per_scene);
    std::cout << "wrote detections for " << per_scene.size() << " scenes to " << out << "\n";
}

void dump_interpretation(const std::string& dump_dir, int scene_id,
                         const dsa::Image& image, const dsa::select::Interpretation& interp,
                         const dsa::recon::ModelSet& models,
                         const dsa::recon::ReconConfig& rcfg) {
    fs::create_directories(dump_dir);
    auto cache = interp.cache;
    const auto canvas = dsa::recon::whole_reconstruction(interp.selected, cache, image, models,
                                                         rcfg);
    dsa::io::write_png(canvas, dump_dir + "/canvas_" + std::to_string(scene_id) + ".png");
    dsa::io::write_png(image, dump_dir + "/image_" + std::to_string(scene_id) + ".png");
    for (const auto& d : interp.selected) {
        const auto* sr = cache.find(d.index, d.det.cls);
        if (!sr) continue;
        const std::string stem =
            dump_dir + "/recon_" + std::to_string(scene_id) + "_" + std::to_string(d.index);
        dsa::io::write_png(sr->recon, stem + ".png");
        std::ofstream csv(stem + "_trace.csv");
        csv << "step,kl,recon,total\n" << std::setprecision(12);
        for (const auto& t : sr->trace)
            csv << t.step << "," << t.kl << "," << t.recon << "," << t.total << "\n";
    }
}

struct PostprocessArgs {
    std::string detections, data, split = "val", method, models_dir, out, dump_dir;
    double t = -1.0; // final score threshold; negative = skip
    std::vector<std::string> competition;
    bool invalidate_cache = false;
    bool rotation = false;
};

void cmd_postprocess(const RunConfig& rc, const PostprocessArgs& a) {
    const auto per_scene = dsa::artifacts::read_detections(a.detections);
    fs::create_directories(a.out);
    const bool is_dsa = a.method.size() > 4 && a.method.ends_with("+dsa");

    dsa::nms::NmsConfig nc;
    nc.threshold = rc.nms_nt;
    const auto suppress = [&](const std::vector<dsa::Detection>& dets,
                              const std::string& m) -> std::vector<dsa::Detection> {
        if (m == "nms") return dsa::nms::nms(dets, nc);
        if (m == "soft-nms") return dsa::nms::soft_nms(dets, nc);
        if (m == "diou-nms") return dsa::nms::diou_nms(dets, nc);
        throw std::runtime_error("unknown method: " + m);
    };

    if (!is_dsa) {
        std::vector<std::vector<dsa::Detection>> out;
        out.reserve(per_scene.size());
        for (const auto& dets : per_scene) {
            auto sel = suppress(dets, a.method);
            if (a.t >= 0.0) sel = dsa::nms::threshold_select(sel, a.t);
            out.push_back(std::move(sel));
        }
        dsa::artifacts::write_detections(a.out + "/selected.jsonl", out);
        std::cout << "wrote " << out.size() << " scenes to " << a.out << "/selected.jsonl\n";
        return;
    }

    const auto models = load_models(a.models_dir);
    const dsa::scenegen::SceneConfig scene;
    const auto recs = dsa::artifacts::read_scene_records(a.data + "/scenes_" + a.split + ".jsonl");
    if (recs.size() < per_scene.size())
        throw std::runtime_error("detections reference more scenes than " + a.data +
                                 "/scenes_" + a.split + ".jsonl holds");
    const std::uint64_t split_tag = a.split == "test" ? 1 : 0;

    dsa::select::DsaConfig dc;
    dc.lambda = rc.lambda;
    dc.sigma = rc.sigma;
    dc.min_objectness = rc.min_objectness;
    dc.competition_pairs = parse_pairs(a.competition);
    dc.cache_mode = (a.invalidate_cache || rc.cache_mode == "invalidate")
                        ? dsa::select::DsaConfig::CacheMode::invalidate
                        : dsa::select::DsaConfig::CacheMode::paper;
    dc.recon.n_iter = rc.n_iter;
    dc.recon.t0 = rc.t0;
    dc.recon.lr_latent = rc.lr_latent;
    dc.recon.enable_rotation = a.rotation || rc.enable_rotation;

    const std::string base = a.method.substr(0, a.method.size() - 4);
    std::vector<std::vector<dsa::Detection>> out(per_scene.size());
    std::ofstream decisions(a.out + "/decisions.jsonl");
    for (std::size_t i = 0; i < per_scene.size(); ++i) {
        auto [image, gt] = dsa::scenegen::materialize(recs[i], scene);
        (void)gt;
        auto dd = dc;
        dd.recon.seed = dsa::mix_seed(rc.seed, static_cast<std::uint64_t>(dsa::Stream::recon_scene),
                                      (split_tag << 32) | i);
        const auto pre = suppress(per_scene[i], base);
        const auto interp = dsa::select::greedy_select(image, pre, models, dd);
        for (const auto& d : interp.selected) out[i].push_back(d.det);
        for (const auto& s : interp.log) {
            nlohmann::json j{{"scene", i},       {"step", s.step},    {"cand", s.cand_index},
                             {"label", s.label}, {"l_prev", s.l_prev}, {"l_add", s.l_add},
                             {"l_swap", s.l_swap}, {"action", s.action}, {"victim", s.swap_victim}};
            decisions << j.dump() << "\n";
        }
        if (!a.dump_dir.empty())
            dump_interpretation(a.dump_dir, static_cast<int>(i), image, interp, models, dd.recon);
    }
    dsa::artifacts::write_detections(a.out + "/selected.jsonl", out);
    std::cout << "wrote " << out.size() << " scenes to " << a.out << "/selected.jsonl"
              << " (cache mode: "
              << (dc.cache_mode == dsa::select::DsaConfig::CacheMode::paper ? "paper"
                                                                            : "invalidate")
              << ")\n";
}

struct ExperimentArgs {
    std::string scenario, models_dir, out, methods_csv;
    bool no_competition = false;
    bool tune_lambda = false;
    bool invalidate_cache = false;
};

void cmd_experiment(const RunConfig& rc, const ExperimentArgs& a) {
    dsa::eval::ExpConfig ec;
    ec.scenario = a.scenario.empty() ? rc.scenario : a.scenario;
    ec.seed = rc.seed;
    ec.scale = rc.scale;
    ec.dsa.lambda = rc.lambda;
    ec.dsa.sigma = rc.sigma;
    ec.dsa.min_objectness = rc.min_objectness;
    ec.dsa.cache_mode = (a.invalidate_cache || rc.cache_mode == "invalidate")
                            ? dsa::select::DsaConfig::CacheMode::invalidate
                            : dsa::select::DsaConfig::CacheMode::paper;
    ec.dsa.recon.n_iter = rc.n_iter;
    ec.dsa.recon.t0 = rc.t0;
    ec.dsa.recon.lr_latent = rc.lr_latent;
    ec.dsa.recon.enable_rotation = rc.enable_rotation;
    ec.tune_lambda = a.tune_lambda || rc.tune_lambda;
    ec.nms_nt = rc.nms_nt;
    ec.jobs = rc.jobs;
    ec.out_dir = a.out.empty() ? rc.out_dir : a.out;
    ec.rotate_degrees = rc.rotate_degrees;
    ec.enlarge_side = rc.enlarge_side;
    ec.enable_competition = !a.no_competition && rc.competition;
    if (!a.methods_csv.empty()) {
        ec.methods.clear();
        std::stringstream ss(a.methods_csv);
        std::string tok;
        while (std::getline(ss, tok, ','))
            if (!tok.empty()) ec.methods.push_back(tok);
    }

    bool wants_dsa = false;
    for (const auto& m : ec.methods)
        if (m.size() > 4 && m.ends_with("+dsa")) wants_dsa = true;
    dsa::recon::ModelSet models;
    if (wants_dsa) models = load_models(a.models_dir);

    const auto reports = dsa::eval::run_experiment(ec, models);
    std::cout << "scenario: " << ec.scenario << "\n" << dsa::eval::report_table(reports);
    if (!ec.out_dir.empty()) std::cout << "report written to " << ec.out_dir << "/report.csv\n";
}

void cmd_report(const std::string& in) {
    const std::string path = fs::is_directory(in) ? in + "/report.csv" : in;
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open " + path + "; run experiment first");
    std::string line;
    std::getline(is, line);
    std::vector<dsa::eval::Report> reports;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string tok;
        std::vector<std::string> cols;
        while (std::getline(ss, tok, ',')) cols.push_back(tok);
        if (cols.size() != 10) throw std::runtime_error("malformed report row: " + line);
        dsa::eval::Report r;
        r.method = cols[0];
        r.param_name = cols[1];
        r.param_boxes = std::stod(cols[2]);
        r.param_labels = std::stod(cols[3]);
        r.acc_boxes = std::stod(cols[4]);
        r.se_boxes = std::stod(cols[5]);
        r.acc_labels = std::stod(cols[6]);
        r.se_labels = std::stod(cols[7]);
        r.n = static_cast<std::size_t>(std::stoull(cols[8]));
        r.cache_mode = cols[9];
        reports.push_back(std::move(r));
    }
    std::cout << dsa::eval::report_table(reports);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Greedy detection selection by generative reconstruction"};
    app.require_subcommand(1);

    std::string config_path;
    app.add_option("--config", config_path, "key=value configuration file")
        ->expected(1);

    std::uint64_t seed_flag = 0;
    double scale_flag = 1.0;
    int jobs_flag = 1;

    const auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "key=value configuration file");
        sub->add_option("--seed", seed_flag, "master seed (fallback: DSA_SEED)");
        sub->add_option("--scale", scale_flag, "dataset size multiplier");
        sub->add_option("--jobs", jobs_flag, "scene-level worker bound")
            ->check(CLI::PositiveNumber);
    };
    const auto finish_common = [&](CLI::App* sub, RunConfig& rc) {
        if (sub->count("--seed")) rc.seed = seed_flag;
        if (sub->count("--scale")) rc.scale = scale_flag;
        if (sub->count("--jobs")) rc.jobs = jobs_flag;
    };

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "generate datasets");
    std::string gen_out;
    int gen_npc = -1;
    gen->add_option("--out", gen_out, "output directory")->required();
    gen->add_option("--n-per-class", gen_npc, "pair appearances per class before scaling")
        ->check(CLI::PositiveNumber);
    add_common(gen);
    gen->callback([&]() {
        RunConfig rc = base_config(config_path);
        finish_common(gen, rc);
        if (gen->count("--n-per-class")) rc.n_per_class = gen_npc;
        cmd_gen_data(rc, gen_out);
    });

    // train-decoder
    auto* train = app.add_subcommand("train-decoder", "train per-class decoders");
    std::string train_data, train_out;
    std::vector<int> train_classes;
    int ep_flag = 0, batch_flag = 0, ls_flag = 0;
    double lrd_flag = 0, lrl_flag = 0, sigma_flag = 0;
    train->add_option("--data", train_data, "gen-data output directory")->required();
    train->add_option("--out", train_out, "model output directory")->required();
    train->add_option("--classes", train_classes, "class subset (default: all)")
        ->check(CLI::Range(1, 10));
    train->add_option("--epochs", ep_flag, "training epochs")->check(CLI::PositiveNumber);
    train->add_option("--batch", batch_flag, "batch size")->check(CLI::PositiveNumber);
    train->add_option("--latent-steps", ls_flag, "latent updates per decoder step")
        ->check(CLI::PositiveNumber);
    train->add_option("--lr-decoder", lrd_flag, "decoder learning rate")
        ->check(CLI::PositiveNumber);
    train->add_option("--lr-latent", lrl_flag, "latent learning rate")
        ->check(CLI::PositiveNumber);
    train->add_option("--sigma", sigma_flag, "observation noise")->check(CLI::PositiveNumber);
    add_common(train);
    train->callback([&]() {
        RunConfig rc = base_config(config_path);
        finish_common(train, rc);
        if (train->count("--epochs")) rc.epochs = ep_flag;
        if (train->count("--batch")) rc.batch = batch_flag;
        if (train->count("--latent-steps")) rc.latent_steps = ls_flag;
        if (train->count("--lr-decoder")) rc.lr_decoder = lrd_flag;
        if (train->count("--lr-latent")) rc.lr_latent_train = lrl_flag;
        if (train->count("--sigma")) rc.sigma = sigma_flag;
        std::vector<int> classes = train_classes;
        if (classes.empty())
            for (int c = 1; c <= dsa::scenegen::num_classes(); ++c) classes.push_back(c);
        cmd_train_decoder(rc, train_data, train_out, classes);
    });

    // simulate
    auto* sim = app.add_subcommand("simulate", "run the detection simulator");
    std::string sim_data, sim_split = "val", sim_profile = "baseline", sim_out;
    sim->add_option("--data", sim_data, "gen-data output directory")->required();
    sim->add_option("--split", sim_split, "scene split")
        ->check(CLI::IsMember({"val", "test"}));
    sim->add_option("--profile", sim_profile, "noise profile")
        ->check(CLI::IsMember({"baseline", "score_shift", "label_shift"}));
    sim->add_option("--out", sim_out, "detections JSONL path")->required();
    add_common(sim);
    sim->callback([&]() {
        RunConfig rc = base_config(config_path);
        finish_common(sim, rc);
        cmd_simulate(rc, sim_data, sim_split, sim_profile, sim_out);
    });

    // postprocess
    auto* post = app.add_subcommand("postprocess", "apply a selection method to detections");
    PostprocessArgs pa;
    double nt_flag = 0.5, lambda_flag = 0, minobj_flag = 0;
    int niter_flag = 0;
    post->add_option("--detections", pa.detections, "detections JSONL")->required();
    post->add_option("--method", pa.method, "selection method")
        ->required()
        ->check(CLI::IsMember({"nms", "soft-nms", "diou-nms", "nms+dsa", "soft-nms+dsa"}));
    post->add_option("--data", pa.data, "gen-data directory (DSA methods)");
    post->add_option("--split", pa.split, "scene split")->check(CLI::IsMember({"val", "test"}));
    post->add_option("--models", pa.models_dir, "decoder model directory (DSA methods)");
    post->add_option("--out", pa.out, "output directory")->required();
    post->add_option("--nt", nt_flag, "suppression overlap threshold");
    post->add_option("--T", pa.t, "final score threshold (baselines)");
    post->add_option("--lambda", lambda_flag, "per-box penalty");
    post->add_option("--n-iter", niter_flag, "latent steps per reconstruction")
        ->check(CLI::PositiveNumber);
    post->add_option("--min-objectness", minobj_flag, "DSA score pre-filter");
    post->add_option("--competition", pa.competition, "label competition pair src:dst");
    post->add_flag("--invalidate-cache", pa.invalidate_cache,
                   "recompute reconstructions for every subset evaluation");
    post->add_flag("--rotation", pa.rotation, "optimize a rotation angle per reconstruction");
    post->add_option("--dump-dir", pa.dump_dir, "write canvases, recons and loss traces here");
    add_common(post);
    post->callback([&]() {
        RunConfig rc = base_config(config_path);
        finish_common(post, rc);
        if (post->count("--nt")) rc.nms_nt = nt_flag;
        if (post->count("--lambda")) rc.lambda = lambda_flag;
        if (post->count("--n-iter")) rc.n_iter = niter_flag;
        if (post->count("--min-objectness")) rc.min_objectness = minobj_flag;
        const bool is_dsa = pa.method.size() > 4 && pa.method.ends_with("+dsa");
        if (is_dsa && pa.models_dir.empty())
            throw CLI::ValidationError("--models is required for DSA methods");
        if (is_dsa && pa.data.empty())
            throw CLI::ValidationError("--data is required for DSA methods");
        cmd_postprocess(rc, pa);
    });

    // experiment
    auto* exp = app.add_subcommand("experiment", "run a full evaluation scenario");
    ExperimentArgs ea;
    double rot_flag = 10.0, nmsnt_flag = 0.5, elambda_flag = 0;
    int enlarge_flag = 180, eniter_flag = 0;
    exp->add_option("--scenario", ea.scenario, "evaluation scenario")
        ->check(CLI::IsMember({"baseline", "fixed05", "score-shift", "rotate10", "enlarge"}));
    exp->add_option("--models", ea.models_dir, "decoder model directory");
    exp->add_option("--out", ea.out, "report/log directory");
    exp->add_option("--methods", ea.methods_csv, "comma-separated method list");
    exp->add_option("--lambda", elambda_flag, "pinned per-box penalty");
    exp->add_option("--n-iter", eniter_flag, "latent steps per reconstruction")
        ->check(CLI::PositiveNumber);
    exp->add_option("--rotate-degrees", rot_flag, "rotation shift for rotate10");
    exp->add_option("--enlarge-side", enlarge_flag, "crop side for enlarge")
        ->check(CLI::PositiveNumber);
    exp->add_option("--nms-nt", nmsnt_flag, "NMS overlap threshold");
    exp->add_flag("--tune-lambda", ea.tune_lambda, "grid-search lambda on validation");
    exp->add_flag("--no-competition", ea.no_competition, "disable label competition");
    exp->add_flag("--invalidate-cache", ea.invalidate_cache,
                  "recompute reconstructions for every subset evaluation");
    add_common(exp);
    exp->callback([&]() {
        RunConfig rc = base_config(config_path);
        finish_common(exp, rc);
        if (exp->count("--lambda")) rc.lambda = elambda_flag;
        if (exp->count("--n-iter")) rc.n_iter = eniter_flag;
        if (exp->count("--rotate-degrees")) rc.rotate_degrees = rot_flag;
        if (exp->count("--enlarge-side")) rc.enlarge_side = enlarge_flag;
        if (exp->count("--nms-nt")) rc.nms_nt = nmsnt_flag;
        cmd_experiment(rc, ea);
    });

    // report
    auto* rep = app.add_subcommand("report", "pretty-print a report CSV");
    std::string rep_in;
    rep->add_option("--in", rep_in, "report directory or CSV path")->required();
    rep->callback([&]() { cmd_report(rep_in); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
