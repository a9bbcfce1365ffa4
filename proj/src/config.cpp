#include "dsa/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace dsa::config {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw std::invalid_argument("config: bad boolean for " + key + ": " + v);
}

double parse_real(const std::string& key, const std::string& v) {
    std::size_t pos = 0;
    double out;
    try {
        out = std::stod(v, &pos);
    } catch (const std::exception&) {
        throw std::invalid_argument("config: bad number for " + key + ": " + v);
    }
    if (pos != v.size()) throw std::invalid_argument("config: bad number for " + key + ": " + v);
    return out;
}

long long parse_int(const std::string& key, const std::string& v) {
    std::size_t pos = 0;
    long long out;
    try {
        out = std::stoll(v, &pos);
    } catch (const std::exception&) {
        throw std::invalid_argument("config: bad integer for " + key + ": " + v);
    }
    if (pos != v.size())
        throw std::invalid_argument("config: bad integer for " + key + ": " + v);
    return out;
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
    if (!v.empty() && v[0] == '-')
        throw std::invalid_argument("config: bad seed for " + key + ": " + v);
    std::size_t pos = 0;
    unsigned long long out;
    try {
        out = std::stoull(v, &pos);
    } catch (const std::exception&) {
        throw std::invalid_argument("config: bad seed for " + key + ": " + v);
    }
    if (pos != v.size()) throw std::invalid_argument("config: bad seed for " + key + ": " + v);
    return out;
}

} // namespace

void apply_kv(RunConfig& cfg, const std::string& key, const std::string& value) {
    if (key == "seed") cfg.seed = parse_u64(key, value);
    else if (key == "scale") cfg.scale = parse_real(key, value);
    else if (key == "n_per_class") cfg.n_per_class = static_cast<int>(parse_int(key, value));
    else if (key == "epochs") cfg.epochs = static_cast<int>(parse_int(key, value));
    else if (key == "batch") cfg.batch = static_cast<int>(parse_int(key, value));
    else if (key == "latent_steps") cfg.latent_steps = static_cast<int>(parse_int(key, value));
    else if (key == "lr_decoder") cfg.lr_decoder = parse_real(key, value);
    else if (key == "lr_latent_train") cfg.lr_latent_train = parse_real(key, value);
    else if (key == "n_iter") cfg.n_iter = static_cast<int>(parse_int(key, value));
    else if (key == "sigma") cfg.sigma = parse_real(key, value);
    else if (key == "t0") cfg.t0 = parse_real(key, value);
    else if (key == "lr_latent") cfg.lr_latent = parse_real(key, value);
    else if (key == "lambda") cfg.lambda = parse_real(key, value);
    else if (key == "tune_lambda") cfg.tune_lambda = parse_bool(key, value);
    else if (key == "min_objectness") cfg.min_objectness = parse_real(key, value);
    else if (key == "nms_nt") cfg.nms_nt = parse_real(key, value);
    else if (key == "cache_mode") {
        if (value != "paper" && value != "invalidate")
            throw std::invalid_argument("config: cache_mode must be paper or invalidate");
        cfg.cache_mode = value;
    } else if (key == "enable_rotation") cfg.enable_rotation = parse_bool(key, value);
    else if (key == "competition") cfg.competition = parse_bool(key, value);
    else if (key == "scenario") cfg.scenario = value;
    else if (key == "noise_profile") cfg.noise_profile = value;
    else if (key == "rotate_degrees") cfg.rotate_degrees = parse_real(key, value);
    else if (key == "enlarge_side") cfg.enlarge_side = static_cast<int>(parse_int(key, value));
    else if (key == "jobs") cfg.jobs = static_cast<int>(parse_int(key, value));
    else if (key == "out_dir") cfg.out_dir = value;
    else throw std::invalid_argument("config: unknown key: " + key);
}

RunConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("config: cannot open " + path);
    RunConfig cfg;
    std::string line;
    int line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config: line " + std::to_string(line_no) +
                                        " is not key=value");
        apply_kv(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return cfg;
}

std::string dump_config(const RunConfig& c) {
    std::ostringstream os;
    os << "seed=" << c.seed << "\n"
       << "scale=" << c.scale << "\n"
       << "n_per_class=" << c.n_per_class << "\n"
       << "epochs=" << c.epochs << "\n"
       << "batch=" << c.batch << "\n"
       << "latent_steps=" << c.latent_steps << "\n"
       << "lr_decoder=" << c.lr_decoder << "\n"
       << "lr_latent_train=" << c.lr_latent_train << "\n"
       << "n_iter=" << c.n_iter << "\n"
       << "sigma=" << c.sigma << "\n"
       << "t0=" << c.t0 << "\n"
       << "lr_latent=" << c.lr_latent << "\n"
       << "lambda=" << c.lambda << "\n"
       << "tune_lambda=" << (c.tune_lambda ? "true" : "false") << "\n"
       << "min_objectness=" << c.min_objectness << "\n"
       << "nms_nt=" << c.nms_nt << "\n"
       << "cache_mode=" << c.cache_mode << "\n"
       << "enable_rotation=" << (c.enable_rotation ? "true" : "false") << "\n"
       << "competition=" << (c.competition ? "true" : "false") << "\n"
       << "scenario=" << c.scenario << "\n"
       << "noise_profile=" << c.noise_profile << "\n"
       << "rotate_degrees=" << c.rotate_degrees << "\n"
       << "enlarge_side=" << c.enlarge_side << "\n"
       << "jobs=" << c.jobs << "\n"
       << "out_dir=" << c.out_dir << "\n";
    return os.str();
}

} // namespace dsa::config
