#include "dsa/artifacts.hpp"

#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace dsa::artifacts {

using nlohmann::json;

void write_scene_records(const std::string& path,
                         const std::vector<scenegen::SceneRecord>& recs) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path);
    for (std::size_t i = 0; i < recs.size(); ++i) {
        const auto& r = recs[i];
        json objs = json::array();
        for (const auto& o : r.objects)
            objs.push_back({o.cls, o.center_x, o.center_y, o.scale, o.rotation, o.depth_rank});
        json j{{"id", i},
               {"objects", objs},
               {"color", {r.color.r, r.color.g, r.color.b}}};
        if (r.enlarge_side > 0) j["enlarge"] = {r.enlarge_x0, r.enlarge_y0, r.enlarge_side};
        os << j.dump() << "\n";
    }
}

std::vector<scenegen::SceneRecord> read_scene_records(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open " + path);
    std::vector<scenegen::SceneRecord> out;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const json j = json::parse(line);
        scenegen::SceneRecord r;
        for (const auto& o : j.at("objects")) {
            scenegen::ObjectSpec s;
            s.cls = o.at(0).get<int>();
            s.center_x = o.at(1).get<double>();
            s.center_y = o.at(2).get<double>();
            s.scale = o.at(3).get<double>();
            s.rotation = o.at(4).get<double>();
            s.depth_rank = o.at(5).get<int>();
            r.objects.push_back(s);
        }
        const auto& c = j.at("color");
        r.color = {c.at(0).get<double>(), c.at(1).get<double>(), c.at(2).get<double>()};
        if (j.contains("enlarge")) {
            const auto& e = j.at("enlarge");
            r.enlarge_x0 = e.at(0).get<int>();
            r.enlarge_y0 = e.at(1).get<int>();
            r.enlarge_side = e.at(2).get<int>();
        }
        out.push_back(std::move(r));
    }
    return out;
}

void write_detections(const std::string& path,
                      const std::vector<std::vector<Detection>>& per_scene) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path);
    for (std::size_t i = 0; i < per_scene.size(); ++i) {
        json dets = json::array();
        for (const auto& d : per_scene[i])
            dets.push_back(
                {d.score, d.box.x_min, d.box.y_min, d.box.x_max, d.box.y_max, d.occ, d.cls});
        os << json{{"scene", i}, {"dets", dets}}.dump() << "\n";
    }
}

std::vector<std::vector<Detection>> read_detections(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open " + path);
    std::vector<std::vector<Detection>> out;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const json j = json::parse(line);
        std::vector<Detection> dets;
        for (const auto& d : j.at("dets")) {
            Detection det;
            det.score = d.at(0).get<double>();
            det.box = {d.at(1).get<double>(), d.at(2).get<double>(), d.at(3).get<double>(),
                       d.at(4).get<double>()};
            det.occ = d.at(5).get<double>();
            det.cls = d.at(6).get<int>();
            dets.push_back(det);
        }
        const std::size_t id = j.at("scene").get<std::size_t>();
        if (out.size() <= id) out.resize(id + 1);
        out[id] = std::move(dets);
    }
    return out;
}

} // namespace dsa::artifacts
