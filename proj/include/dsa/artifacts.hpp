#pragma once

#include <string>
#include <vector>

#include "dsa/geometry.hpp"
#include "dsa/scenegen.hpp"

namespace dsa::artifacts {

/// Scene recipes as JSON lines; read restores them in file order.
void write_scene_records(const std::string& path,
                         const std::vector<scenegen::SceneRecord>& recs);
std::vector<scenegen::SceneRecord> read_scene_records(const std::string& path);

/// Per-scene detection lists as JSON lines keyed by scene index.
void write_detections(const std::string& path,
                      const std::vector<std::vector<Detection>>& per_scene);
std::vector<std::vector<Detection>> read_detections(const std::string& path);

} // namespace dsa::artifacts
