#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "dsa/image.hpp"

namespace dsa::scenegen {

/// One object to render. Class catalog (1..10): disk, ellipse, annulus,
/// square, wide thin rectangle, tall thin rectangle, medium rectangle,
/// tall narrow rectangle, wide narrow rectangle, triangle.
struct ObjectSpec {
    int cls = 1;
    double center_x = 0.0;
    double center_y = 0.0;
    double scale = 1.0;
    double rotation = 0.0; ///< degrees in [0, 360)
    int depth_rank = 0;    ///< 0 = frontmost; distinct within a scene
};

struct Color {
    double r = 0.0;
    double g = 0.0;
    double b = 0.0;
};

struct GroundTruth {
    std::vector<ObjectSpec> objects; ///< ordered by depth_rank ascending
    Color color;
    std::vector<Mask> amodal_masks;
    std::vector<Mask> visible_masks;
    std::vector<BoundingBox> boxes; ///< tight box of each amodal mask
};

struct SceneConfig {
    int canvas_h = 200;
    int canvas_w = 200;
    int min_visible = 200;        ///< rejection floor on visible pixels
    double min_center_sep = 15.0; ///< 0.3 * d
    int max_attempts = 1000;      ///< rejection budget per scene
    int min_pair_overlap = 20;    ///< shared amodal pixels required in pairs
    double scale_lo = 0.8;
    double scale_hi = 1.25;
    int decoder_d = 50;
};

int num_classes();
bool rotation_invariant(int cls);

/// Half extents of the rotated footprint at unit scale, exact for the
/// polygonal classes and analytic for the curved ones.
void footprint_half_extents(int cls, double rotation_deg, double* hx, double* hy);

/// Rasterize objects front-to-back by depth_rank onto black. Shading is a
/// per-class radial falloff scaled by the scene color, so every object
/// pixel keeps a color magnitude well above the support threshold.
std::pair<Image, GroundTruth> render_scene(const std::vector<ObjectSpec>& specs,
                                           const Color& color, int canvas_h, int canvas_w);

/// Generative recipe for one scene; images and masks derive on demand so
/// datasets stay cheap to hold. enlarge_side > 0 marks a crop-and-upscale
/// post-transform (window upper-left at enlarge_x0/y0).
struct SceneRecord {
    std::vector<ObjectSpec> objects;
    Color color;
    int enlarge_x0 = 0;
    int enlarge_y0 = 0;
    int enlarge_side = 0;
};

std::pair<Image, GroundTruth> materialize(const SceneRecord& rec, const SceneConfig& cfg);

/// Paired occluded objects, class-balanced: each class appears n_per_class
/// times over 10 * n_per_class / 2 scenes.
std::vector<SceneRecord> gen_pairs_dataset(std::uint64_t seed, int n_per_class,
                                           const SceneConfig& cfg);

/// Per-class decoder training images: every object of the requested class
/// rendered alone, centered, its larger footprint dimension filling d.
std::vector<Image> decoder_class_images(const std::vector<SceneRecord>& pairs, int cls,
                                        const SceneConfig& cfg);

struct EvalSizes {
    int val3 = 250;
    int val4 = 250;
    int test5 = 150;
    int test6 = 150;
    int test7 = 200;
};

struct EvalSets {
    std::vector<SceneRecord> val;
    std::vector<SceneRecord> test;
};

EvalSets gen_eval_sets(std::uint64_t seed, const EvalSizes& sizes, const SceneConfig& cfg);

/// Same scenes with every object's rotation advanced by the given degrees
/// (mod 360). Rotation-invariant classes render identically.
std::vector<SceneRecord> perturb_rotate(const std::vector<SceneRecord>& recs, double degrees);

/// Crop a window of crop_side pixels containing all objects and bilinearly
/// upscale it back to the canvas size; ground-truth boxes scale by
/// canvas / crop_side. crop_side equal to the canvas is the identity.
std::vector<SceneRecord> perturb_enlarge(const std::vector<SceneRecord>& recs, int crop_side,
                                         const SceneConfig& cfg);

} // namespace dsa::scenegen
