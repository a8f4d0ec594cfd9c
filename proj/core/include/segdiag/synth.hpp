#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "segdiag/image.hpp"
#include "segdiag/scores.hpp"
#include "segdiag/taxonomy.hpp"

namespace segdiag::synth {

enum class ShapeKind { rectangle, ellipse };

/// One painted object. The rectangle (or the ellipse's bounding box) starts
/// at (row, col) and spans height x width pixels; it must stay in bounds and
/// not touch any other instance.
struct SceneInstance {
    ClassId class_id = 0;
    ShapeKind shape = ShapeKind::rectangle;
    int row = 0;
    int col = 0;
    int height = 0;
    int width = 0;
};

enum class ErrorKind { shift, group_swap, background_swallow, dissimilar_swap };

/// An injected defect on one instance (1-based id, the paint order).
/// shift translates the instance's predicted mask by (dy, dx); the other
/// kinds relabel the whole instance (group partner, background, or a class
/// from a different group).
struct InjectedError {
    ErrorKind kind = ErrorKind::background_swallow;
    std::uint32_t instance = 0;
    int dx = 0;
    int dy = 0;
};

/// correct pixels: p[gt] = confidence, rest uniform.
/// error pixels: p[pred] = (confidence+gap)/2, p[gt] = (confidence-gap)/2,
/// rest uniform (two classes: p[pred] = (1+gap)/2, p[gt] = (1-gap)/2).
/// gap = 0 produces an exact top-2 tie; such scores cannot be written to a
/// manifest because argmax would not reproduce the prediction map.
struct ScoreModel {
    double confidence = 0.8;
    double gap = 0.2;
};

struct SceneSpec {
    int height = 0;
    int width = 0;
    int num_classes = 0;           // class ids 0 .. num_classes-1
    ClassId background_id = 0;
    std::vector<std::pair<std::string, std::vector<ClassId>>> groups;
    std::vector<SceneInstance> instances;
    std::vector<InjectedError> errors;
    ScoreModel score_model;
    std::vector<int> radii{1, 2, 3, 5, 10};  // mislocalisation radii to tabulate
    std::uint64_t seed = 0;
};

std::string scene_spec_to_json(const SceneSpec& spec);
SceneSpec scene_spec_from_json_text(const std::string& text);
/// The file may hold one spec object or an array of them.
std::vector<SceneSpec> load_scene_specs(const std::filesystem::path& path);

/// Everything the full pipeline must reproduce on this scene, computed with
/// plain per-pixel loops.
struct ExpectedFragment {
    std::vector<std::uint64_t> confusion;  // num_classes x num_classes, row-major by class id
    std::vector<std::uint64_t> gt_pixels;
    std::vector<std::optional<double>> accuracy;
    std::vector<std::optional<double>> iou;
    double total_pixel_accuracy = 0.0;
    std::uint64_t error_pixels = 0;
    // Per class: background / similar / dissimilar confusion counts.
    std::vector<std::array<std::uint64_t, 3>> error_counts;
    // radius -> per-class corrected accuracy (window-scan recount).
    std::map<int, std::vector<std::optional<double>>> corrected_accuracy;
    // Per shifted instance: smallest radius correcting every error pixel of
    // its class; equals the Chebyshev magnitude of the shift by design.
    std::map<std::uint32_t, int> full_correction_radius;
    // Per-pixel uncertainty implied by the score model.
    double relative_entropy_correct = 0.0;
    std::optional<double> relative_entropy_error;
    double relative_probability_correct = 0.0;
    std::optional<double> relative_probability_error;
};

struct Scene {
    Taxonomy taxonomy;
    LabelMap gt;
    InstanceMap instances;
    LabelMap pred;
    ScoreTensor scores;
    ExpectedFragment expected;
};

/// Deterministic: a spec always yields the identical scene.
Scene generate(const SceneSpec& spec);

/// Fixed class palette (seed-independent) over the GT map.
RgbImage render_rgb(const LabelMap& gt);

/// Writes <name>.gt.png, <name>.inst.png, <name>.scores.scr1 and
/// <name>.image.png into dir. Fails when argmax(scores) would not reproduce
/// the prediction map (gap = 0).
void write_scene(const std::filesystem::path& dir, const std::string& name, const Scene& scene);

/// Generates every spec, writes the scenes plus taxonomy.json and
/// manifest.json, and returns the manifest path. Specs must agree on class
/// count, background and groups.
std::filesystem::path write_synth_dataset(const std::filesystem::path& dir,
                                          std::span<const SceneSpec> specs);

}  // namespace segdiag::synth
