#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "segdiag/image.hpp"
#include "segdiag/instances.hpp"
#include "segdiag/metrics.hpp"
#include "segdiag/scores.hpp"
#include "segdiag/taxonomy.hpp"

namespace segdiag {

/// External scorer invocation: the command runs through the shell with
/// {input} replaced by a PNG crop path and {output} by the SCR1 path the
/// scorer must produce. Exit code 0 means success.
struct ScorerSpec {
    std::string command;
    double timeout_seconds = 60.0;
};

enum class RefineMode { max_activation, gt_bbox };

struct RefineConfig {
    std::vector<ClassId> target_classes;
    int crop_side = 64;
    double upsample_factor = 4.0;
    RefineMode mode = RefineMode::max_activation;
    int bbox_margin = 16;
    ScorerSpec scorer;
};

/// Inclusive pixel rectangle.
struct CropRect {
    int row0 = 0;
    int col0 = 0;
    int row1 = 0;
    int col1 = 0;

    int height() const { return row1 - row0 + 1; }
    int width() const { return col1 - col0 + 1; }
    bool contains(int r, int c) const {
        return r >= row0 && r <= row1 && c >= col0 && c <= col1;
    }
    friend bool operator==(const CropRect&, const CropRect&) = default;
};

/// Images whose target class has exactly one instance, with that instance in
/// the XS or S size bin. Records must carry bins. Results are ordered by
/// (image order given, class id).
struct RefineSelection {
    std::string image_id;
    InstanceRecord instance;
};

std::vector<RefineSelection> select_single_small(
    std::span<const std::pair<std::string, std::vector<InstanceRecord>>> per_image,
    std::span<const ClassId> target_classes);

/// side x side rectangle centered on the argmax of the class's score channel
/// (ties resolved to the smallest row, then column), clamped into bounds.
CropRect crop_around_max_activation(const ScoreTensor& scores, ClassId class_id, int side,
                                    const Taxonomy& t);

/// Instance bbox expanded by margin on every side, clamped into bounds.
CropRect gt_bbox_crop(const InstanceRecord& rec, int margin, int height, int width);

struct RefineResult {
    ScoreTensor scores;  // spliced, normalized inside the crop
    LabelMap labels;     // argmax of the spliced tensor
    CropRect crop;
};

/// Crops the RGB image, upsamples it by cfg.upsample_factor (bicubic), hands
/// it to the scorer, downsamples the returned tensor back to crop size,
/// renormalizes and splices it over the original scores. Pixels outside the
/// crop keep bit-identical scores.
RefineResult refine_image(const RgbImage& image, const ScoreTensor& scores, const CropRect& crop,
                          const RefineConfig& cfg, const Taxonomy& t);

/// One selected instance evaluated before and after refinement.
struct RefineCase {
    std::string image_id;
    ClassId class_id = 0;
    std::uint32_t instance_id = 0;
    SizeBin size_bin = SizeBin::XS;
    double accuracy_before = 0.0;
    double accuracy_after = 0.0;
};

/// Per-class rows over the selected images: instance accuracy split by XS/S
/// plus IoU and accuracy over the selection.
struct RefineClassRow {
    ClassId class_id = 0;
    std::size_t count_xs = 0;
    std::size_t count_s = 0;
    std::optional<double> acc_xs_before, acc_xs_after;
    std::optional<double> acc_s_before, acc_s_after;
    std::optional<double> iou_before, iou_after;
    std::optional<double> acc_before, acc_after;
};

struct RefineEvaluation {
    std::vector<RefineCase> cases;
    std::vector<RefineClassRow> rows;
};

/// Aggregates per-case accuracies and recomputes class IoU/accuracy from
/// confusion matrices restricted to the selected images.
RefineEvaluation evaluate_refinement(std::span<const RefineCase> cases,
                                     const ConfusionMatrix& before, const ConfusionMatrix& after,
                                     const Taxonomy& t);

}  // namespace segdiag
