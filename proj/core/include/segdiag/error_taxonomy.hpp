#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "segdiag/confusion.hpp"
#include "segdiag/image.hpp"
#include "segdiag/taxonomy.hpp"

namespace segdiag {

enum class ConfusionKind { background, similar, dissimilar };

const char* to_string(ConfusionKind kind);

/// Classifies one erroneous pixel. Preconditions: gt_label is a non-ignore,
/// non-background class; pred_label is a class; the labels differ.
ConfusionKind classify_confusion(ClassId gt_label, ClassId pred_label, const Taxonomy& t);

struct ErrorCounts {
    std::uint64_t background = 0;
    std::uint64_t similar = 0;
    std::uint64_t dissimilar = 0;

    std::uint64_t total() const { return background + similar + dissimilar; }
    friend bool operator==(const ErrorCounts&, const ErrorCounts&) = default;
};

/// Per-GT-class error tallies (dense taxonomy index). The three kinds
/// partition the counted error pixels. Background-GT pixels are never
/// counted: the taxonomy is defined per foreground class.
struct ErrorBreakdown {
    std::vector<ErrorCounts> per_class;

    ErrorBreakdown& operator+=(const ErrorBreakdown& other);
    friend bool operator==(const ErrorBreakdown&, const ErrorBreakdown&) = default;
};

struct ErrorBreakdownOptions {
    /// When set, error pixels that are mislocalisation-correctable at this
    /// radius are left out of the tallies.
    std::optional<int> exclude_correctable_radius;
};

ErrorBreakdown error_breakdown(const LabelMap& gt, const LabelMap& pred, const Taxonomy& t,
                               const ErrorBreakdownOptions& opts = {});

/// True iff pred_label occurs in gt within the (2r+1)x(2r+1) window centered
/// at (row, col), clipped to the image. Throws when (row, col) is out of
/// bounds or r is negative.
bool is_mislocalisation(const LabelMap& gt, int row, int col, ClassId pred_label, int r);

/// Confusion matrices with mislocalisation-correctable error pixels credited
/// to their GT class, one matrix per radius. Combines across images with
/// operator+= (radii must match).
struct MislocalisationGain {
    std::vector<int> radii;  // ascending, non-negative
    ConfusionMatrix baseline;
    std::vector<ConfusionMatrix> corrected;  // parallel to radii

    MislocalisationGain& operator+=(const MislocalisationGain& other);
};

MislocalisationGain mislocalisation_gain(const LabelMap& gt, const LabelMap& pred,
                                         const ConfusionMatrix& cm, const Taxonomy& t,
                                         std::span<const int> radii,
                                         const ConfusionOptions& opts = {});

}  // namespace segdiag
