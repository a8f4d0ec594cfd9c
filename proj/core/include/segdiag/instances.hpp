#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "segdiag/image.hpp"
#include "segdiag/taxonomy.hpp"

namespace segdiag {

inline constexpr int kNumBins = 5;

/// Size categories by instance pixel count (percentile bins).
enum class SizeBin { XS, S, M, L, XL };
/// Aspect-ratio categories ordered by increasing width/height.
enum class AspectBin { XT, T, M, W, XW };

const char* to_string(SizeBin b);
const char* to_string(AspectBin b);

/// Tight axis-aligned bounding box, inclusive coordinates.
struct BBox {
    int row_min = 0;
    int col_min = 0;
    int row_max = 0;
    int col_max = 0;

    int height() const { return row_max - row_min + 1; }
    int width() const { return col_max - col_min + 1; }

    friend bool operator==(const BBox&, const BBox&) = default;
};

/// One annotated object instance. Bins stay unassigned until a BinScheme has
/// been fitted over the whole split.
struct InstanceRecord {
    std::uint32_t instance_id = 0;
    ClassId class_id = 0;
    std::uint64_t pixel_count = 0;
    BBox bbox;
    double aspect_ratio = 0.0;  // bbox width / bbox height
    std::optional<SizeBin> size_bin;
    std::optional<AspectBin> aspect_bin;
    std::string image_id;
};

using InstanceClassOverrides = std::unordered_map<std::uint32_t, ClassId>;

/// One record per nonzero instance id, ordered by id. The class is the
/// majority ground-truth label over the instance pixels (ignore pixels do
/// not vote, ties go to the smaller class id) unless `overrides` supplies an
/// explicit id -> class mapping. An instance whose pixels are all ignore is
/// an error unless an override names its class.
std::vector<InstanceRecord> extract_instances(const InstanceMap& inst, const LabelMap& gt,
                                              const Taxonomy& t, std::string image_id = {},
                                              const InstanceClassOverrides* overrides = nullptr);

}  // namespace segdiag
