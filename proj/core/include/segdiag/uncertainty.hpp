#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "segdiag/image.hpp"
#include "segdiag/instances.hpp"
#include "segdiag/scores.hpp"
#include "segdiag/taxonomy.hpp"

namespace segdiag {

enum class UncertaintyMeasure { relative_entropy, relative_probability };

const char* to_string(UncertaintyMeasure m);
UncertaintyMeasure uncertainty_measure_from_string(const std::string& name);

/// Eq.-1 measures, both in [0,1]. p must be non-negative and normalized (sum
/// within 1e-5 of 1) with at least two classes; natural log, 0*log 0 := 0.
double relative_entropy(std::span<const float> p);
double relative_entropy(std::span<const double> p);
double relative_probability(std::span<const float> p);
double relative_probability(std::span<const double> p);

struct UncertaintyMap {
    UncertaintyMeasure measure = UncertaintyMeasure::relative_entropy;
    Image<float> values;
};

UncertaintyMap uncertainty_map(const ScoreTensor& scores, UncertaintyMeasure measure);

enum class BoundaryMode { any_class, same_class };

/// Euclidean distance (pixels) to the nearest GT boundary pixel. A boundary
/// pixel has at least one 4-neighbor with a different label; the ignore label
/// acts as a label of its own; the image border is not a boundary. With no
/// boundary at all every entry is +infinity. In same_class mode each pixel
/// measures distance to boundary pixels carrying its own GT label.
using DistanceMap = Image<double>;

DistanceMap boundary_distance_map(const LabelMap& gt,
                                  BoundaryMode mode = BoundaryMode::any_class);

struct Quartiles {
    double q25 = 0.0;
    double median = 0.0;
    double q75 = 0.0;
};

/// Linear interpolation between order statistics at h = (n-1)q.
Quartiles quartiles(std::vector<float> values);

/// Raw uncertainty samples per distance bin; bin k covers [edges[k],
/// edges[k+1]). Pixels below edges[0] or at +infinity fall outside every bin.
/// Mergeable across images (quartiles are order-independent after sorting).
struct DistanceBinnedSamples {
    std::vector<double> edges;
    std::vector<std::vector<float>> samples;  // edges.size() - 1 bins

    DistanceBinnedSamples& operator+=(const DistanceBinnedSamples& other);
};

DistanceBinnedSamples collect_by_distance(const UncertaintyMap& umap, const DistanceMap& dmap,
                                          std::span<const double> edges);

/// Per-bin box-plot statistics; empty bins yield absent entries.
std::vector<std::optional<Quartiles>> uncertainty_by_distance(const DistanceBinnedSamples& s);

/// Mean uncertainty over the instance's pixels (all pixels of the mask).
double per_instance_mean_uncertainty(const InstanceRecord& rec, const InstanceMap& inst,
                                     const UncertaintyMap& umap);

struct MeanAccumulator {
    double sum = 0.0;
    std::uint64_t count = 0;

    void add(double v) {
        sum += v;
        ++count;
    }
    std::optional<double> mean() const {
        if (count == 0) return std::nullopt;
        return sum / static_cast<double>(count);
    }
    MeanAccumulator& operator+=(const MeanAccumulator& other) {
        sum += other.sum;
        count += other.count;
        return *this;
    }
};

/// Mean uncertainty per error category (mislocalisation judged at a fixed
/// radius, independently of the confusion kinds) plus the instance-pixel
/// baseline. Without an instance map the baseline covers all non-ignore GT
/// pixels instead.
struct ErrorTypeUncertainty {
    MeanAccumulator baseline;
    MeanAccumulator misloc;
    MeanAccumulator background;
    MeanAccumulator similar;
    MeanAccumulator dissimilar;

    ErrorTypeUncertainty& operator+=(const ErrorTypeUncertainty& other);
};

ErrorTypeUncertainty uncertainty_by_error_type(const LabelMap& gt, const LabelMap& pred,
                                               const UncertaintyMap& umap, const Taxonomy& t,
                                               int misloc_radius,
                                               const InstanceMap* inst = nullptr);

struct FgbgCounts {
    std::uint64_t tp = 0;
    std::uint64_t fp = 0;
    std::uint64_t tn = 0;
    std::uint64_t fn = 0;

    FgbgCounts& operator+=(const FgbgCounts& other);
};

struct FgbgResult {
    double precision = 0.0;
    double recall = 0.0;
    double accuracy = 0.0;
};

/// Predicted foreground = uncertainty strictly above the per-image mean
/// (taken over all pixels); GT foreground = non-background, non-ignore.
/// Counted over non-ignore pixels. Throws when the GT is all ignore.
FgbgCounts fgbg_counts(const UncertaintyMap& umap, const LabelMap& gt, const Taxonomy& t);

/// Ratios from merged counts; zero denominators yield 0.
FgbgResult fgbg_result(const FgbgCounts& counts);

FgbgResult fgbg_from_uncertainty(const UncertaintyMap& umap, const LabelMap& gt,
                                 const Taxonomy& t);

}  // namespace segdiag
