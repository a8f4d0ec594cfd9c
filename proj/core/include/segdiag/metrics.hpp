#pragma once

#include <optional>
#include <vector>

#include "segdiag/confusion.hpp"
#include "segdiag/instances.hpp"
#include "segdiag/scores.hpp"
#include "segdiag/taxonomy.hpp"

namespace segdiag {

/// Per-class values are indexed by dense taxonomy index and absent when the
/// class does not occur (accuracy: no GT pixels; IoU: no GT and no predicted
/// pixels). Means are unweighted over the defined entries.
struct ClassMetrics {
    std::vector<std::optional<double>> accuracy;  // s_ii / g_i
    std::vector<std::optional<double>> iou;       // s_ii / (g_i + p_i - s_ii)
    double total_pixel_accuracy = 0.0;            // sum s_ii / sum g_i
    double mean_class_accuracy = 0.0;
    double mean_iou = 0.0;
};

ClassMetrics class_metrics(const ConfusionMatrix& cm);

/// Fraction of the instance's non-ignore pixels predicted as rec.class_id.
/// Throws if the instance has no non-ignore pixels.
double per_instance_accuracy(const InstanceRecord& rec, const InstanceMap& inst,
                             const LabelMap& gt, const LabelMap& pred, const Taxonomy& t);

/// Effective top-n prediction map: a pixel keeps the GT label when the GT
/// class probability is among the n largest at that pixel (a value tied with
/// the n-th largest qualifies), and falls back to the argmax label otherwise.
LabelMap topn_prediction(const LabelMap& gt, const ScoreTensor& scores, int n,
                         const Taxonomy& t);

ClassMetrics topn_metrics(const LabelMap& gt, const ScoreTensor& scores, int n,
                          const Taxonomy& t, const ConfusionOptions& opts = {});

/// Group-merged evaluation. Each class id maps to its group representative
/// (the smallest member id; ungrouped classes map to themselves); the
/// confusion matrix is re-accumulated under that relabeling.
struct MergedGroupMetrics {
    std::vector<ClassId> representative;           // dense index -> representative class id
    ConfusionMatrix merged;                        // mass moved onto representatives
    ClassMetrics merged_metrics;                   // defined on representative classes only
    std::vector<std::optional<double>> merged_accuracy;  // per original class, on its own GT pixels
    std::vector<std::optional<double>> accuracy_gain;    // merged_accuracy - original accuracy
};

MergedGroupMetrics merged_group_metrics(const ConfusionMatrix& cm, const Taxonomy& t);

}  // namespace segdiag
