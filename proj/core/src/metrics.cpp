#include "segdiag/metrics.hpp"

#include <algorithm>
#include <stdexcept>

namespace segdiag {

ClassMetrics class_metrics(const ConfusionMatrix& cm) {
    ClassMetrics m;
    std::size_t n = cm.num_classes();
    m.accuracy.resize(n);
    m.iou.resize(n);

    std::uint64_t diag_sum = 0;
    std::uint64_t gt_sum = 0;
    double acc_sum = 0.0;
    std::size_t acc_count = 0;
    double iou_sum = 0.0;
    std::size_t iou_count = 0;
    for (std::size_t i = 0; i < n; ++i) {
        std::uint64_t g = cm.gt_total(i);
        std::uint64_t p = cm.pred_total(i);
        std::uint64_t s = cm.at(i, i);
        diag_sum += s;
        gt_sum += g;
        if (g > 0) {
            double a = static_cast<double>(s) / static_cast<double>(g);
            m.accuracy[i] = a;
            acc_sum += a;
            ++acc_count;
        }
        if (g + p > 0) {
            double u = static_cast<double>(s) / static_cast<double>(g + p - s);
            m.iou[i] = u;
            iou_sum += u;
            ++iou_count;
        }
    }
    m.total_pixel_accuracy =
        gt_sum > 0 ? static_cast<double>(diag_sum) / static_cast<double>(gt_sum) : 0.0;
    m.mean_class_accuracy = acc_count > 0 ? acc_sum / acc_count : 0.0;
    m.mean_iou = iou_count > 0 ? iou_sum / iou_count : 0.0;
    return m;
}

double per_instance_accuracy(const InstanceRecord& rec, const InstanceMap& inst,
                             const LabelMap& gt, const LabelMap& pred, const Taxonomy& t) {
    if (inst.height() != gt.height() || inst.width() != gt.width() || !gt.same_shape(pred)) {
        throw std::invalid_argument("per_instance_accuracy: shape mismatch");
    }
    std::uint64_t considered = 0;
    std::uint64_t correct = 0;
    for (int r = 0; r < inst.height(); ++r) {
        for (int c = 0; c < inst.width(); ++c) {
            if (inst.at(r, c) != rec.instance_id) continue;
            if (gt.at(r, c) == t.ignore_id()) continue;
            ++considered;
            if (pred.at(r, c) == rec.class_id) ++correct;
        }
    }
    if (considered == 0) {
        throw std::runtime_error("per_instance_accuracy: instance has no non-ignore pixels");
    }
    return static_cast<double>(correct) / static_cast<double>(considered);
}

LabelMap topn_prediction(const LabelMap& gt, const ScoreTensor& scores, int n,
                         const Taxonomy& t) {
    if (gt.height() != scores.height() || gt.width() != scores.width()) {
        throw std::invalid_argument("topn_prediction: shape mismatch");
    }
    if (n < 1 || static_cast<std::size_t>(n) > t.num_classes()) {
        throw std::invalid_argument("topn_prediction: n out of range");
    }
    LabelMap out(gt.height(), gt.width());
    for (int r = 0; r < gt.height(); ++r) {
        for (int c = 0; c < gt.width(); ++c) {
            auto px = scores.pixel(r, c);
            ClassId label = gt.at(r, c);
            int argmax =
                static_cast<int>(std::max_element(px.begin(), px.end()) - px.begin());
            if (label != t.ignore_id() && t.is_class(label)) {
                float p_gt = px[t.index_of(label)];
                // gt is within the top n iff fewer than n values beat it.
                int strictly_greater = 0;
                for (float v : px) {
                    if (v > p_gt) ++strictly_greater;
                }
                if (strictly_greater < n) {
                    out.at(r, c) = label;
                    continue;
                }
            }
            out.at(r, c) = t.id_at(argmax);
        }
    }
    return out;
}

ClassMetrics topn_metrics(const LabelMap& gt, const ScoreTensor& scores, int n,
                          const Taxonomy& t, const ConfusionOptions& opts) {
    LabelMap effective = topn_prediction(gt, scores, n, t);
    return class_metrics(accumulate_confusion(gt, effective, t, opts));
}

MergedGroupMetrics merged_group_metrics(const ConfusionMatrix& cm, const Taxonomy& t) {
    std::size_t n = t.num_classes();
    if (cm.num_classes() != n) {
        throw std::invalid_argument("merged_group_metrics: matrix does not match the taxonomy");
    }
    MergedGroupMetrics out;
    out.representative.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        ClassId id = t.id_at(i);
        ClassId rep = id;
        if (auto g = t.group_of(id)) {
            const auto& members = t.groups()[*g].members;
            rep = *std::min_element(members.begin(), members.end());
        }
        out.representative[i] = rep;
    }

    out.merged = ConfusionMatrix(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t ri = t.index_of(out.representative[i]);
        for (std::size_t j = 0; j < n; ++j) {
            std::size_t rj = t.index_of(out.representative[j]);
            out.merged.at(ri, rj) += cm.at(i, j);
        }
    }
    out.merged_metrics = class_metrics(out.merged);

    ClassMetrics original = class_metrics(cm);
    out.merged_accuracy.resize(n);
    out.accuracy_gain.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::uint64_t g = cm.gt_total(i);
        if (g == 0) continue;
        std::uint64_t correct = 0;
        for (std::size_t j = 0; j < n; ++j) {
            if (out.representative[j] == out.representative[i]) correct += cm.at(i, j);
        }
        double merged_acc = static_cast<double>(correct) / static_cast<double>(g);
        out.merged_accuracy[i] = merged_acc;
        out.accuracy_gain[i] = merged_acc - *original.accuracy[i];
    }
    return out;
}

}  // namespace segdiag
