#include "segdiag/error_taxonomy.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>
#include <unordered_map>

namespace segdiag {
namespace {

constexpr int kFar = std::numeric_limits<int>::max() / 2;

/// Exact L-inf (chessboard) distance to the nearest seed, two-pass chamfer.
Image<int> chessboard_distance(const Image<std::uint8_t>& seeds) {
    int h = seeds.height();
    int w = seeds.width();
    Image<int> d(h, w, kFar);
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            if (seeds.at(r, c)) {
                d.at(r, c) = 0;
                continue;
            }
            int best = kFar;
            if (r > 0) {
                best = std::min(best, d.at(r - 1, c) + 1);
                if (c > 0) best = std::min(best, d.at(r - 1, c - 1) + 1);
                if (c + 1 < w) best = std::min(best, d.at(r - 1, c + 1) + 1);
            }
            if (c > 0) best = std::min(best, d.at(r, c - 1) + 1);
            d.at(r, c) = best;
        }
    }
    for (int r = h - 1; r >= 0; --r) {
        for (int c = w - 1; c >= 0; --c) {
            int best = d.at(r, c);
            if (r + 1 < h) {
                best = std::min(best, d.at(r + 1, c) + 1);
                if (c > 0) best = std::min(best, d.at(r + 1, c - 1) + 1);
                if (c + 1 < w) best = std::min(best, d.at(r + 1, c + 1) + 1);
            }
            if (c + 1 < w) best = std::min(best, d.at(r, c + 1) + 1);
            d.at(r, c) = best;
        }
    }
    return d;
}

}  // namespace

const char* to_string(ConfusionKind kind) {
    switch (kind) {
        case ConfusionKind::background: return "background";
        case ConfusionKind::similar: return "similar";
        case ConfusionKind::dissimilar: return "dissimilar";
    }
    return "?";
}

ConfusionKind classify_confusion(ClassId gt_label, ClassId pred_label, const Taxonomy& t) {
    if (gt_label == pred_label) {
        throw std::invalid_argument("classify_confusion: pixel is not erroneous");
    }
    if (gt_label == t.ignore_id() || t.is_background(gt_label) || !t.is_class(gt_label)) {
        throw std::invalid_argument(
            "classify_confusion: gt label must be a non-background class");
    }
    if (!t.is_class(pred_label)) {
        throw std::invalid_argument("classify_confusion: pred label is not a class");
    }
    if (t.is_background(pred_label)) return ConfusionKind::background;
    if (t.same_group(gt_label, pred_label)) return ConfusionKind::similar;
    return ConfusionKind::dissimilar;
}

ErrorBreakdown& ErrorBreakdown::operator+=(const ErrorBreakdown& other) {
    if (per_class.empty()) {
        per_class = other.per_class;
        return *this;
    }
    if (other.per_class.empty()) return *this;
    if (per_class.size() != other.per_class.size()) {
        throw std::invalid_argument("ErrorBreakdown: class counts differ");
    }
    for (std::size_t i = 0; i < per_class.size(); ++i) {
        per_class[i].background += other.per_class[i].background;
        per_class[i].similar += other.per_class[i].similar;
        per_class[i].dissimilar += other.per_class[i].dissimilar;
    }
    return *this;
}

ErrorBreakdown error_breakdown(const LabelMap& gt, const LabelMap& pred, const Taxonomy& t,
                               const ErrorBreakdownOptions& opts) {
    if (!gt.same_shape(pred)) {
        throw std::invalid_argument("error_breakdown: shape mismatch");
    }
    ErrorBreakdown out;
    out.per_class.resize(t.num_classes());
    for (int r = 0; r < gt.height(); ++r) {
        for (int c = 0; c < gt.width(); ++c) {
            ClassId g = gt.at(r, c);
            ClassId p = pred.at(r, c);
            if (g == t.ignore_id() || t.is_background(g) || g == p) continue;
            if (!t.is_class(g)) {
                throw std::runtime_error("error_breakdown: gt label outside the taxonomy");
            }
            if (!t.is_class(p)) {
                throw std::runtime_error("error_breakdown: pred label outside the taxonomy");
            }
            if (opts.exclude_correctable_radius &&
                is_mislocalisation(gt, r, c, p, *opts.exclude_correctable_radius)) {
                continue;
            }
            ErrorCounts& counts = out.per_class[t.index_of(g)];
            switch (classify_confusion(g, p, t)) {
                case ConfusionKind::background: ++counts.background; break;
                case ConfusionKind::similar: ++counts.similar; break;
                case ConfusionKind::dissimilar: ++counts.dissimilar; break;
            }
        }
    }
    return out;
}

bool is_mislocalisation(const LabelMap& gt, int row, int col, ClassId pred_label, int r) {
    if (!gt.in_bounds(row, col)) {
        throw std::invalid_argument("is_mislocalisation: position out of bounds");
    }
    if (r < 0) {
        throw std::invalid_argument("is_mislocalisation: radius must be non-negative");
    }
    int r0 = std::max(0, row - r);
    int r1 = std::min(gt.height() - 1, row + r);
    int c0 = std::max(0, col - r);
    int c1 = std::min(gt.width() - 1, col + r);
    for (int i = r0; i <= r1; ++i) {
        for (int j = c0; j <= c1; ++j) {
            if (gt.at(i, j) == pred_label) return true;
        }
    }
    return false;
}

MislocalisationGain& MislocalisationGain::operator+=(const MislocalisationGain& other) {
    if (radii.empty() && corrected.empty() && baseline.num_classes() == 0) {
        *this = other;
        return *this;
    }
    if (radii != other.radii) {
        throw std::invalid_argument("MislocalisationGain: radii differ");
    }
    baseline += other.baseline;
    for (std::size_t i = 0; i < corrected.size(); ++i) {
        corrected[i] += other.corrected[i];
    }
    return *this;
}

MislocalisationGain mislocalisation_gain(const LabelMap& gt, const LabelMap& pred,
                                         const ConfusionMatrix& cm, const Taxonomy& t,
                                         std::span<const int> radii,
                                         const ConfusionOptions& opts) {
    if (!gt.same_shape(pred)) {
        throw std::invalid_argument("mislocalisation_gain: shape mismatch");
    }
    if (!std::is_sorted(radii.begin(), radii.end())) {
        throw std::invalid_argument("mislocalisation_gain: radii must be ascending");
    }
    if (!radii.empty() && radii.front() < 0) {
        throw std::invalid_argument("mislocalisation_gain: radii must be non-negative");
    }
    MislocalisationGain out;
    out.radii.assign(radii.begin(), radii.end());
    out.baseline = cm;
    out.corrected.assign(radii.size(), cm);

    // L-inf distance from every pixel to the nearest GT pixel of each class
    // that appears among the erroneous predictions. A window of half-side r
    // contains the label iff that distance is <= r.
    std::unordered_map<ClassId, Image<int>> dist;
    for (int r = 0; r < gt.height(); ++r) {
        for (int c = 0; c < gt.width(); ++c) {
            ClassId g = gt.at(r, c);
            ClassId p = pred.at(r, c);
            if (g == t.ignore_id() || g == p) continue;
            if (opts.exclude_background_gt && t.is_background(g)) continue;
            if (dist.contains(p)) continue;
            Image<std::uint8_t> seeds(gt.height(), gt.width(), 0);
            bool any = false;
            for (int i = 0; i < gt.height(); ++i) {
                for (int j = 0; j < gt.width(); ++j) {
                    if (gt.at(i, j) == p) {
                        seeds.at(i, j) = 1;
                        any = true;
                    }
                }
            }
            dist.emplace(p, any ? chessboard_distance(seeds)
                                : Image<int>(gt.height(), gt.width(), kFar));
        }
    }

    for (int r = 0; r < gt.height(); ++r) {
        for (int c = 0; c < gt.width(); ++c) {
            ClassId g = gt.at(r, c);
            ClassId p = pred.at(r, c);
            if (g == t.ignore_id() || g == p) continue;
            if (opts.exclude_background_gt && t.is_background(g)) continue;
            int d = dist.at(p).at(r, c);
            std::size_t gi = t.index_of(g);
            std::size_t pi = t.index_of(p);
            for (std::size_t k = 0; k < out.radii.size(); ++k) {
                if (out.radii[k] >= d) {
                    out.corrected[k].at(gi, pi) -= 1;
                    out.corrected[k].at(gi, gi) += 1;
                }
            }
        }
    }
    return out;
}

}  // namespace segdiag
