#include "segdiag/uncertainty.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "segdiag/distance_transform.hpp"
#include "segdiag/error_taxonomy.hpp"

namespace segdiag {
namespace {

constexpr double kSumTolerance = 1e-5;

template <typename T>
void check_distribution(std::span<const T> p) {
    if (p.size() < 2) {
        throw std::invalid_argument("uncertainty: need at least two classes");
    }
    double sum = 0.0;
    for (T v : p) {
        if (v < T{0}) throw std::invalid_argument("uncertainty: negative probability");
        sum += v;
    }
    if (std::abs(sum - 1.0) > kSumTolerance) {
        throw std::invalid_argument("uncertainty: probabilities do not sum to 1");
    }
}

template <typename T>
double entropy_impl(std::span<const T> p) {
    check_distribution(p);
    double h = 0.0;
    for (T v : p) {
        if (v > T{0}) h += static_cast<double>(v) * std::log(static_cast<double>(v));
    }
    return h / std::log(1.0 / static_cast<double>(p.size()));
}

template <typename T>
double probability_impl(std::span<const T> p) {
    check_distribution(p);
    T top1{0};
    T top2{0};
    for (T v : p) {
        if (v > top1) {
            top2 = top1;
            top1 = v;
        } else if (v > top2) {
            top2 = v;
        }
    }
    return static_cast<double>(top2) / static_cast<double>(top1);
}

Image<std::uint8_t> boundary_mask(const LabelMap& gt) {
    Image<std::uint8_t> mask(gt.height(), gt.width(), 0);
    for (int r = 0; r < gt.height(); ++r) {
        for (int c = 0; c < gt.width(); ++c) {
            ClassId v = gt.at(r, c);
            bool boundary = (r > 0 && gt.at(r - 1, c) != v) ||
                            (r + 1 < gt.height() && gt.at(r + 1, c) != v) ||
                            (c > 0 && gt.at(r, c - 1) != v) ||
                            (c + 1 < gt.width() && gt.at(r, c + 1) != v);
            if (boundary) mask.at(r, c) = 1;
        }
    }
    return mask;
}

}  // namespace

const char* to_string(UncertaintyMeasure m) {
    return m == UncertaintyMeasure::relative_entropy ? "relative_entropy"
                                                     : "relative_probability";
}

UncertaintyMeasure uncertainty_measure_from_string(const std::string& name) {
    if (name == "relative_entropy") return UncertaintyMeasure::relative_entropy;
    if (name == "relative_probability") return UncertaintyMeasure::relative_probability;
    throw std::invalid_argument("unknown uncertainty measure: " + name);
}

double relative_entropy(std::span<const float> p) { return entropy_impl(p); }
double relative_entropy(std::span<const double> p) { return entropy_impl(p); }
double relative_probability(std::span<const float> p) { return probability_impl(p); }
double relative_probability(std::span<const double> p) { return probability_impl(p); }

UncertaintyMap uncertainty_map(const ScoreTensor& scores, UncertaintyMeasure measure) {
    UncertaintyMap out;
    out.measure = measure;
    out.values = Image<float>(scores.height(), scores.width());
    using Fn = double (*)(std::span<const float>);
    Fn f = measure == UncertaintyMeasure::relative_entropy
               ? static_cast<Fn>(relative_entropy)
               : static_cast<Fn>(relative_probability);
    for (int r = 0; r < scores.height(); ++r) {
        for (int c = 0; c < scores.width(); ++c) {
            out.values.at(r, c) = static_cast<float>(f(scores.pixel(r, c)));
        }
    }
    return out;
}

DistanceMap boundary_distance_map(const LabelMap& gt, BoundaryMode mode) {
    Image<std::uint8_t> mask = boundary_mask(gt);
    if (mode == BoundaryMode::any_class) {
        Image<double> sq = squared_euclidean_distance(mask);
        DistanceMap d(gt.height(), gt.width());
        for (std::size_t i = 0; i < d.size(); ++i) d[i] = std::sqrt(sq[i]);
        return d;
    }
    // Distance to boundary pixels of the pixel's own label, one transform
    // per label present.
    DistanceMap d(gt.height(), gt.width(), std::numeric_limits<double>::infinity());
    std::vector<std::uint8_t> label_seen(65536, 0);
    for (std::size_t i = 0; i < gt.size(); ++i) label_seen[gt[i]] = 1;
    for (std::uint32_t label = 0; label < 65536; ++label) {
        if (!label_seen[label]) continue;
        Image<std::uint8_t> seeds(gt.height(), gt.width(), 0);
        for (std::size_t i = 0; i < gt.size(); ++i) {
            if (mask[i] && gt[i] == label) seeds[i] = 1;
        }
        Image<double> sq = squared_euclidean_distance(seeds);
        for (std::size_t i = 0; i < gt.size(); ++i) {
            if (gt[i] == label) d[i] = std::sqrt(sq[i]);
        }
    }
    return d;
}

Quartiles quartiles(std::vector<float> values) {
    if (values.empty()) {
        throw std::invalid_argument("quartiles: empty input");
    }
    std::sort(values.begin(), values.end());
    auto at_q = [&](double q) {
        double h = (static_cast<double>(values.size()) - 1.0) * q;
        std::size_t lo = static_cast<std::size_t>(std::floor(h));
        std::size_t hi = std::min(lo + 1, values.size() - 1);
        double frac = h - static_cast<double>(lo);
        return static_cast<double>(values[lo]) * (1.0 - frac) +
               static_cast<double>(values[hi]) * frac;
    };
    return Quartiles{at_q(0.25), at_q(0.5), at_q(0.75)};
}

DistanceBinnedSamples& DistanceBinnedSamples::operator+=(const DistanceBinnedSamples& other) {
    if (edges.empty() && samples.empty()) {
        *this = other;
        return *this;
    }
    if (edges != other.edges) {
        throw std::invalid_argument("DistanceBinnedSamples: bin edges differ");
    }
    for (std::size_t i = 0; i < samples.size(); ++i) {
        samples[i].insert(samples[i].end(), other.samples[i].begin(), other.samples[i].end());
    }
    return *this;
}

DistanceBinnedSamples collect_by_distance(const UncertaintyMap& umap, const DistanceMap& dmap,
                                          std::span<const double> edges) {
    if (umap.values.height() != dmap.height() || umap.values.width() != dmap.width()) {
        throw std::invalid_argument("collect_by_distance: shape mismatch");
    }
    if (edges.size() < 2 || !std::is_sorted(edges.begin(), edges.end())) {
        throw std::invalid_argument("collect_by_distance: edges must be ascending, >= 2");
    }
    DistanceBinnedSamples out;
    out.edges.assign(edges.begin(), edges.end());
    out.samples.resize(edges.size() - 1);
    for (std::size_t i = 0; i < dmap.size(); ++i) {
        double d = dmap[i];
        if (std::isinf(d) || d < edges.front() || d >= edges.back()) continue;
        // upper_bound puts a value equal to an edge into the bin it opens.
        auto it = std::upper_bound(edges.begin(), edges.end(), d);
        std::size_t bin = static_cast<std::size_t>(it - edges.begin()) - 1;
        out.samples[bin].push_back(umap.values[i]);
    }
    return out;
}

std::vector<std::optional<Quartiles>> uncertainty_by_distance(const DistanceBinnedSamples& s) {
    std::vector<std::optional<Quartiles>> out(s.samples.size());
    for (std::size_t i = 0; i < s.samples.size(); ++i) {
        if (!s.samples[i].empty()) out[i] = quartiles(s.samples[i]);
    }
    return out;
}

double per_instance_mean_uncertainty(const InstanceRecord& rec, const InstanceMap& inst,
                                     const UncertaintyMap& umap) {
    double sum = 0.0;
    std::uint64_t count = 0;
    for (int r = 0; r < inst.height(); ++r) {
        for (int c = 0; c < inst.width(); ++c) {
            if (inst.at(r, c) != rec.instance_id) continue;
            sum += umap.values.at(r, c);
            ++count;
        }
    }
    if (count == 0) {
        throw std::runtime_error("per_instance_mean_uncertainty: instance has no pixels");
    }
    return sum / static_cast<double>(count);
}

ErrorTypeUncertainty& ErrorTypeUncertainty::operator+=(const ErrorTypeUncertainty& other) {
    baseline += other.baseline;
    misloc += other.misloc;
    background += other.background;
    similar += other.similar;
    dissimilar += other.dissimilar;
    return *this;
}

ErrorTypeUncertainty uncertainty_by_error_type(const LabelMap& gt, const LabelMap& pred,
                                               const UncertaintyMap& umap, const Taxonomy& t,
                                               int misloc_radius, const InstanceMap* inst) {
    if (!gt.same_shape(pred)) {
        throw std::invalid_argument("uncertainty_by_error_type: shape mismatch");
    }
    ErrorTypeUncertainty out;
    for (int r = 0; r < gt.height(); ++r) {
        for (int c = 0; c < gt.width(); ++c) {
            double u = umap.values.at(r, c);
            ClassId g = gt.at(r, c);
            if (inst ? inst->at(r, c) != 0 : g != t.ignore_id()) {
                out.baseline.add(u);
            }
            ClassId p = pred.at(r, c);
            if (g == t.ignore_id() || g == p || !t.is_class(g) || !t.is_class(p)) continue;
            if (is_mislocalisation(gt, r, c, p, misloc_radius)) {
                out.misloc.add(u);
            }
            if (t.is_background(g)) continue;
            switch (classify_confusion(g, p, t)) {
                case ConfusionKind::background: out.background.add(u); break;
                case ConfusionKind::similar: out.similar.add(u); break;
                case ConfusionKind::dissimilar: out.dissimilar.add(u); break;
            }
        }
    }
    return out;
}

FgbgCounts& FgbgCounts::operator+=(const FgbgCounts& other) {
    tp += other.tp;
    fp += other.fp;
    tn += other.tn;
    fn += other.fn;
    return *this;
}

FgbgCounts fgbg_counts(const UncertaintyMap& umap, const LabelMap& gt, const Taxonomy& t) {
    if (umap.values.height() != gt.height() || umap.values.width() != gt.width()) {
        throw std::invalid_argument("fgbg_counts: shape mismatch");
    }
    if (!t.background_id()) {
        throw std::invalid_argument("fgbg_counts: taxonomy has no background class");
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < umap.values.size(); ++i) sum += umap.values[i];
    double mean = sum / static_cast<double>(umap.values.size());

    FgbgCounts counts;
    bool any = false;
    for (int r = 0; r < gt.height(); ++r) {
        for (int c = 0; c < gt.width(); ++c) {
            ClassId g = gt.at(r, c);
            if (g == t.ignore_id()) continue;
            any = true;
            bool pred_fg = umap.values.at(r, c) > mean;
            bool gt_fg = !t.is_background(g);
            if (pred_fg && gt_fg) ++counts.tp;
            else if (pred_fg && !gt_fg) ++counts.fp;
            else if (!pred_fg && gt_fg) ++counts.fn;
            else ++counts.tn;
        }
    }
    if (!any) {
        throw std::runtime_error("fgbg_counts: ground truth is all ignore");
    }
    return counts;
}

FgbgResult fgbg_result(const FgbgCounts& counts) {
    FgbgResult r;
    std::uint64_t pp = counts.tp + counts.fp;
    std::uint64_t ap = counts.tp + counts.fn;
    std::uint64_t all = counts.tp + counts.fp + counts.tn + counts.fn;
    r.precision = pp > 0 ? static_cast<double>(counts.tp) / static_cast<double>(pp) : 0.0;
    r.recall = ap > 0 ? static_cast<double>(counts.tp) / static_cast<double>(ap) : 0.0;
    r.accuracy =
        all > 0 ? static_cast<double>(counts.tp + counts.tn) / static_cast<double>(all) : 0.0;
    return r;
}

FgbgResult fgbg_from_uncertainty(const UncertaintyMap& umap, const LabelMap& gt,
                                 const Taxonomy& t) {
    return fgbg_result(fgbg_counts(umap, gt, t));
}

}  // namespace segdiag
