#include "segdiag/confusion.hpp"

#include <numeric>
#include <stdexcept>
#include <string>

namespace segdiag {

std::uint64_t ConfusionMatrix::gt_total(std::size_t i) const {
    std::uint64_t sum = 0;
    for (std::size_t j = 0; j < n_; ++j) sum += at(i, j);
    return sum;
}

std::uint64_t ConfusionMatrix::pred_total(std::size_t j) const {
    std::uint64_t sum = 0;
    for (std::size_t i = 0; i < n_; ++i) sum += at(i, j);
    return sum;
}

std::uint64_t ConfusionMatrix::total() const {
    return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0});
}

std::uint64_t ConfusionMatrix::trace() const {
    std::uint64_t sum = 0;
    for (std::size_t i = 0; i < n_; ++i) sum += at(i, i);
    return sum;
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
    if (n_ == 0) {
        *this = other;
        return *this;
    }
    if (other.n_ == 0) return *this;
    if (other.n_ != n_)
        throw std::invalid_argument("confusion: cannot add matrices of different sizes");
    for (std::size_t k = 0; k < counts_.size(); ++k) counts_[k] += other.counts_[k];
    return *this;
}

ConfusionMatrix accumulate_confusion(const LabelMap& gt, const LabelMap& pred,
                                     const Taxonomy& t, const ConfusionOptions& opts) {
    if (!gt.same_shape(pred))
        throw std::invalid_argument("confusion: ground truth and prediction shapes differ");

    ConfusionMatrix cm(t.num_classes());
    const ClassId ignore = t.ignore_id();
    for (std::size_t k = 0; k < gt.size(); ++k) {
        const ClassId g = gt[k];
        if (g == ignore) continue;
        if (opts.exclude_background_gt && t.is_background(g)) continue;
        const ClassId p = pred[k];
        if (!t.is_class(g))
            throw std::invalid_argument("confusion: ground-truth label " + std::to_string(g) +
                                        " is not in the taxonomy");
        if (!t.is_class(p))
            throw std::invalid_argument("confusion: predicted label " + std::to_string(p) +
                                        " is not in the taxonomy");
        ++cm.at(t.index_of(g), t.index_of(p));
    }
    return cm;
}

}  // namespace segdiag
