#pragma once

#include <cstdint>
#include <vector>

#include "segdiag/image.hpp"
#include "segdiag/taxonomy.hpp"

namespace segdiag {

/// Pixel counts indexed by (ground-truth class, predicted class) in dense
/// taxonomy order. Ignore pixels never contribute. Matrices from different
/// images combine with operator+= (commutative, identity = default matrix).
class ConfusionMatrix {
public:
    ConfusionMatrix() = default;
    explicit ConfusionMatrix(std::size_t num_classes)
        : n_(num_classes), counts_(num_classes * num_classes, 0) {}

    std::size_t num_classes() const { return n_; }

    std::uint64_t& at(std::size_t gt, std::size_t pred) { return counts_[gt * n_ + pred]; }
    std::uint64_t at(std::size_t gt, std::size_t pred) const { return counts_[gt * n_ + pred]; }

    /// g_i: ground-truth pixels of class i (row sum).
    std::uint64_t gt_total(std::size_t i) const;
    /// p_j: pixels predicted as class j (column sum).
    std::uint64_t pred_total(std::size_t j) const;
    std::uint64_t total() const;
    std::uint64_t trace() const;

    ConfusionMatrix& operator+=(const ConfusionMatrix& other);

    friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

private:
    std::size_t n_ = 0;
    std::vector<std::uint64_t> counts_;
};

struct ConfusionOptions {
    /// Skip pixels whose ground truth is the background class (VOC-style
    /// evaluation at non-background pixels).
    bool exclude_background_gt = false;
};

/// Entry (i, j) counts pixels with ground truth i predicted as j.
/// Throws on shape mismatch and on label values outside the taxonomy.
ConfusionMatrix accumulate_confusion(const LabelMap& gt, const LabelMap& pred,
                                     const Taxonomy& t, const ConfusionOptions& opts = {});

}  // namespace segdiag
