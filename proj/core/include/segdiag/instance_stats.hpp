#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

#include "segdiag/instances.hpp"

namespace segdiag {

struct BinStats {
    std::size_t count = 0;
    double mean = 0.0;
    std::optional<double> std_error;  // sample stddev / sqrt(count), absent for count < 2
};

/// Per-instance accuracy grouped by size and aspect bins for one class.
struct ClassSensitivity {
    ClassId class_id = 0;
    std::array<BinStats, kNumBins> by_size;
    std::array<BinStats, kNumBins> by_aspect;
    BinStats overall;
};

struct SensitivityReport {
    std::vector<ClassSensitivity> classes;  // ordered by class id
};

/// Records and accuracies run in parallel; every record must carry bins.
SensitivityReport sensitivity(std::span<const InstanceRecord> records,
                              std::span<const double> accuracies);

/// Instance counts over the size x aspect grid for one class.
struct CategoryDistribution {
    ClassId class_id = 0;
    std::array<std::array<std::uint64_t, kNumBins>, kNumBins> counts{};  // [size][aspect]
    std::array<std::uint64_t, kNumBins> size_marginal{};
    std::array<std::uint64_t, kNumBins> aspect_marginal{};
    std::uint64_t total = 0;
};

std::vector<CategoryDistribution> category_distribution(std::span<const InstanceRecord> records);

}  // namespace segdiag
