#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "segdiag/instances.hpp"

namespace segdiag {

enum class BinScope { per_class, global };

struct PercentileThresholds {
    double p10 = 0.0;
    double p30 = 0.0;
    double p70 = 0.0;
    double p90 = 0.0;

    friend bool operator==(const PercentileThresholds&, const PercentileThresholds&) = default;
};

/// Size and aspect-ratio quintile thresholds, fitted per class or globally.
/// Classes with no instances carry no entry.
struct BinScheme {
    BinScope scope = BinScope::per_class;
    std::string method = "nearest_rank";
    std::map<ClassId, PercentileThresholds> size;
    std::map<ClassId, PercentileThresholds> aspect;
    std::optional<PercentileThresholds> global_size;
    std::optional<PercentileThresholds> global_aspect;

    const PercentileThresholds& size_thresholds(ClassId id) const;
    const PercentileThresholds& aspect_thresholds(ClassId id) const;

    friend bool operator==(const BinScheme&, const BinScheme&) = default;
};

/// Nearest-rank percentile of sorted values: element at 1-based rank
/// ceil(k/100 * n), clamped to [1, n].
double nearest_rank_percentile(std::span<const double> sorted_values, int k);

BinScheme fit_bins(std::span<const InstanceRecord> records, BinScope scope);

/// XS for v <= P10, S for v <= P30, M for v <= P70, L for v <= P90, else XL.
SizeBin size_bin_for(double value, const PercentileThresholds& thr);
/// Same boundaries ordered by increasing width/height: XT, T, M, W, XW.
AspectBin aspect_bin_for(double value, const PercentileThresholds& thr);

/// Fills size_bin and aspect_bin on every record. Throws when a record's
/// class has no thresholds in the scheme.
void assign_bins(std::span<InstanceRecord> records, const BinScheme& scheme);

std::string bin_scheme_to_json(const BinScheme& scheme);
BinScheme bin_scheme_from_json(const std::string& text);

void save_bin_scheme(const std::filesystem::path& path, const BinScheme& scheme);
BinScheme load_bin_scheme(const std::filesystem::path& path);

}  // namespace segdiag
