#include "segdiag/instance_stats.hpp"

#include <cmath>
#include <map>
#include <stdexcept>

namespace segdiag {
namespace {

BinStats stats_of(const std::vector<double>& values) {
    BinStats s;
    s.count = values.size();
    if (values.empty()) return s;
    double sum = 0.0;
    for (double v : values) sum += v;
    s.mean = sum / static_cast<double>(values.size());
    if (values.size() >= 2) {
        double ss = 0.0;
        for (double v : values) ss += (v - s.mean) * (v - s.mean);
        double sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
        s.std_error = sd / std::sqrt(static_cast<double>(values.size()));
    }
    return s;
}

struct ClassSamples {
    std::array<std::vector<double>, kNumBins> by_size;
    std::array<std::vector<double>, kNumBins> by_aspect;
    std::vector<double> all;
};

}  // namespace

SensitivityReport sensitivity(std::span<const InstanceRecord> records,
                              std::span<const double> accuracies) {
    if (records.size() != accuracies.size()) {
        throw std::invalid_argument("sensitivity: records and accuracies differ in length");
    }
    std::map<ClassId, ClassSamples> samples;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const InstanceRecord& rec = records[i];
        if (!rec.size_bin || !rec.aspect_bin) {
            throw std::invalid_argument("sensitivity: record is missing bin assignments");
        }
        ClassSamples& cs = samples[rec.class_id];
        cs.by_size[static_cast<std::size_t>(*rec.size_bin)].push_back(accuracies[i]);
        cs.by_aspect[static_cast<std::size_t>(*rec.aspect_bin)].push_back(accuracies[i]);
        cs.all.push_back(accuracies[i]);
    }
    SensitivityReport report;
    for (const auto& [id, cs] : samples) {
        ClassSensitivity sens;
        sens.class_id = id;
        for (std::size_t b = 0; b < kNumBins; ++b) {
            sens.by_size[b] = stats_of(cs.by_size[b]);
            sens.by_aspect[b] = stats_of(cs.by_aspect[b]);
        }
        sens.overall = stats_of(cs.all);
        report.classes.push_back(std::move(sens));
    }
    return report;
}

std::vector<CategoryDistribution> category_distribution(
    std::span<const InstanceRecord> records) {
    std::map<ClassId, CategoryDistribution> dist;
    for (const InstanceRecord& rec : records) {
        if (!rec.size_bin || !rec.aspect_bin) {
            throw std::invalid_argument(
                "category_distribution: record is missing bin assignments");
        }
        CategoryDistribution& d = dist[rec.class_id];
        d.class_id = rec.class_id;
        std::size_t s = static_cast<std::size_t>(*rec.size_bin);
        std::size_t a = static_cast<std::size_t>(*rec.aspect_bin);
        d.counts[s][a] += 1;
        d.size_marginal[s] += 1;
        d.aspect_marginal[a] += 1;
        d.total += 1;
    }
    std::vector<CategoryDistribution> out;
    out.reserve(dist.size());
    for (auto& [id, d] : dist) out.push_back(std::move(d));
    return out;
}

}  // namespace segdiag
