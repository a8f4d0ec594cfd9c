#pragma once

#include <filesystem>
#include <limits>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "segdiag/binning.hpp"
#include "segdiag/error_taxonomy.hpp"
#include "segdiag/instance_stats.hpp"
#include "segdiag/manifest.hpp"
#include "segdiag/metrics.hpp"
#include "segdiag/refine.hpp"
#include "segdiag/uncertainty.hpp"

namespace segdiag {

/// Error with the process exit code it maps to: 1 = configuration error,
/// 2 = every image failed to evaluate.
class RunError : public std::runtime_error {
public:
    RunError(int exit_code, const std::string& what)
        : std::runtime_error(what), exit_code_(exit_code) {}
    int exit_code() const { return exit_code_; }

private:
    int exit_code_;
};

enum class Analysis {
    metrics,
    topn,
    merged_groups,
    sensitivity,
    category_distribution,
    error_breakdown,
    mislocalisation,
    uncertainty_distance,
    uncertainty_category,
    uncertainty_error_type,
    fgbg,
    refine,
};

const char* to_string(Analysis a);

/// Comma-separated names; "uncertainty" expands to the three uncertainty
/// analyses plus fgbg, "all" to everything except refine. Unknown names and
/// lists that select nothing raise RunError(1).
std::set<Analysis> parse_analyses(const std::string& csv);
std::set<Analysis> default_analyses();

struct RunConfig {
    std::set<Analysis> analyses = default_analyses();
    std::vector<int> misloc_radii{5, 10, 15, 20, 30};
    std::vector<double> distance_bin_edges{
        1, 2, 4, 8, 16, 32, 64, 128, std::numeric_limits<double>::infinity()};
    int topn_max = 2;
    bool exclude_background_gt = false;
    BinScope bin_scope = BinScope::per_class;
    std::optional<std::filesystem::path> bin_scheme_path;  // reuse a fitted scheme
    std::vector<UncertaintyMeasure> measures{UncertaintyMeasure::relative_entropy,
                                             UncertaintyMeasure::relative_probability};
    BoundaryMode boundary_mode = BoundaryMode::any_class;
    int error_uncertainty_radius = 5;
    std::optional<ScoreKind> expected_score_kind;
    bool auto_resize_scores = false;
    std::optional<int> exclude_correctable_radius;  // error-breakdown variant
    RefineConfig refine;
    int jobs = 1;
    std::uint64_t seed = 0;
    std::filesystem::path out_dir = "diag-out";
};

std::string run_config_to_json(const RunConfig& config);
RunConfig run_config_from_json_text(const std::string& text);
RunConfig load_run_config(const std::filesystem::path& path);

struct TopnEntry {
    int n = 1;
    ConfusionMatrix confusion;
    ClassMetrics metrics;
};

struct UncertaintySection {
    UncertaintyMeasure measure = UncertaintyMeasure::relative_entropy;
    std::optional<DistanceBinnedSamples> by_distance;
    std::optional<SensitivityReport> by_category;  // per-instance mean uncertainty
    std::optional<ErrorTypeUncertainty> by_error_type;
    std::optional<FgbgCounts> fgbg;
};

struct DiagnosticsReport {
    std::string manifest_path;
    std::string dataset;
    std::size_t images_total = 0;
    std::size_t images_evaluated = 0;
    std::vector<std::pair<std::string, std::string>> failures;  // image_id, message
    std::vector<std::string> notes;
    std::string taxonomy_hash;
    std::string timestamp;
    RunConfig config;
    std::optional<Taxonomy> taxonomy;

    std::optional<ConfusionMatrix> confusion;
    std::optional<ClassMetrics> metrics;
    std::vector<TopnEntry> topn;
    std::optional<MergedGroupMetrics> merged_groups;
    std::optional<BinScheme> bin_scheme;
    std::optional<SensitivityReport> sensitivity;
    std::vector<CategoryDistribution> category_distribution;
    std::optional<ErrorBreakdown> error_breakdown;
    std::optional<MislocalisationGain> mislocalisation;
    std::vector<UncertaintySection> uncertainty;
    std::optional<RefineEvaluation> refinement;
};

/// Runs every enabled analysis over the manifest. Per-image failures land in
/// report.failures; throws RunError(1) on inconsistent configuration and
/// RunError(2) when no image could be evaluated.
DiagnosticsReport run(const Manifest& manifest, const RunConfig& config);

/// Canonical serialization; every emitted table and chart is a projection of
/// this text. Deterministic except for the timestamp field.
std::string report_to_json(const DiagnosticsReport& report);

/// Writes report.json plus tables/*.csv and charts/*.svg under out_dir.
void write_report(const DiagnosticsReport& report, const std::filesystem::path& out_dir);

/// Re-emits tables and charts from an existing report.json.
void export_outputs(const std::filesystem::path& report_json,
                    const std::filesystem::path& out_dir);

}  // namespace segdiag
