#include <gtest/gtest.h>
#include <unistd.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <regex>

#include "oracles.hpp"
#include "segdiag/png_io.hpp"
#include "segdiag/report.hpp"
#include "segdiag/synth.hpp"

using namespace segdiag;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("segdiag_report_" + std::to_string(::getpid()) + "_" +
                std::to_string(
                    std::chrono::steady_clock::now().time_since_epoch().count()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

std::vector<synth::SceneSpec> demo_specs() {
    std::vector<synth::SceneSpec> specs;
    for (int k = 0; k < 3; ++k) {
        synth::SceneSpec spec;
        spec.height = 48;
        spec.width = 64;
        spec.num_classes = 5;
        spec.background_id = 0;
        spec.groups = {{"pair", {1, 2}}};
        spec.instances.push_back({1, synth::ShapeKind::rectangle, 4, 4 + k, 8, 10});
        spec.instances.push_back({2, synth::ShapeKind::ellipse, 24, 8, 9, 13});
        spec.instances.push_back({3, synth::ShapeKind::rectangle, 6, 40, 12, 7});
        if (k > 0) {
            spec.errors.push_back({synth::ErrorKind::shift, 1, 2, 1});
        }
        if (k == 2) {
            spec.errors.push_back({synth::ErrorKind::group_swap, 2, 0, 0});
        }
        spec.radii = {1, 2, 3};
        spec.seed = 100 + static_cast<std::uint64_t>(k);
        specs.push_back(spec);
    }
    return specs;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string strip_timestamp(std::string text) {
    static const std::regex ts("\"timestamp\": \"[^\"]*\"");
    return std::regex_replace(text, ts, "\"timestamp\": \"\"");
}

}  // namespace

TEST(ParseAnalyses, AliasesAndErrors) {
    std::set<Analysis> all = parse_analyses("all");
    EXPECT_EQ(all, default_analyses());
    EXPECT_TRUE(all.count(Analysis::metrics));
    EXPECT_TRUE(all.count(Analysis::fgbg));
    EXPECT_FALSE(all.count(Analysis::refine));

    std::set<Analysis> unc = parse_analyses("uncertainty");
    EXPECT_EQ(unc.size(), 4u);
    EXPECT_TRUE(unc.count(Analysis::uncertainty_distance));
    EXPECT_TRUE(unc.count(Analysis::uncertainty_category));
    EXPECT_TRUE(unc.count(Analysis::uncertainty_error_type));
    EXPECT_TRUE(unc.count(Analysis::fgbg));

    std::set<Analysis> two = parse_analyses(" metrics , error_breakdown ");
    EXPECT_EQ(two.size(), 2u);

    EXPECT_THROW(parse_analyses("nope"), RunError);
    EXPECT_THROW(parse_analyses(""), RunError);
    try {
        parse_analyses("nope");
        FAIL();
    } catch (const RunError& e) {
        EXPECT_EQ(e.exit_code(), 1);
    }
}

TEST(RunConfig, JsonRoundTrip) {
    RunConfig cfg;
    cfg.analyses = parse_analyses("metrics,topn,refine");
    cfg.misloc_radii = {1, 2, 7};
    cfg.distance_bin_edges = {0.5, 2.0, std::numeric_limits<double>::infinity()};
    cfg.topn_max = 3;
    cfg.exclude_background_gt = true;
    cfg.bin_scope = BinScope::global;
    cfg.measures = {UncertaintyMeasure::relative_probability};
    cfg.boundary_mode = BoundaryMode::same_class;
    cfg.error_uncertainty_radius = 9;
    cfg.expected_score_kind = ScoreKind::probabilities;
    cfg.auto_resize_scores = true;
    cfg.exclude_correctable_radius = 4;
    cfg.refine.target_classes = {2, 3};
    cfg.refine.crop_side = 32;
    cfg.refine.upsample_factor = 2.5;
    cfg.refine.mode = RefineMode::gt_bbox;
    cfg.refine.bbox_margin = 5;
    cfg.refine.scorer.command = "scorer {input} {output}";
    cfg.refine.scorer.timeout_seconds = 12.5;
    cfg.seed = 17;

    RunConfig back = run_config_from_json_text(run_config_to_json(cfg));
    EXPECT_EQ(back.analyses, cfg.analyses);
    EXPECT_EQ(back.misloc_radii, cfg.misloc_radii);
    ASSERT_EQ(back.distance_bin_edges.size(), 3u);
    EXPECT_EQ(back.distance_bin_edges[0], 0.5);
    EXPECT_TRUE(std::isinf(back.distance_bin_edges[2]));
    EXPECT_EQ(back.topn_max, 3);
    EXPECT_TRUE(back.exclude_background_gt);
    EXPECT_EQ(back.bin_scope, BinScope::global);
    EXPECT_EQ(back.measures, cfg.measures);
    EXPECT_EQ(back.boundary_mode, BoundaryMode::same_class);
    EXPECT_EQ(back.error_uncertainty_radius, 9);
    EXPECT_EQ(back.expected_score_kind, ScoreKind::probabilities);
    EXPECT_TRUE(back.auto_resize_scores);
    EXPECT_EQ(back.exclude_correctable_radius, 4);
    EXPECT_EQ(back.refine.target_classes, cfg.refine.target_classes);
    EXPECT_EQ(back.refine.crop_side, 32);
    EXPECT_EQ(back.refine.upsample_factor, 2.5);
    EXPECT_EQ(back.refine.mode, RefineMode::gt_bbox);
    EXPECT_EQ(back.refine.bbox_margin, 5);
    EXPECT_EQ(back.refine.scorer.command, cfg.refine.scorer.command);
    EXPECT_EQ(back.refine.scorer.timeout_seconds, 12.5);
    EXPECT_EQ(back.seed, 17u);

    EXPECT_THROW(run_config_from_json_text("{"), RunError);
    EXPECT_THROW(run_config_from_json_text(R"({"analyses": "nope"})"), RunError);
}

class ReportRun : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        dir_ = new TempDir();
        auto specs = demo_specs();
        manifest_path_ = synth::write_synth_dataset(dir_->path, specs);
    }
    static void TearDownTestSuite() {
        delete dir_;
        dir_ = nullptr;
    }

    static RunConfig config() {
        RunConfig cfg;
        cfg.misloc_radii = {1, 2, 3};
        cfg.out_dir = dir_->path / "out";
        return cfg;
    }

    static TempDir* dir_;
    static fs::path manifest_path_;
};

TempDir* ReportRun::dir_ = nullptr;
fs::path ReportRun::manifest_path_;

TEST_F(ReportRun, AllSectionsPresentAndInternallyConsistent) {
    Manifest m = load_manifest(manifest_path_);
    DiagnosticsReport report = run(m, config());
    EXPECT_EQ(report.images_total, 3u);
    EXPECT_EQ(report.images_evaluated, 3u);
    EXPECT_TRUE(report.failures.empty());
    ASSERT_TRUE(report.metrics.has_value());
    ASSERT_TRUE(report.confusion.has_value());
    EXPECT_EQ(report.topn.size(), 2u);
    ASSERT_TRUE(report.merged_groups.has_value());
    ASSERT_TRUE(report.sensitivity.has_value());
    EXPECT_FALSE(report.category_distribution.empty());
    ASSERT_TRUE(report.error_breakdown.has_value());
    ASSERT_TRUE(report.mislocalisation.has_value());
    EXPECT_EQ(report.uncertainty.size(), 2u);
    EXPECT_FALSE(report.refinement.has_value());

    // The confusion matrix agrees with a per-image oracle recount.
    Taxonomy t = load_taxonomy(m.taxonomy_path);
    std::vector<std::vector<std::uint64_t>> want(5, std::vector<std::uint64_t>(5, 0));
    for (const auto& rec : m.records) {
        LabelMap gt = load_label_png(rec.gt);
        ScoreTensor scores = load_scores(*rec.scores, t);
        LabelMap pred = argmax_labels(scores, t);
        auto cm = oracle::confusion(gt, pred, t);
        for (int i = 0; i < 5; ++i)
            for (int j = 0; j < 5; ++j) want[i][j] += cm[i][j];
    }
    for (std::size_t i = 0; i < 5; ++i) {
        for (std::size_t j = 0; j < 5; ++j) {
            ASSERT_EQ(report.confusion->at(i, j), want[i][j]);
        }
    }

    // Top-1 equals plain metrics on argmax predictions.
    EXPECT_EQ(report.topn[0].n, 1);
    EXPECT_NEAR(report.topn[0].metrics.total_pixel_accuracy,
                report.metrics->total_pixel_accuracy, 1e-12);
    EXPECT_GE(report.topn[1].metrics.total_pixel_accuracy,
              report.topn[0].metrics.total_pixel_accuracy - 1e-12);

    // Mislocalisation baseline matches the metrics matrix.
    EXPECT_TRUE(report.mislocalisation->baseline == *report.confusion);
    EXPECT_EQ(report.mislocalisation->radii, config().misloc_radii);

    // Uncertainty sections carry every sub-analysis.
    for (const auto& section : report.uncertainty) {
        EXPECT_TRUE(section.by_distance.has_value());
        EXPECT_TRUE(section.by_category.has_value());
        EXPECT_TRUE(section.by_error_type.has_value());
        EXPECT_TRUE(section.fgbg.has_value());
        EXPECT_GT(section.by_error_type->baseline.count, 0u);
    }
}

TEST_F(ReportRun, JsonIsDeterministicAcrossJobCounts) {
    Manifest m = load_manifest(manifest_path_);
    RunConfig cfg1 = config();
    cfg1.jobs = 1;
    RunConfig cfg4 = config();
    cfg4.jobs = 4;
    std::string a = strip_timestamp(report_to_json(run(m, cfg1)));
    std::string b = strip_timestamp(report_to_json(run(m, cfg4)));
    EXPECT_EQ(a, b);

    // jobs and out_dir are runtime details, not part of the embedded config.
    json doc = json::parse(a);
    EXPECT_FALSE(doc["metadata"]["config"].contains("jobs"));
    EXPECT_FALSE(doc["metadata"]["config"].contains("out_dir"));
    EXPECT_EQ(doc["metadata"]["images_evaluated"], 3);
}

TEST_F(ReportRun, ScoreAnalysesRequireScores) {
    // Rewrite the manifest to reference pred PNGs instead of scores.
    Manifest m = load_manifest(manifest_path_);
    Taxonomy t = load_taxonomy(m.taxonomy_path);
    TempDir preds;
    json records = json::array();
    for (const auto& rec : m.records) {
        ScoreTensor scores = load_scores(*rec.scores, t);
        fs::path pred_path = preds.path / (rec.image_id + ".pred.png");
        write_label_png(pred_path, argmax_labels(scores, t));
        records.push_back({{"image_id", rec.image_id},
                           {"gt", rec.gt.string()},
                           {"instances", rec.instances->string()},
                           {"pred", pred_path.string()}});
    }
    json doc{{"dataset", "pred-only"},
             {"taxonomy_path", m.taxonomy_path.string()},
             {"records", records}};
    fs::path manifest_path = preds.path / "manifest.json";
    std::ofstream(manifest_path) << doc.dump(2);

    Manifest pred_only = load_manifest(manifest_path);
    EXPECT_THROW(run(pred_only, config()), RunError);
    try {
        run(pred_only, config());
    } catch (const RunError& e) {
        EXPECT_EQ(e.exit_code(), 1);
    }

    // Without score-based analyses the pred-only manifest evaluates fine.
    RunConfig cfg = config();
    cfg.analyses = parse_analyses("metrics,sensitivity,error_breakdown,mislocalisation");
    DiagnosticsReport report = run(pred_only, cfg);
    EXPECT_EQ(report.images_evaluated, 3u);
    EXPECT_TRUE(report.uncertainty.empty());
    EXPECT_TRUE(report.topn.empty());
}

TEST_F(ReportRun, AllImagesFailingIsExitTwo) {
    Manifest m = load_manifest(manifest_path_);
    // Corrupt every gt path after validation by pointing at score files.
    for (auto& rec : m.records) rec.gt = *rec.scores;
    try {
        run(m, config());
        FAIL() << "expected RunError";
    } catch (const RunError& e) {
        EXPECT_EQ(e.exit_code(), 2);
    }
}

TEST_F(ReportRun, WriteReportEmitsTablesAndCharts) {
    Manifest m = load_manifest(manifest_path_);
    RunConfig cfg = config();
    DiagnosticsReport report = run(m, cfg);
    write_report(report, cfg.out_dir);

    ASSERT_TRUE(fs::exists(cfg.out_dir / "report.json"));
    for (const char* name :
         {"metrics.csv", "metrics_summary.csv", "topn.csv", "merged_groups.csv",
          "sensitivity_size.csv", "sensitivity_aspect.csv", "category_distribution.csv",
          "error_breakdown.csv", "mislocalisation.csv", "uncertainty_by_distance.csv",
          "uncertainty_by_error_type.csv", "fgbg.csv"}) {
        EXPECT_TRUE(fs::exists(cfg.out_dir / "tables" / name)) << name;
    }
    for (const char* name :
         {"sensitivity_size.svg", "sensitivity_aspect.svg", "error_breakdown.svg",
          "mislocalisation.svg", "merged_groups.svg", "category_distribution.svg",
          "uncertainty_by_distance_relative_entropy.svg"}) {
        EXPECT_TRUE(fs::exists(cfg.out_dir / "charts" / name)) << name;
    }

    // CSV cells are exact reprints of the JSON values.
    json doc = json::parse(read_file(cfg.out_dir / "report.json"));
    std::string metrics_csv = read_file(cfg.out_dir / "tables" / "metrics.csv");
    EXPECT_NE(metrics_csv.find("\r\n"), std::string::npos);
    for (const auto& row : doc["sections"]["metrics"]["per_class"]) {
        if (!row.contains("accuracy")) continue;
        std::string cell = row["accuracy"].dump();
        EXPECT_NE(metrics_csv.find(cell), std::string::npos)
            << "accuracy cell " << cell << " missing from metrics.csv";
    }

    // Charts embed their data points as data-* attributes.
    std::string svg = read_file(cfg.out_dir / "charts" / "mislocalisation.svg");
    EXPECT_NE(svg.find("data-series"), std::string::npos);
    EXPECT_NE(svg.find("<svg"), std::string::npos);

    // export reproduces byte-identical tables.
    fs::path second = dir_->path / "out2";
    export_outputs(cfg.out_dir / "report.json", second);
    EXPECT_EQ(read_file(second / "tables" / "metrics.csv"),
              read_file(cfg.out_dir / "tables" / "metrics.csv"));
    EXPECT_EQ(read_file(second / "tables" / "mislocalisation.csv"),
              read_file(cfg.out_dir / "tables" / "mislocalisation.csv"));
    EXPECT_EQ(read_file(second / "charts" / "error_breakdown.svg"),
              read_file(cfg.out_dir / "charts" / "error_breakdown.svg"));

    EXPECT_THROW(export_outputs(dir_->path / "missing.json", second), RunError);
}

TEST_F(ReportRun, CsvQuotingIsRfc4180) {
    // A class name with comma and quote must round-trip through quoting.
    TempDir tmp;
    json tax{{"classes", json::array({{{"id", 0}, {"name", "bg"}},
                                      {{"id", 1}, {"name", "tricky, \"name\""}}})},
             {"background_id", 0},
             {"groups", json::object()}};
    std::ofstream(tmp.path / "tax.json") << tax.dump();
    LabelMap gt(4, 4, 1);
    write_label_png(tmp.path / "gt.png", gt);
    write_label_png(tmp.path / "pred.png", gt);
    json doc{{"dataset", "quoting"},
             {"taxonomy_path", "tax.json"},
             {"records", json::array({{{"image_id", "a"},
                                       {"gt", "gt.png"},
                                       {"pred", "pred.png"}}})}};
    std::ofstream(tmp.path / "manifest.json") << doc.dump();

    Manifest m = load_manifest(tmp.path / "manifest.json");
    RunConfig cfg;
    cfg.analyses = parse_analyses("metrics");
    cfg.out_dir = tmp.path / "out";
    DiagnosticsReport report = run(m, cfg);
    write_report(report, cfg.out_dir);
    std::string csv = read_file(cfg.out_dir / "tables" / "metrics.csv");
    EXPECT_NE(csv.find("\"tricky, \"\"name\"\"\""), std::string::npos);
}
