#include <CLI11.hpp>

#include <cstdio>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "segdiag/report.hpp"
#include "segdiag/synth.hpp"

namespace {

using segdiag::RunConfig;
using segdiag::RunError;

struct RunFlags {
    std::string manifest;
    std::string config_path;
    std::string out;
    std::string analyses;
    std::string misloc_radii;
    std::string bin_scheme;
    std::string measures;
    std::string bin_scope;
    int jobs = 0;
    int topn = 0;
    bool exclude_bg_gt = false;
};

void add_run_flags(CLI::App& cmd, RunFlags& f, bool manifest_required = true) {
    auto* m = cmd.add_option("--manifest", f.manifest, "Dataset manifest JSON");
    if (manifest_required) m->required();
    cmd.add_option("--config", f.config_path, "RunConfig JSON; flags override its values");
    cmd.add_option("--out", f.out, "Output directory (report.json, tables/, charts/)");
    cmd.add_option("--jobs", f.jobs, "Worker threads");
    cmd.add_option("--analyses", f.analyses,
                   "Comma-separated analyses (or 'all' / 'uncertainty')");
    cmd.add_option("--misloc-radii", f.misloc_radii, "Comma-separated correction radii");
    cmd.add_option("--topn", f.topn, "Evaluate top-1..top-N metrics");
    cmd.add_flag("--exclude-bg-gt", f.exclude_bg_gt,
                 "Skip pixels whose ground truth is the background class");
    cmd.add_option("--bin-scheme", f.bin_scheme, "Reuse a fitted bin scheme JSON");
    cmd.add_option("--bin-scope", f.bin_scope, "per_class or global percentile fitting");
    cmd.add_option("--measures", f.measures,
                   "Comma-separated uncertainty measures (relative_entropy,"
                   "relative_probability)");
}

std::vector<int> parse_int_list(const std::string& csv) {
    std::vector<int> out;
    std::string token;
    std::stringstream ss(csv);
    while (std::getline(ss, token, ',')) {
        if (token.empty()) continue;
        try {
            out.push_back(std::stoi(token));
        } catch (const std::exception&) {
            throw RunError(1, "expected an integer list, got: " + csv);
        }
    }
    return out;
}

RunConfig build_config(const RunFlags& f) {
    RunConfig cfg;
    if (!f.config_path.empty()) cfg = segdiag::load_run_config(f.config_path);
    if (!f.analyses.empty()) cfg.analyses = segdiag::parse_analyses(f.analyses);
    if (!f.misloc_radii.empty()) cfg.misloc_radii = parse_int_list(f.misloc_radii);
    if (f.topn > 0) cfg.topn_max = f.topn;
    if (f.exclude_bg_gt) cfg.exclude_background_gt = true;
    if (f.jobs > 0) cfg.jobs = f.jobs;
    if (!f.out.empty()) cfg.out_dir = f.out;
    if (!f.bin_scheme.empty()) cfg.bin_scheme_path = f.bin_scheme;
    if (!f.bin_scope.empty()) {
        if (f.bin_scope == "global") {
            cfg.bin_scope = segdiag::BinScope::global;
        } else if (f.bin_scope == "per_class") {
            cfg.bin_scope = segdiag::BinScope::per_class;
        } else {
            throw RunError(1, "--bin-scope must be per_class or global");
        }
    }
    if (!f.measures.empty()) {
        cfg.measures.clear();
        std::string token;
        std::stringstream ss(f.measures);
        while (std::getline(ss, token, ',')) {
            if (!token.empty()) {
                cfg.measures.push_back(segdiag::uncertainty_measure_from_string(token));
            }
        }
    }
    return cfg;
}

int run_and_write(const std::string& manifest_path, const RunConfig& cfg) {
    segdiag::Manifest manifest;
    try {
        manifest = segdiag::load_manifest(manifest_path);
    } catch (const std::exception& e) {
        throw RunError(1, e.what());
    }
    segdiag::DiagnosticsReport report = segdiag::run(manifest, cfg);
    segdiag::write_report(report, cfg.out_dir);
    std::printf("evaluated %zu/%zu images; wrote %s\n", report.images_evaluated,
                report.images_total, (cfg.out_dir / "report.json").string().c_str());
    for (const auto& [id, msg] : report.failures) {
        std::fprintf(stderr, "warning: %s: %s\n", id.c_str(), msg.c_str());
    }
    for (const std::string& note : report.notes) {
        std::fprintf(stderr, "note: %s\n", note.c_str());
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Semantic-segmentation diagnostics"};
    app.require_subcommand(1);

    RunFlags run_flags;
    CLI::App* run_cmd = app.add_subcommand("run", "Evaluate a manifest and write a report");
    add_run_flags(*run_cmd, run_flags);

    RunFlags refine_flags;
    std::string scorer_cmd;
    std::vector<int> refine_classes;
    CLI::App* refine_cmd =
        app.add_subcommand("refine", "Run only the zoom-in refinement harness");
    add_run_flags(*refine_cmd, refine_flags);
    refine_cmd->add_option("--scorer", scorer_cmd,
                           "Scorer command with {input} and {output} placeholders");
    refine_cmd->add_option("--classes", refine_classes, "Target class ids");

    std::string synth_spec;
    std::string synth_out;
    CLI::App* synth_cmd = app.add_subcommand("synth", "Generate a synthetic dataset");
    synth_cmd->add_option("--spec", synth_spec, "SceneSpec JSON (object or array)")->required();
    synth_cmd->add_option("--out", synth_out, "Output directory")->required();

    std::string export_report;
    std::string export_out;
    CLI::App* export_cmd =
        app.add_subcommand("export", "Re-emit tables and charts from a report.json");
    export_cmd->add_option("--report", export_report, "Existing report.json")->required();
    export_cmd->add_option("--out", export_out, "Output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (run_cmd->parsed()) {
            return run_and_write(run_flags.manifest, build_config(run_flags));
        }
        if (refine_cmd->parsed()) {
            RunConfig cfg = build_config(refine_flags);
            if (refine_flags.analyses.empty()) {
                cfg.analyses = {segdiag::Analysis::refine};
            }
            if (!scorer_cmd.empty()) cfg.refine.scorer.command = scorer_cmd;
            if (!refine_classes.empty()) {
                cfg.refine.target_classes.assign(refine_classes.begin(), refine_classes.end());
            }
            return run_and_write(refine_flags.manifest, cfg);
        }
        if (synth_cmd->parsed()) {
            std::vector<segdiag::synth::SceneSpec> specs;
            try {
                specs = segdiag::synth::load_scene_specs(synth_spec);
            } catch (const std::exception& e) {
                throw RunError(1, e.what());
            }
            auto manifest = segdiag::synth::write_synth_dataset(synth_out, specs);
            std::printf("wrote %zu scenes; manifest at %s\n", specs.size(),
                        manifest.string().c_str());
            return 0;
        }
        if (export_cmd->parsed()) {
            segdiag::export_outputs(export_report, export_out);
            std::printf("wrote tables and charts under %s\n", export_out.c_str());
            return 0;
        }
    } catch (const RunError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return e.exit_code();
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
