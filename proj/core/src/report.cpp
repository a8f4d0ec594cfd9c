#include "segdiag/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "emit.hpp"

namespace segdiag {
namespace {

using nlohmann::ordered_json;

struct AnalysisName {
    Analysis analysis;
    const char* name;
};

constexpr AnalysisName kAnalysisNames[] = {
    {Analysis::metrics, "metrics"},
    {Analysis::topn, "topn"},
    {Analysis::merged_groups, "merged_groups"},
    {Analysis::sensitivity, "sensitivity"},
    {Analysis::category_distribution, "category_distribution"},
    {Analysis::error_breakdown, "error_breakdown"},
    {Analysis::mislocalisation, "mislocalisation"},
    {Analysis::uncertainty_distance, "uncertainty_distance"},
    {Analysis::uncertainty_category, "uncertainty_category"},
    {Analysis::uncertainty_error_type, "uncertainty_error_type"},
    {Analysis::fgbg, "fgbg"},
    {Analysis::refine, "refine"},
};

ordered_json edge_to_json(double edge) {
    if (std::isinf(edge)) return "inf";
    return edge;
}

double edge_from_json(const ordered_json& j) {
    if (j.is_string()) {
        if (j.get<std::string>() == "inf") return std::numeric_limits<double>::infinity();
        throw std::runtime_error("distance bin edge must be a number or \"inf\"");
    }
    return j.get<double>();
}

ordered_json config_to_json_impl(const RunConfig& c, bool include_runtime) {
    ordered_json j;
    ordered_json analyses = ordered_json::array();
    for (Analysis a : c.analyses) analyses.push_back(to_string(a));
    j["analyses"] = analyses;
    j["misloc_radii"] = c.misloc_radii;
    ordered_json edges = ordered_json::array();
    for (double e : c.distance_bin_edges) edges.push_back(edge_to_json(e));
    j["distance_bin_edges"] = edges;
    j["topn_max"] = c.topn_max;
    j["exclude_background_gt"] = c.exclude_background_gt;
    j["bin_scope"] = c.bin_scope == BinScope::global ? "global" : "per_class";
    if (c.bin_scheme_path) j["bin_scheme_path"] = c.bin_scheme_path->string();
    ordered_json measures = ordered_json::array();
    for (UncertaintyMeasure m : c.measures) measures.push_back(to_string(m));
    j["measures"] = measures;
    j["boundary_mode"] = c.boundary_mode == BoundaryMode::same_class ? "same_class" : "any_class";
    j["error_uncertainty_radius"] = c.error_uncertainty_radius;
    if (c.expected_score_kind) {
        j["expected_score_kind"] =
            *c.expected_score_kind == ScoreKind::logits ? "logits" : "probabilities";
    }
    j["auto_resize_scores"] = c.auto_resize_scores;
    if (c.exclude_correctable_radius) {
        j["exclude_correctable_radius"] = *c.exclude_correctable_radius;
    }
    ordered_json refine;
    refine["target_classes"] = c.refine.target_classes;
    refine["crop_side"] = c.refine.crop_side;
    refine["upsample_factor"] = c.refine.upsample_factor;
    refine["mode"] = c.refine.mode == RefineMode::gt_bbox ? "gt_bbox" : "max_activation";
    refine["bbox_margin"] = c.refine.bbox_margin;
    refine["scorer"] = ordered_json{{"command", c.refine.scorer.command},
                                    {"timeout_seconds", c.refine.scorer.timeout_seconds}};
    j["refine"] = refine;
    j["seed"] = c.seed;
    if (include_runtime) {
        j["jobs"] = c.jobs;
        j["out_dir"] = c.out_dir.string();
    }
    return j;
}

RunConfig config_from_json(const ordered_json& j) {
    RunConfig c;
    if (j.contains("analyses")) {
        c.analyses.clear();
        for (const auto& name : j.at("analyses")) {
            auto parsed = parse_analyses(name.get<std::string>());
            c.analyses.insert(parsed.begin(), parsed.end());
        }
    }
    if (j.contains("misloc_radii")) c.misloc_radii = j.at("misloc_radii").get<std::vector<int>>();
    if (j.contains("distance_bin_edges")) {
        c.distance_bin_edges.clear();
        for (const auto& e : j.at("distance_bin_edges")) {
            c.distance_bin_edges.push_back(edge_from_json(e));
        }
    }
    c.topn_max = j.value("topn_max", c.topn_max);
    c.exclude_background_gt = j.value("exclude_background_gt", c.exclude_background_gt);
    if (j.contains("bin_scope")) {
        std::string scope = j.at("bin_scope").get<std::string>();
        if (scope == "global") {
            c.bin_scope = BinScope::global;
        } else if (scope == "per_class") {
            c.bin_scope = BinScope::per_class;
        } else {
            throw std::runtime_error("bin_scope must be per_class or global");
        }
    }
    if (j.contains("bin_scheme_path")) {
        c.bin_scheme_path = std::filesystem::path(j.at("bin_scheme_path").get<std::string>());
    }
    if (j.contains("measures")) {
        c.measures.clear();
        for (const auto& m : j.at("measures")) {
            c.measures.push_back(uncertainty_measure_from_string(m.get<std::string>()));
        }
    }
    if (j.contains("boundary_mode")) {
        std::string mode = j.at("boundary_mode").get<std::string>();
        if (mode == "same_class") {
            c.boundary_mode = BoundaryMode::same_class;
        } else if (mode == "any_class") {
            c.boundary_mode = BoundaryMode::any_class;
        } else {
            throw std::runtime_error("boundary_mode must be any_class or same_class");
        }
    }
    c.error_uncertainty_radius = j.value("error_uncertainty_radius", c.error_uncertainty_radius);
    if (j.contains("expected_score_kind")) {
        std::string kind = j.at("expected_score_kind").get<std::string>();
        if (kind == "logits") {
            c.expected_score_kind = ScoreKind::logits;
        } else if (kind == "probabilities") {
            c.expected_score_kind = ScoreKind::probabilities;
        } else {
            throw std::runtime_error("expected_score_kind must be probabilities or logits");
        }
    }
    c.auto_resize_scores = j.value("auto_resize_scores", c.auto_resize_scores);
    if (j.contains("exclude_correctable_radius")) {
        c.exclude_correctable_radius = j.at("exclude_correctable_radius").get<int>();
    }
    if (j.contains("refine")) {
        const auto& r = j.at("refine");
        if (r.contains("target_classes")) {
            c.refine.target_classes = r.at("target_classes").get<std::vector<ClassId>>();
        }
        c.refine.crop_side = r.value("crop_side", c.refine.crop_side);
        c.refine.upsample_factor = r.value("upsample_factor", c.refine.upsample_factor);
        if (r.contains("mode")) {
            std::string mode = r.at("mode").get<std::string>();
            if (mode == "gt_bbox") {
                c.refine.mode = RefineMode::gt_bbox;
            } else if (mode == "max_activation") {
                c.refine.mode = RefineMode::max_activation;
            } else {
                throw std::runtime_error("refine mode must be max_activation or gt_bbox");
            }
        }
        c.refine.bbox_margin = r.value("bbox_margin", c.refine.bbox_margin);
        if (r.contains("scorer")) {
            c.refine.scorer.command = r.at("scorer").value("command", std::string{});
            c.refine.scorer.timeout_seconds =
                r.at("scorer").value("timeout_seconds", c.refine.scorer.timeout_seconds);
        }
    }
    c.jobs = j.value("jobs", c.jobs);
    c.seed = j.value("seed", c.seed);
    if (j.contains("out_dir")) c.out_dir = j.at("out_dir").get<std::string>();
    return c;
}

ordered_json metrics_to_json(const ClassMetrics& m, const ConfusionMatrix& cm,
                             const Taxonomy& t) {
    ordered_json per_class = ordered_json::array();
    for (std::size_t i = 0; i < t.num_classes(); ++i) {
        std::uint64_t g = cm.gt_total(i);
        std::uint64_t p = cm.pred_total(i);
        if (g == 0 && p == 0) continue;
        ordered_json row;
        row["class_id"] = t.id_at(i);
        row["name"] = t.classes()[i].name;
        row["gt_pixels"] = g;
        row["pred_pixels"] = p;
        if (m.accuracy[i]) row["accuracy"] = *m.accuracy[i];
        if (m.iou[i]) row["iou"] = *m.iou[i];
        per_class.push_back(row);
    }
    ordered_json j;
    j["per_class"] = per_class;
    j["pixels"] = cm.total();
    j["total_pixel_accuracy"] = m.total_pixel_accuracy;
    j["mean_class_accuracy"] = m.mean_class_accuracy;
    j["mean_iou"] = m.mean_iou;
    return j;
}

ordered_json bin_stats_to_json(const BinStats& s) {
    ordered_json j;
    j["count"] = s.count;
    if (s.count > 0) j["mean"] = s.mean;
    if (s.std_error) j["std_error"] = *s.std_error;
    return j;
}

ordered_json sensitivity_to_json(const SensitivityReport& rep, const Taxonomy& t) {
    auto table = [&](bool aspect) {
        ordered_json rows = ordered_json::array();
        for (const ClassSensitivity& cs : rep.classes) {
            ordered_json row;
            row["class_id"] = cs.class_id;
            row["name"] = t.name_of(cs.class_id);
            ordered_json bins;
            for (std::size_t b = 0; b < kNumBins; ++b) {
                const char* name = aspect ? to_string(static_cast<AspectBin>(b))
                                          : to_string(static_cast<SizeBin>(b));
                bins[name] = bin_stats_to_json(aspect ? cs.by_aspect[b] : cs.by_size[b]);
            }
            row["bins"] = bins;
            row["overall"] = bin_stats_to_json(cs.overall);
            rows.push_back(row);
        }
        return rows;
    };
    ordered_json j;
    j["size"] = table(false);
    j["aspect"] = table(true);
    return j;
}

ordered_json quartiles_bin_json(const DistanceBinnedSamples& s, std::size_t bin) {
    ordered_json j;
    j["low"] = edge_to_json(s.edges[bin]);
    j["high"] = edge_to_json(s.edges[bin + 1]);
    j["count"] = s.samples[bin].size();
    if (!s.samples[bin].empty()) {
        Quartiles q = quartiles(s.samples[bin]);
        j["q25"] = q.q25;
        j["median"] = q.median;
        j["q75"] = q.q75;
    }
    return j;
}

ordered_json mean_json(const MeanAccumulator& acc) {
    ordered_json j;
    j["count"] = acc.count;
    if (auto m = acc.mean()) j["mean"] = *m;
    return j;
}

}  // namespace

const char* to_string(Analysis a) {
    for (const auto& entry : kAnalysisNames) {
        if (entry.analysis == a) return entry.name;
    }
    return "?";
}

std::set<Analysis> default_analyses() {
    std::set<Analysis> all;
    for (const auto& entry : kAnalysisNames) {
        if (entry.analysis != Analysis::refine) all.insert(entry.analysis);
    }
    return all;
}

std::set<Analysis> parse_analyses(const std::string& csv) {
    std::set<Analysis> out;
    std::stringstream ss(csv);
    std::string token;
    while (std::getline(ss, token, ',')) {
        token.erase(0, token.find_first_not_of(" \t"));
        token.erase(token.find_last_not_of(" \t") + 1);
        if (token.empty()) continue;
        if (token == "all") {
            auto d = default_analyses();
            out.insert(d.begin(), d.end());
            continue;
        }
        if (token == "uncertainty") {
            out.insert(Analysis::uncertainty_distance);
            out.insert(Analysis::uncertainty_category);
            out.insert(Analysis::uncertainty_error_type);
            out.insert(Analysis::fgbg);
            continue;
        }
        bool found = false;
        for (const auto& entry : kAnalysisNames) {
            if (token == entry.name) {
                out.insert(entry.analysis);
                found = true;
                break;
            }
        }
        if (!found) {
            throw RunError(1, "unknown analysis: " + token);
        }
    }
    if (out.empty()) throw RunError(1, "empty analysis list");
    return out;
}

std::string run_config_to_json(const RunConfig& config) {
    return config_to_json_impl(config, true).dump(2);
}

RunConfig run_config_from_json_text(const std::string& text) {
    try {
        return config_from_json(ordered_json::parse(text));
    } catch (const nlohmann::json::exception& e) {
        throw RunError(1, std::string("invalid config: ") + e.what());
    }
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw RunError(1, "cannot open config file: " + path.string());
    }
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    try {
        return run_config_from_json_text(text);
    } catch (const RunError&) {
        throw;
    } catch (const std::exception& e) {
        throw RunError(1, "invalid config " + path.string() + ": " + e.what());
    }
}

namespace detail {

ordered_json build_report_json(const DiagnosticsReport& report) {
    const Taxonomy& t = *report.taxonomy;
    ordered_json j;

    ordered_json meta;
    meta["tool"] = "segdiag";
    meta["version"] = "0.1.0";
    meta["manifest"] = report.manifest_path;
    meta["dataset"] = report.dataset;
    meta["taxonomy_hash"] = report.taxonomy_hash;
    meta["timestamp"] = report.timestamp;
    meta["images_total"] = report.images_total;
    meta["images_evaluated"] = report.images_evaluated;
    ordered_json failures = ordered_json::array();
    for (const auto& [id, message] : report.failures) {
        failures.push_back(ordered_json{{"image_id", id}, {"error", message}});
    }
    meta["failures"] = failures;
    meta["notes"] = report.notes;
    meta["config"] = config_to_json_impl(report.config, false);
    j["metadata"] = meta;

    ordered_json tax;
    ordered_json classes = ordered_json::array();
    for (const ClassDef& c : t.classes()) {
        classes.push_back(ordered_json{{"id", c.id}, {"name", c.name}});
    }
    tax["classes"] = classes;
    if (t.background_id()) tax["background_id"] = *t.background_id();
    tax["ignore_id"] = t.ignore_id();
    ordered_json groups = ordered_json::object();
    for (const SemanticGroup& g : t.groups()) groups[g.name] = g.members;
    tax["groups"] = groups;
    j["taxonomy"] = tax;

    if (report.bin_scheme) {
        ordered_json scheme = ordered_json::parse(bin_scheme_to_json(*report.bin_scheme));
        j["bin_scheme"] = scheme;
    }

    ordered_json sections = ordered_json::object();
    if (report.metrics && report.confusion) {
        ordered_json m = metrics_to_json(*report.metrics, *report.confusion, t);
        ordered_json confusion = ordered_json::array();
        for (std::size_t i = 0; i < report.confusion->num_classes(); ++i) {
            ordered_json row = ordered_json::array();
            for (std::size_t k = 0; k < report.confusion->num_classes(); ++k) {
                row.push_back(report.confusion->at(i, k));
            }
            confusion.push_back(row);
        }
        m["confusion"] = confusion;
        sections["metrics"] = m;
    }
    if (!report.topn.empty()) {
        ordered_json arr = ordered_json::array();
        for (const TopnEntry& e : report.topn) {
            ordered_json row = metrics_to_json(e.metrics, e.confusion, t);
            row["n"] = e.n;
            arr.push_back(row);
        }
        sections["topn"] = arr;
    }
    if (report.merged_groups) {
        const MergedGroupMetrics& mg = *report.merged_groups;
        ordered_json per_class = ordered_json::array();
        for (std::size_t i = 0; i < t.num_classes(); ++i) {
            if (!report.confusion || report.confusion->gt_total(i) == 0) continue;
            ordered_json row;
            row["class_id"] = t.id_at(i);
            row["name"] = t.classes()[i].name;
            row["representative"] = mg.representative[i];
            row["gt_pixels"] = report.confusion->gt_total(i);
            if (report.metrics && report.metrics->accuracy[i]) {
                row["accuracy"] = *report.metrics->accuracy[i];
            }
            if (mg.merged_accuracy[i]) row["merged_accuracy"] = *mg.merged_accuracy[i];
            if (mg.accuracy_gain[i]) row["accuracy_gain"] = *mg.accuracy_gain[i];
            per_class.push_back(row);
        }
        ordered_json m;
        m["per_class"] = per_class;
        m["merged_metrics"] = metrics_to_json(mg.merged_metrics, mg.merged, t);
        sections["merged_groups"] = m;
    }
    if (report.sensitivity) {
        sections["sensitivity"] = sensitivity_to_json(*report.sensitivity, t);
    }
    if (!report.category_distribution.empty()) {
        ordered_json arr = ordered_json::array();
        for (const CategoryDistribution& d : report.category_distribution) {
            ordered_json row;
            row["class_id"] = d.class_id;
            row["name"] = t.name_of(d.class_id);
            ordered_json counts = ordered_json::array();
            for (std::size_t s = 0; s < kNumBins; ++s) {
                ordered_json inner = ordered_json::array();
                for (std::size_t a = 0; a < kNumBins; ++a) inner.push_back(d.counts[s][a]);
                counts.push_back(inner);
            }
            row["counts"] = counts;
            row["size_marginal"] = d.size_marginal;
            row["aspect_marginal"] = d.aspect_marginal;
            row["total"] = d.total;
            arr.push_back(row);
        }
        sections["category_distribution"] = arr;
    }
    if (report.error_breakdown) {
        ordered_json per_class = ordered_json::array();
        ErrorCounts totals;
        for (std::size_t i = 0; i < report.error_breakdown->per_class.size(); ++i) {
            const ErrorCounts& c = report.error_breakdown->per_class[i];
            totals.background += c.background;
            totals.similar += c.similar;
            totals.dissimilar += c.dissimilar;
            if (c.total() == 0) continue;
            ordered_json row;
            row["class_id"] = t.id_at(i);
            row["name"] = t.classes()[i].name;
            row["background"] = c.background;
            row["similar"] = c.similar;
            row["dissimilar"] = c.dissimilar;
            row["total"] = c.total();
            double total = static_cast<double>(c.total());
            row["proportions"] =
                ordered_json{{"background", static_cast<double>(c.background) / total},
                             {"similar", static_cast<double>(c.similar) / total},
                             {"dissimilar", static_cast<double>(c.dissimilar) / total}};
            per_class.push_back(row);
        }
        ordered_json e;
        e["per_class"] = per_class;
        e["totals"] = ordered_json{{"background", totals.background},
                                   {"similar", totals.similar},
                                   {"dissimilar", totals.dissimilar},
                                   {"total", totals.total()}};
        sections["error_breakdown"] = e;
    }
    if (report.mislocalisation) {
        const MislocalisationGain& mg = *report.mislocalisation;
        ordered_json m;
        m["radii"] = mg.radii;
        m["baseline"] = metrics_to_json(class_metrics(mg.baseline), mg.baseline, t);
        ordered_json corrected = ordered_json::array();
        for (std::size_t k = 0; k < mg.radii.size(); ++k) {
            ordered_json row = metrics_to_json(class_metrics(mg.corrected[k]), mg.corrected[k], t);
            row["radius"] = mg.radii[k];
            corrected.push_back(row);
        }
        m["corrected"] = corrected;
        sections["mislocalisation"] = m;
    }
    if (!report.uncertainty.empty()) {
        ordered_json arr = ordered_json::array();
        for (const UncertaintySection& u : report.uncertainty) {
            ordered_json row;
            row["measure"] = to_string(u.measure);
            if (u.by_distance) {
                ordered_json edges = ordered_json::array();
                for (double e : u.by_distance->edges) edges.push_back(edge_to_json(e));
                ordered_json bins = ordered_json::array();
                for (std::size_t b = 0; b < u.by_distance->samples.size(); ++b) {
                    bins.push_back(quartiles_bin_json(*u.by_distance, b));
                }
                row["by_distance"] = ordered_json{{"edges", edges}, {"bins", bins}};
            }
            if (u.by_category) {
                row["by_category"] = sensitivity_to_json(*u.by_category, t);
            }
            if (u.by_error_type) {
                row["by_error_type"] =
                    ordered_json{{"baseline", mean_json(u.by_error_type->baseline)},
                                 {"misloc", mean_json(u.by_error_type->misloc)},
                                 {"background", mean_json(u.by_error_type->background)},
                                 {"similar", mean_json(u.by_error_type->similar)},
                                 {"dissimilar", mean_json(u.by_error_type->dissimilar)}};
            }
            if (u.fgbg) {
                FgbgResult res = fgbg_result(*u.fgbg);
                row["fgbg"] = ordered_json{{"tp", u.fgbg->tp},       {"fp", u.fgbg->fp},
                                           {"tn", u.fgbg->tn},       {"fn", u.fgbg->fn},
                                           {"precision", res.precision},
                                           {"recall", res.recall},
                                           {"accuracy", res.accuracy}};
            }
            arr.push_back(row);
        }
        sections["uncertainty"] = arr;
    }
    if (report.refinement) {
        ordered_json cases = ordered_json::array();
        for (const RefineCase& c : report.refinement->cases) {
            cases.push_back(ordered_json{{"image_id", c.image_id},
                                         {"class_id", c.class_id},
                                         {"instance_id", c.instance_id},
                                         {"size_bin", to_string(c.size_bin)},
                                         {"accuracy_before", c.accuracy_before},
                                         {"accuracy_after", c.accuracy_after}});
        }
        ordered_json rows = ordered_json::array();
        for (const RefineClassRow& r : report.refinement->rows) {
            ordered_json row;
            row["class_id"] = r.class_id;
            row["name"] = t.name_of(r.class_id);
            row["count_xs"] = r.count_xs;
            row["count_s"] = r.count_s;
            auto put = [&row](const char* key, const std::optional<double>& v) {
                if (v) row[key] = *v;
            };
            put("acc_xs_before", r.acc_xs_before);
            put("acc_xs_after", r.acc_xs_after);
            put("acc_s_before", r.acc_s_before);
            put("acc_s_after", r.acc_s_after);
            put("iou_before", r.iou_before);
            put("iou_after", r.iou_after);
            put("acc_before", r.acc_before);
            put("acc_after", r.acc_after);
            rows.push_back(row);
        }
        sections["refinement"] = ordered_json{{"cases", cases}, {"classes", rows}};
    }
    j["sections"] = sections;
    return j;
}

std::string taxonomy_fingerprint(const Taxonomy& t) {
    ordered_json tax;
    ordered_json classes = ordered_json::array();
    for (const ClassDef& c : t.classes()) {
        classes.push_back(ordered_json{{"id", c.id}, {"name", c.name}});
    }
    tax["classes"] = classes;
    if (t.background_id()) tax["background_id"] = *t.background_id();
    tax["ignore_id"] = t.ignore_id();
    ordered_json groups = ordered_json::object();
    for (const SemanticGroup& g : t.groups()) groups[g.name] = g.members;
    tax["groups"] = groups;
    std::string text = tax.dump();
    std::uint64_t hash = 1469598103934665603ull;
    for (unsigned char ch : text) {
        hash ^= ch;
        hash *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash));
    return buf;
}

}  // namespace detail

std::string report_to_json(const DiagnosticsReport& report) {
    return detail::build_report_json(report).dump(2) + "\n";
}

void write_report(const DiagnosticsReport& report, const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    ordered_json j = detail::build_report_json(report);
    {
        std::ofstream out(out_dir / "report.json", std::ios::binary | std::ios::trunc);
        if (!out) {
            throw std::runtime_error("cannot write report.json under " + out_dir.string());
        }
        out << j.dump(2) << '\n';
    }
    detail::write_tables(j, out_dir);
    detail::write_charts(j, out_dir);
}

void export_outputs(const std::filesystem::path& report_json,
                    const std::filesystem::path& out_dir) {
    std::ifstream in(report_json);
    if (!in) {
        throw RunError(1, "cannot open report: " + report_json.string());
    }
    ordered_json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw RunError(1, "invalid report " + report_json.string() + ": " + e.what());
    }
    std::filesystem::create_directories(out_dir);
    detail::write_tables(j, out_dir);
    detail::write_charts(j, out_dir);
}

}  // namespace segdiag
