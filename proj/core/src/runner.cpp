#include <algorithm>
#include <atomic>
#include <ctime>
#include <map>
#include <set>
#include <thread>
#include <vector>

#include "emit.hpp"
#include "segdiag/png_io.hpp"
#include "segdiag/report.hpp"
#include "segdiag/resample.hpp"

namespace segdiag {
namespace {

/// Which per-image quantities the enabled analyses require.
struct Needs {
    bool confusion = false;
    bool topn = false;
    bool errors = false;
    bool misloc = false;
    bool instances = false;
    bool accuracy = false;  // per-instance accuracy
    bool scores = false;
    bool by_distance = false;
    bool by_category = false;
    bool by_error_type = false;
    bool fgbg = false;
};

Needs derive_needs(const std::set<Analysis>& analyses) {
    Needs n;
    auto on = [&](Analysis a) { return analyses.count(a) > 0; };
    n.confusion = on(Analysis::metrics) || on(Analysis::merged_groups) ||
                  on(Analysis::mislocalisation);
    n.topn = on(Analysis::topn);
    n.errors = on(Analysis::error_breakdown);
    n.misloc = on(Analysis::mislocalisation);
    n.instances = on(Analysis::sensitivity) || on(Analysis::category_distribution) ||
                  on(Analysis::uncertainty_category) || on(Analysis::refine);
    n.accuracy = on(Analysis::sensitivity) || on(Analysis::refine);
    n.by_distance = on(Analysis::uncertainty_distance);
    n.by_category = on(Analysis::uncertainty_category);
    n.by_error_type = on(Analysis::uncertainty_error_type);
    n.fgbg = on(Analysis::fgbg);
    n.scores = n.topn || n.by_distance || n.by_category || n.by_error_type || n.fgbg ||
               on(Analysis::refine);
    return n;
}

struct MeasurePartial {
    DistanceBinnedSamples by_distance;
    std::vector<double> instance_uncertainty;  // parallel to ImagePartial::instances
    ErrorTypeUncertainty by_error_type;
    FgbgCounts fgbg;
};

struct ImagePartial {
    bool ok = false;
    std::string error;
    ConfusionMatrix confusion;
    std::vector<ConfusionMatrix> topn;  // index n-1
    ErrorBreakdown errors;
    MislocalisationGain misloc;
    bool has_instances = false;
    std::vector<InstanceRecord> instances;
    std::vector<double> instance_accuracy;
    std::vector<MeasurePartial> measures;  // parallel to config.measures
};

struct RunContext {
    const Taxonomy& t;
    const RunConfig& cfg;
    Needs needs;
    bool fgbg_effective = false;  // fgbg requested and taxonomy has a background class
    ConfusionOptions opts;
};

void validate_config(const RunConfig& cfg, const Needs& needs, const Taxonomy& t,
                     const Manifest& manifest) {
    if (cfg.jobs < 1) throw RunError(1, "jobs must be at least 1");
    if (cfg.analyses.empty()) throw RunError(1, "no analyses enabled");
    if (needs.topn) {
        if (cfg.topn_max < 1 || static_cast<std::size_t>(cfg.topn_max) > t.num_classes()) {
            throw RunError(1, "topn_max must be in [1, number of classes]");
        }
    }
    if (needs.misloc) {
        if (cfg.misloc_radii.empty()) throw RunError(1, "misloc_radii must not be empty");
        for (std::size_t i = 0; i < cfg.misloc_radii.size(); ++i) {
            if (cfg.misloc_radii[i] < 0) throw RunError(1, "misloc radii must be non-negative");
            if (i > 0 && cfg.misloc_radii[i] <= cfg.misloc_radii[i - 1]) {
                throw RunError(1, "misloc radii must be strictly ascending");
            }
        }
    }
    if (needs.by_distance) {
        if (cfg.distance_bin_edges.size() < 2) {
            throw RunError(1, "distance_bin_edges needs at least two entries");
        }
        for (std::size_t i = 1; i < cfg.distance_bin_edges.size(); ++i) {
            if (!(cfg.distance_bin_edges[i] > cfg.distance_bin_edges[i - 1])) {
                throw RunError(1, "distance_bin_edges must be strictly ascending");
            }
        }
    }
    if ((needs.by_distance || needs.by_category || needs.by_error_type || needs.fgbg) &&
        cfg.measures.empty()) {
        throw RunError(1, "uncertainty analyses enabled but measures is empty");
    }
    if (needs.by_error_type && cfg.error_uncertainty_radius < 0) {
        throw RunError(1, "error_uncertainty_radius must be non-negative");
    }
    if (cfg.exclude_correctable_radius && *cfg.exclude_correctable_radius < 0) {
        throw RunError(1, "exclude_correctable_radius must be non-negative");
    }
    if (cfg.analyses.count(Analysis::refine)) {
        const RefineConfig& r = cfg.refine;
        if (r.target_classes.empty()) throw RunError(1, "refine.target_classes must not be empty");
        for (ClassId id : r.target_classes) {
            if (!t.is_class(id)) {
                throw RunError(1, "refine target class " + std::to_string(id) +
                                      " is not in the taxonomy");
            }
        }
        if (r.crop_side < 1) throw RunError(1, "refine.crop_side must be positive");
        if (!(r.upsample_factor > 0)) throw RunError(1, "refine.upsample_factor must be positive");
        if (r.bbox_margin < 0) throw RunError(1, "refine.bbox_margin must be non-negative");
        if (r.scorer.command.find("{input}") == std::string::npos ||
            r.scorer.command.find("{output}") == std::string::npos) {
            throw RunError(1, "refine.scorer.command must contain {input} and {output}");
        }
        if (!(r.scorer.timeout_seconds > 0)) {
            throw RunError(1, "refine.scorer.timeout_seconds must be positive");
        }
    }
    if (needs.scores) {
        for (const ManifestRecord& rec : manifest.records) {
            if (!rec.scores) {
                throw RunError(1, "record '" + rec.image_id +
                                      "' has no score tensor but an enabled analysis "
                                      "(topn/uncertainty/fgbg/refine) requires scores");
            }
        }
    }
}

/// Loads whatever the record provides and produces the prediction label map.
struct LoadedImage {
    LabelMap gt;
    LabelMap pred;
    std::optional<ScoreTensor> scores;
    std::optional<InstanceMap> instances;
};

LoadedImage load_image(const ManifestRecord& rec, const RunContext& ctx, bool want_scores,
                       bool want_instances) {
    LoadedImage img;
    img.gt = load_label_png(rec.gt);
    if (rec.scores && (want_scores || !rec.pred)) {
        ScoreTensor scores = load_scores(*rec.scores, ctx.t, ctx.cfg.expected_score_kind);
        if (scores.height() != img.gt.height() || scores.width() != img.gt.width()) {
            if (!ctx.cfg.auto_resize_scores) {
                throw std::runtime_error("score tensor shape does not match gt (" +
                                         std::to_string(scores.height()) + "x" +
                                         std::to_string(scores.width()) + " vs " +
                                         std::to_string(img.gt.height()) + "x" +
                                         std::to_string(img.gt.width()) +
                                         "); set auto_resize_scores to resample");
            }
            scores = bicubic_resize(scores, img.gt.height(), img.gt.width());
            renormalize(scores);
        }
        img.pred = argmax_labels(scores, ctx.t);
        img.scores = std::move(scores);
    } else {
        img.pred = load_label_png(*rec.pred);
        if (img.pred.height() != img.gt.height() || img.pred.width() != img.gt.width()) {
            throw std::runtime_error("pred shape does not match gt");
        }
    }
    if (want_instances && rec.instances) {
        InstanceMap inst = load_instance_png(*rec.instances);
        if (inst.height() != img.gt.height() || inst.width() != img.gt.width()) {
            throw std::runtime_error("instance map shape does not match gt");
        }
        img.instances = std::move(inst);
    }
    return img;
}

ImagePartial process_image(const ManifestRecord& rec, const RunContext& ctx) {
    ImagePartial out;
    const Needs& needs = ctx.needs;
    LoadedImage img = load_image(rec, ctx, needs.scores, needs.instances);

    if (needs.confusion || needs.misloc) {
        out.confusion = accumulate_confusion(img.gt, img.pred, ctx.t, ctx.opts);
    }
    if (needs.topn) {
        for (int n = 1; n <= ctx.cfg.topn_max; ++n) {
            LabelMap eff = topn_prediction(img.gt, *img.scores, n, ctx.t);
            out.topn.push_back(accumulate_confusion(img.gt, eff, ctx.t, ctx.opts));
        }
    }
    if (needs.errors) {
        ErrorBreakdownOptions eopts;
        eopts.exclude_correctable_radius = ctx.cfg.exclude_correctable_radius;
        out.errors = error_breakdown(img.gt, img.pred, ctx.t, eopts);
    }
    if (needs.misloc) {
        out.misloc = mislocalisation_gain(img.gt, img.pred, out.confusion, ctx.t,
                                          ctx.cfg.misloc_radii, ctx.opts);
    }
    if (needs.instances && img.instances) {
        out.has_instances = true;
        InstanceClassOverrides overrides;
        const InstanceClassOverrides* ov = nullptr;
        if (rec.instance_classes) {
            overrides = load_instance_class_overrides(*rec.instance_classes);
            ov = &overrides;
        }
        out.instances = extract_instances(*img.instances, img.gt, ctx.t, rec.image_id, ov);
        if (needs.accuracy) {
            for (const InstanceRecord& r : out.instances) {
                out.instance_accuracy.push_back(
                    per_instance_accuracy(r, *img.instances, img.gt, img.pred, ctx.t));
            }
        }
    }

    bool any_measure = needs.by_distance || (needs.by_category && out.has_instances) ||
                       needs.by_error_type || ctx.fgbg_effective;
    if (any_measure) {
        std::optional<DistanceMap> dmap;
        if (needs.by_distance) {
            dmap = boundary_distance_map(img.gt, ctx.cfg.boundary_mode);
        }
        for (UncertaintyMeasure m : ctx.cfg.measures) {
            MeasurePartial mp;
            UncertaintyMap umap = uncertainty_map(*img.scores, m);
            if (needs.by_distance) {
                mp.by_distance = collect_by_distance(umap, *dmap, ctx.cfg.distance_bin_edges);
            }
            if (needs.by_category && out.has_instances) {
                for (const InstanceRecord& r : out.instances) {
                    mp.instance_uncertainty.push_back(
                        per_instance_mean_uncertainty(r, *img.instances, umap));
                }
            }
            if (needs.by_error_type) {
                mp.by_error_type = uncertainty_by_error_type(
                    img.gt, img.pred, umap, ctx.t, ctx.cfg.error_uncertainty_radius,
                    img.instances ? &*img.instances : nullptr);
            }
            if (ctx.fgbg_effective) {
                mp.fgbg = fgbg_counts(umap, img.gt, ctx.t);
            }
            out.measures.push_back(std::move(mp));
        }
    } else {
        out.measures.resize(ctx.cfg.measures.size());
    }
    out.ok = true;
    return out;
}

std::string utc_timestamp() {
    std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void run_refinement(DiagnosticsReport& report, const Manifest& manifest, const RunContext& ctx,
                    std::vector<std::pair<std::string, std::vector<InstanceRecord>>> per_image) {
    std::vector<RefineSelection> selections =
        select_single_small(per_image, ctx.cfg.refine.target_classes);
    if (selections.empty()) {
        report.notes.push_back("refine: no image has exactly one XS/S instance of a target class");
        return;
    }
    std::map<std::string, const ManifestRecord*> by_id;
    for (const ManifestRecord& rec : manifest.records) by_id[rec.image_id] = &rec;

    std::vector<RefineCase> cases;
    ConfusionMatrix before;
    ConfusionMatrix after;
    std::string loaded_id;
    LoadedImage img;
    std::optional<RgbImage> rgb;
    for (const RefineSelection& sel : selections) {
        const ManifestRecord& rec = *by_id.at(sel.image_id);
        if (!rec.image) {
            report.notes.push_back("refine: image '" + sel.image_id +
                                   "' has no RGB image; skipped");
            continue;
        }
        try {
            if (loaded_id != sel.image_id) {
                img = load_image(rec, ctx, true, true);
                rgb = load_rgb_png(*rec.image);
                loaded_id = sel.image_id;
            }
            CropRect crop =
                ctx.cfg.refine.mode == RefineMode::gt_bbox
                    ? gt_bbox_crop(sel.instance, ctx.cfg.refine.bbox_margin, img.gt.height(),
                                   img.gt.width())
                    : crop_around_max_activation(*img.scores, sel.instance.class_id,
                                                 ctx.cfg.refine.crop_side, ctx.t);
            RefineResult res = refine_image(*rgb, *img.scores, crop, ctx.cfg.refine, ctx.t);

            RefineCase c;
            c.image_id = sel.image_id;
            c.class_id = sel.instance.class_id;
            c.instance_id = sel.instance.instance_id;
            c.size_bin = *sel.instance.size_bin;
            c.accuracy_before =
                per_instance_accuracy(sel.instance, *img.instances, img.gt, img.pred, ctx.t);
            c.accuracy_after =
                per_instance_accuracy(sel.instance, *img.instances, img.gt, res.labels, ctx.t);
            before += accumulate_confusion(img.gt, img.pred, ctx.t, ctx.opts);
            after += accumulate_confusion(img.gt, res.labels, ctx.t, ctx.opts);
            cases.push_back(std::move(c));
        } catch (const std::exception& e) {
            report.notes.push_back("refine: image '" + sel.image_id +
                                   "' failed: " + std::string(e.what()));
        }
    }
    if (cases.empty()) {
        report.notes.push_back("refine: no case completed");
        return;
    }
    report.refinement = evaluate_refinement(cases, before, after, ctx.t);
}

}  // namespace

DiagnosticsReport run(const Manifest& manifest, const RunConfig& config) {
    Taxonomy t = load_taxonomy(manifest.taxonomy_path);

    RunContext ctx{t, config, derive_needs(config.analyses), false,
                   ConfusionOptions{config.exclude_background_gt}};
    validate_config(config, ctx.needs, t, manifest);

    DiagnosticsReport report;
    report.manifest_path = manifest.source.string();
    report.dataset = manifest.dataset;
    report.images_total = manifest.records.size();
    report.config = config;
    report.taxonomy = t;
    report.taxonomy_hash = detail::taxonomy_fingerprint(t);
    report.timestamp = utc_timestamp();

    ctx.fgbg_effective = ctx.needs.fgbg && t.background_id().has_value();
    if (ctx.needs.fgbg && !ctx.fgbg_effective) {
        report.notes.push_back("fgbg: taxonomy has no background class; skipped");
    }

    // Fork-join over images: each worker fills disjoint slots, the merge
    // below folds them in manifest order so the result is independent of
    // scheduling.
    std::vector<ImagePartial> slots(manifest.records.size());
    {
        std::atomic<std::size_t> next{0};
        unsigned workers = static_cast<unsigned>(
            std::min<std::size_t>(static_cast<std::size_t>(config.jobs), slots.size()));
        auto work = [&]() {
            for (;;) {
                std::size_t i = next.fetch_add(1);
                if (i >= slots.size()) break;
                try {
                    slots[i] = process_image(manifest.records[i], ctx);
                } catch (const std::exception& e) {
                    slots[i].ok = false;
                    slots[i].error = e.what();
                }
            }
        };
        if (workers <= 1) {
            work();
        } else {
            std::vector<std::thread> pool;
            for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
            for (std::thread& th : pool) th.join();
        }
    }

    ConfusionMatrix cm;
    std::vector<ConfusionMatrix> topn(ctx.needs.topn ? config.topn_max : 0);
    ErrorBreakdown errors;
    MislocalisationGain misloc;
    std::vector<std::pair<std::string, std::vector<InstanceRecord>>> per_image;
    std::vector<double> accuracies;
    std::size_t images_with_instances = 0;
    struct MeasureTotal {
        DistanceBinnedSamples by_distance;
        std::vector<double> instance_uncertainty;
        ErrorTypeUncertainty by_error_type;
        FgbgCounts fgbg;
    };
    std::vector<MeasureTotal> measure_totals(config.measures.size());

    for (std::size_t i = 0; i < slots.size(); ++i) {
        ImagePartial& p = slots[i];
        if (!p.ok) {
            report.failures.emplace_back(manifest.records[i].image_id, p.error);
            continue;
        }
        ++report.images_evaluated;
        cm += p.confusion;
        for (std::size_t n = 0; n < topn.size(); ++n) topn[n] += p.topn[n];
        errors += p.errors;
        misloc += p.misloc;
        if (p.has_instances) {
            ++images_with_instances;
            per_image.emplace_back(manifest.records[i].image_id, std::move(p.instances));
            accuracies.insert(accuracies.end(), p.instance_accuracy.begin(),
                              p.instance_accuracy.end());
        }
        for (std::size_t m = 0; m < measure_totals.size(); ++m) {
            MeasureTotal& total = measure_totals[m];
            MeasurePartial& part = p.measures[m];
            total.by_distance += part.by_distance;
            if (p.has_instances) {
                total.instance_uncertainty.insert(total.instance_uncertainty.end(),
                                                  part.instance_uncertainty.begin(),
                                                  part.instance_uncertainty.end());
            }
            total.by_error_type += part.by_error_type;
            total.fgbg += part.fgbg;
        }
    }
    if (report.images_evaluated == 0) {
        std::string cause = report.failures.empty()
                                ? std::string("manifest has no records")
                                : report.failures.front().first + ": " +
                                      report.failures.front().second;
        throw RunError(2, "no image could be evaluated (" + cause + ")");
    }

    bool have_instances = images_with_instances > 0;
    if (ctx.needs.instances && !have_instances) {
        report.notes.push_back(
            "no instance maps in manifest; instance analyses "
            "(sensitivity/category_distribution/uncertainty_category/refine) skipped");
    } else if (ctx.needs.instances && images_with_instances < report.images_evaluated) {
        report.notes.push_back("instance maps on " + std::to_string(images_with_instances) +
                               " of " + std::to_string(report.images_evaluated) +
                               " evaluated images; instance analyses cover that subset");
    }

    std::vector<InstanceRecord> all_records;
    if (have_instances) {
        BinScheme scheme;
        if (config.bin_scheme_path) {
            scheme = load_bin_scheme(*config.bin_scheme_path);
        } else {
            std::vector<InstanceRecord> flat;
            for (const auto& [id, recs] : per_image) {
                flat.insert(flat.end(), recs.begin(), recs.end());
            }
            scheme = fit_bins(flat, config.bin_scope);
        }
        try {
            for (auto& [id, recs] : per_image) assign_bins(recs, scheme);
        } catch (const std::exception& e) {
            throw RunError(1, std::string("bin scheme does not cover the data: ") + e.what());
        }
        for (const auto& [id, recs] : per_image) {
            all_records.insert(all_records.end(), recs.begin(), recs.end());
        }
        report.bin_scheme = std::move(scheme);
    }

    auto on = [&](Analysis a) { return config.analyses.count(a) > 0; };
    if (on(Analysis::metrics)) {
        report.metrics = class_metrics(cm);
    }
    if (on(Analysis::metrics) || on(Analysis::merged_groups)) {
        report.confusion = cm;
    }
    if (ctx.needs.topn) {
        for (std::size_t n = 0; n < topn.size(); ++n) {
            TopnEntry e;
            e.n = static_cast<int>(n + 1);
            e.metrics = class_metrics(topn[n]);
            e.confusion = std::move(topn[n]);
            report.topn.push_back(std::move(e));
        }
    }
    if (on(Analysis::merged_groups)) {
        report.merged_groups = merged_group_metrics(cm, t);
    }
    if (on(Analysis::sensitivity) && have_instances) {
        report.sensitivity = sensitivity(all_records, accuracies);
    }
    if (on(Analysis::category_distribution) && have_instances) {
        report.category_distribution = category_distribution(all_records);
    }
    if (on(Analysis::error_breakdown)) {
        if (errors.per_class.empty()) errors.per_class.resize(t.num_classes());
        report.error_breakdown = std::move(errors);
    }
    if (on(Analysis::mislocalisation)) {
        report.mislocalisation = std::move(misloc);
    }
    for (std::size_t m = 0; m < config.measures.size(); ++m) {
        UncertaintySection section;
        section.measure = config.measures[m];
        bool any = false;
        if (on(Analysis::uncertainty_distance)) {
            section.by_distance = std::move(measure_totals[m].by_distance);
            any = true;
        }
        if (on(Analysis::uncertainty_category) && have_instances) {
            section.by_category =
                sensitivity(all_records, measure_totals[m].instance_uncertainty);
            any = true;
        }
        if (on(Analysis::uncertainty_error_type)) {
            section.by_error_type = measure_totals[m].by_error_type;
            any = true;
        }
        if (ctx.fgbg_effective) {
            section.fgbg = measure_totals[m].fgbg;
            any = true;
        }
        if (any) report.uncertainty.push_back(std::move(section));
    }
    if (on(Analysis::refine) && have_instances) {
        run_refinement(report, manifest, ctx, std::move(per_image));
    }
    return report;
}

}  // namespace segdiag
