#include "segdiag/synth.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <stdexcept>

#include "segdiag/png_io.hpp"

namespace segdiag::synth {
namespace {

using ordered_json = nlohmann::ordered_json;

const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::shift: return "shift";
        case ErrorKind::group_swap: return "group_swap";
        case ErrorKind::background_swallow: return "background_swallow";
        case ErrorKind::dissimilar_swap: return "dissimilar_swap";
    }
    return "?";
}

ErrorKind error_kind_from_string(const std::string& s) {
    if (s == "shift") return ErrorKind::shift;
    if (s == "group_swap") return ErrorKind::group_swap;
    if (s == "background_swallow") return ErrorKind::background_swallow;
    if (s == "dissimilar_swap") return ErrorKind::dissimilar_swap;
    throw std::runtime_error("unknown error kind: " + s);
}

std::vector<std::pair<int, int>> mask_pixels(const SceneInstance& si) {
    std::vector<std::pair<int, int>> pixels;
    if (si.shape == ShapeKind::rectangle) {
        for (int r = si.row; r < si.row + si.height; ++r) {
            for (int c = si.col; c < si.col + si.width; ++c) {
                pixels.emplace_back(r, c);
            }
        }
        return pixels;
    }
    double cy = si.row + (si.height - 1) / 2.0;
    double cx = si.col + (si.width - 1) / 2.0;
    double ry = si.height / 2.0;
    double rx = si.width / 2.0;
    for (int r = si.row; r < si.row + si.height; ++r) {
        for (int c = si.col; c < si.col + si.width; ++c) {
            double dy = (r - cy) / ry;
            double dx = (c - cx) / rx;
            if (dy * dy + dx * dx <= 1.0) pixels.emplace_back(r, c);
        }
    }
    return pixels;
}

Taxonomy make_taxonomy(const SceneSpec& spec) {
    std::vector<ClassDef> classes;
    for (int i = 0; i < spec.num_classes; ++i) {
        classes.push_back(ClassDef{static_cast<ClassId>(i), "class_" + std::to_string(i)});
    }
    std::vector<SemanticGroup> groups;
    for (const auto& [name, members] : spec.groups) {
        groups.push_back(SemanticGroup{name, members});
    }
    return Taxonomy(std::move(classes), spec.background_id, Taxonomy::kDefaultIgnoreId,
                    std::move(groups));
}

/// Group partner of cls: the next member cyclically.
ClassId group_partner(const SceneSpec& spec, ClassId cls) {
    for (const auto& [name, members] : spec.groups) {
        auto it = std::find(members.begin(), members.end(), cls);
        if (it == members.end()) continue;
        if (members.size() < 2) {
            throw std::runtime_error("group_swap: group of class " + std::to_string(cls) +
                                     " has a single member");
        }
        return members[(static_cast<std::size_t>(it - members.begin()) + 1) % members.size()];
    }
    throw std::runtime_error("group_swap: class " + std::to_string(cls) + " is not grouped");
}

bool same_group(const SceneSpec& spec, ClassId a, ClassId b) {
    for (const auto& [name, members] : spec.groups) {
        bool has_a = std::find(members.begin(), members.end(), a) != members.end();
        bool has_b = std::find(members.begin(), members.end(), b) != members.end();
        if (has_a && has_b) return true;
    }
    return false;
}

ClassId dissimilar_partner(const SceneSpec& spec, ClassId cls) {
    for (int i = 0; i < spec.num_classes; ++i) {
        ClassId cand = static_cast<ClassId>(i);
        if (cand == cls || cand == spec.background_id) continue;
        if (!same_group(spec, cls, cand)) return cand;
    }
    throw std::runtime_error("dissimilar_swap: no dissimilar class exists for class " +
                             std::to_string(cls));
}

void fill_correct(std::vector<float>& p, int gt_index, double confidence) {
    int n = static_cast<int>(p.size());
    float rest = static_cast<float>((1.0 - confidence) / (n - 1));
    std::fill(p.begin(), p.end(), rest);
    p[gt_index] = static_cast<float>(confidence);
}

void fill_error(std::vector<float>& p, int gt_index, int pred_index, const ScoreModel& model) {
    int n = static_cast<int>(p.size());
    if (n == 2) {
        p[pred_index] = static_cast<float>((1.0 + model.gap) / 2.0);
        p[gt_index] = static_cast<float>((1.0 - model.gap) / 2.0);
        return;
    }
    float rest = static_cast<float>((1.0 - model.confidence) / (n - 2));
    std::fill(p.begin(), p.end(), rest);
    p[pred_index] = static_cast<float>((model.confidence + model.gap) / 2.0);
    p[gt_index] = static_cast<float>((model.confidence - model.gap) / 2.0);
}

double entropy_of(const std::vector<float>& p) {
    double h = 0.0;
    for (float v : p) {
        if (v > 0.0f) h += static_cast<double>(v) * std::log(static_cast<double>(v));
    }
    return h / std::log(1.0 / static_cast<double>(p.size()));
}

double top2_ratio_of(std::vector<float> p) {
    std::sort(p.begin(), p.end(), std::greater<>());
    return static_cast<double>(p[1]) / static_cast<double>(p[0]);
}

void validate_score_model(const SceneSpec& spec, bool has_errors) {
    const ScoreModel& m = spec.score_model;
    int n = spec.num_classes;
    if (m.confidence <= 0.0 || m.confidence >= 1.0) {
        throw std::runtime_error("score model: confidence must lie in (0,1)");
    }
    if (m.gap < 0.0 || m.gap > m.confidence) {
        throw std::runtime_error("score model: gap must lie in [0, confidence]");
    }
    if (m.confidence <= (1.0 - m.confidence) / (n - 1)) {
        throw std::runtime_error("score model: confidence does not dominate on correct pixels");
    }
    if (has_errors && n > 2 && (m.confidence + m.gap) / 2.0 <= (1.0 - m.confidence) / (n - 2)) {
        throw std::runtime_error("score model: predicted class does not dominate on error pixels");
    }
}

bool window_contains(const LabelMap& gt, int row, int col, ClassId label, int r) {
    int r0 = std::max(0, row - r);
    int r1 = std::min(gt.height() - 1, row + r);
    int c0 = std::max(0, col - r);
    int c1 = std::min(gt.width() - 1, col + r);
    for (int i = r0; i <= r1; ++i) {
        for (int j = c0; j <= c1; ++j) {
            if (gt.at(i, j) == label) return true;
        }
    }
    return false;
}

ordered_json spec_to_json(const SceneSpec& spec) {
    ordered_json j;
    j["height"] = spec.height;
    j["width"] = spec.width;
    j["num_classes"] = spec.num_classes;
    j["background_id"] = spec.background_id;
    ordered_json groups = ordered_json::object();
    for (const auto& [name, members] : spec.groups) groups[name] = members;
    j["groups"] = groups;
    j["instances"] = ordered_json::array();
    for (const SceneInstance& si : spec.instances) {
        j["instances"].push_back(ordered_json{
            {"class_id", si.class_id},
            {"shape", si.shape == ShapeKind::rectangle ? "rectangle" : "ellipse"},
            {"row", si.row},
            {"col", si.col},
            {"height", si.height},
            {"width", si.width}});
    }
    j["errors"] = ordered_json::array();
    for (const InjectedError& e : spec.errors) {
        ordered_json je{{"kind", to_string(e.kind)}, {"instance", e.instance}};
        if (e.kind == ErrorKind::shift) {
            je["dx"] = e.dx;
            je["dy"] = e.dy;
        }
        j["errors"].push_back(je);
    }
    j["score_model"] =
        ordered_json{{"confidence", spec.score_model.confidence}, {"gap", spec.score_model.gap}};
    j["radii"] = spec.radii;
    j["seed"] = spec.seed;
    return j;
}

SceneSpec spec_from_json(const ordered_json& j) {
    SceneSpec spec;
    spec.height = j.at("height").get<int>();
    spec.width = j.at("width").get<int>();
    spec.num_classes = j.at("num_classes").get<int>();
    spec.background_id = static_cast<ClassId>(j.value("background_id", 0));
    if (j.contains("groups")) {
        for (const auto& [name, members] : j.at("groups").items()) {
            spec.groups.emplace_back(name, members.get<std::vector<ClassId>>());
        }
    }
    for (const auto& ji : j.value("instances", ordered_json::array())) {
        SceneInstance si;
        si.class_id = static_cast<ClassId>(ji.at("class_id").get<int>());
        std::string shape = ji.value("shape", std::string("rectangle"));
        if (shape == "rectangle") {
            si.shape = ShapeKind::rectangle;
        } else if (shape == "ellipse") {
            si.shape = ShapeKind::ellipse;
        } else {
            throw std::runtime_error("unknown shape: " + shape);
        }
        si.row = ji.at("row").get<int>();
        si.col = ji.at("col").get<int>();
        si.height = ji.at("height").get<int>();
        si.width = ji.at("width").get<int>();
        spec.instances.push_back(si);
    }
    for (const auto& je : j.value("errors", ordered_json::array())) {
        InjectedError e;
        e.kind = error_kind_from_string(je.at("kind").get<std::string>());
        e.instance = je.at("instance").get<std::uint32_t>();
        e.dx = je.value("dx", 0);
        e.dy = je.value("dy", 0);
        spec.errors.push_back(e);
    }
    if (j.contains("score_model")) {
        spec.score_model.confidence = j.at("score_model").value("confidence", 0.8);
        spec.score_model.gap = j.at("score_model").value("gap", 0.2);
    }
    if (j.contains("radii")) spec.radii = j.at("radii").get<std::vector<int>>();
    spec.seed = j.value("seed", std::uint64_t{0});
    return spec;
}

}  // namespace

std::string scene_spec_to_json(const SceneSpec& spec) { return spec_to_json(spec).dump(2); }

SceneSpec scene_spec_from_json_text(const std::string& text) {
    return spec_from_json(ordered_json::parse(text));
}

std::vector<SceneSpec> load_scene_specs(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open scene spec: " + path.string());
    }
    ordered_json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw std::runtime_error("invalid scene spec " + path.string() + ": " + e.what());
    }
    std::vector<SceneSpec> specs;
    if (j.is_array()) {
        for (const auto& item : j) specs.push_back(spec_from_json(item));
    } else {
        specs.push_back(spec_from_json(j));
    }
    return specs;
}

Scene generate(const SceneSpec& spec) {
    if (spec.height <= 0 || spec.width <= 0) {
        throw std::runtime_error("scene: dimensions must be positive");
    }
    if (spec.num_classes < 2 || spec.num_classes > 255) {
        throw std::runtime_error("scene: num_classes must lie in [2, 255]");
    }
    if (spec.background_id >= spec.num_classes) {
        throw std::runtime_error("scene: background_id outside the class range");
    }
    if (!std::is_sorted(spec.radii.begin(), spec.radii.end())) {
        throw std::runtime_error("scene: radii must be ascending");
    }

    Scene scene{make_taxonomy(spec),
                LabelMap(spec.height, spec.width, spec.background_id),
                InstanceMap(spec.height, spec.width, 0),
                LabelMap(spec.height, spec.width, spec.background_id),
                ScoreTensor(spec.height, spec.width, spec.num_classes),
                ExpectedFragment{}};

    std::vector<std::vector<std::pair<int, int>>> masks;
    for (std::size_t k = 0; k < spec.instances.size(); ++k) {
        const SceneInstance& si = spec.instances[k];
        if (si.height <= 0 || si.width <= 0 || si.row < 0 || si.col < 0 ||
            si.row + si.height > spec.height || si.col + si.width > spec.width) {
            throw std::runtime_error("scene: instance " + std::to_string(k + 1) +
                                     " out of bounds");
        }
        if (si.class_id >= spec.num_classes || si.class_id == spec.background_id) {
            throw std::runtime_error("scene: instance " + std::to_string(k + 1) +
                                     " has an invalid class");
        }
        auto pixels = mask_pixels(si);
        for (auto [r, c] : pixels) {
            if (scene.instances.at(r, c) != 0) {
                throw std::runtime_error("scene: instance " + std::to_string(k + 1) +
                                         " overlaps another instance");
            }
            scene.gt.at(r, c) = si.class_id;
            scene.instances.at(r, c) = static_cast<std::uint32_t>(k + 1);
        }
        masks.push_back(std::move(pixels));
    }

    scene.pred = scene.gt;
    std::set<std::uint32_t> erred;
    std::map<std::uint32_t, std::pair<int, int>> shifts;  // instance -> (dy, dx)
    for (const InjectedError& e : spec.errors) {
        if (e.instance == 0 || e.instance > spec.instances.size()) {
            throw std::runtime_error("scene: error references missing instance " +
                                     std::to_string(e.instance));
        }
        if (!erred.insert(e.instance).second) {
            throw std::runtime_error("scene: instance " + std::to_string(e.instance) +
                                     " has more than one error");
        }
        const SceneInstance& si = spec.instances[e.instance - 1];
        const auto& pixels = masks[e.instance - 1];
        switch (e.kind) {
            case ErrorKind::group_swap: {
                ClassId partner = group_partner(spec, si.class_id);
                for (auto [r, c] : pixels) scene.pred.at(r, c) = partner;
                break;
            }
            case ErrorKind::dissimilar_swap: {
                ClassId partner = dissimilar_partner(spec, si.class_id);
                for (auto [r, c] : pixels) scene.pred.at(r, c) = partner;
                break;
            }
            case ErrorKind::background_swallow: {
                for (auto [r, c] : pixels) scene.pred.at(r, c) = spec.background_id;
                break;
            }
            case ErrorKind::shift: {
                if (e.dx == 0 && e.dy == 0) {
                    throw std::runtime_error("scene: shift error needs a nonzero offset");
                }
                for (auto [r, c] : pixels) scene.pred.at(r, c) = spec.background_id;
                for (auto [r, c] : pixels) {
                    int nr = r + e.dy;
                    int nc = c + e.dx;
                    if (nr < 0 || nr >= spec.height || nc < 0 || nc >= spec.width) continue;
                    std::uint32_t owner = scene.instances.at(nr, nc);
                    if (owner != 0 && owner != e.instance) {
                        throw std::runtime_error("scene: shifted instance " +
                                                 std::to_string(e.instance) +
                                                 " collides with another instance");
                    }
                    scene.pred.at(nr, nc) = si.class_id;
                }
                shifts[e.instance] = {e.dy, e.dx};
                break;
            }
        }
    }

    bool has_errors = false;
    for (std::size_t i = 0; i < scene.gt.size(); ++i) {
        if (scene.gt[i] != scene.pred[i]) {
            has_errors = true;
            break;
        }
    }
    validate_score_model(spec, has_errors);

    std::vector<float> correct_p(spec.num_classes);
    std::vector<float> error_p(spec.num_classes);
    for (int r = 0; r < spec.height; ++r) {
        for (int c = 0; c < spec.width; ++c) {
            ClassId g = scene.gt.at(r, c);
            ClassId p = scene.pred.at(r, c);
            auto px = scene.scores.pixel(r, c);
            if (g == p) {
                fill_correct(correct_p, g, spec.score_model.confidence);
                std::copy(correct_p.begin(), correct_p.end(), px.begin());
            } else {
                fill_error(error_p, g, p, spec.score_model);
                std::copy(error_p.begin(), error_p.end(), px.begin());
            }
        }
    }
    scene.scores.set_normalized(true);

    // Expected values, recomputed with plain loops.
    ExpectedFragment& exp = scene.expected;
    int n = spec.num_classes;
    exp.confusion.assign(static_cast<std::size_t>(n) * n, 0);
    for (std::size_t i = 0; i < scene.gt.size(); ++i) {
        exp.confusion[static_cast<std::size_t>(scene.gt[i]) * n + scene.pred[i]] += 1;
    }
    exp.gt_pixels.assign(n, 0);
    std::vector<std::uint64_t> pred_pixels(n, 0);
    std::uint64_t diag = 0;
    std::uint64_t total = 0;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            std::uint64_t v = exp.confusion[static_cast<std::size_t>(i) * n + j];
            exp.gt_pixels[i] += v;
            pred_pixels[j] += v;
            total += v;
            if (i == j) diag += v;
        }
    }
    exp.accuracy.assign(n, std::nullopt);
    exp.iou.assign(n, std::nullopt);
    for (int i = 0; i < n; ++i) {
        std::uint64_t s = exp.confusion[static_cast<std::size_t>(i) * n + i];
        if (exp.gt_pixels[i] > 0) {
            exp.accuracy[i] = static_cast<double>(s) / static_cast<double>(exp.gt_pixels[i]);
        }
        std::uint64_t uni = exp.gt_pixels[i] + pred_pixels[i] - s;
        if (uni > 0) {
            exp.iou[i] = static_cast<double>(s) / static_cast<double>(uni);
        }
    }
    exp.total_pixel_accuracy = static_cast<double>(diag) / static_cast<double>(total);

    exp.error_counts.assign(n, {0, 0, 0});
    for (int r = 0; r < spec.height; ++r) {
        for (int c = 0; c < spec.width; ++c) {
            ClassId g = scene.gt.at(r, c);
            ClassId p = scene.pred.at(r, c);
            if (g == p) continue;
            ++exp.error_pixels;
            if (g == spec.background_id) continue;
            if (p == spec.background_id) {
                exp.error_counts[g][0] += 1;
            } else if (same_group(spec, g, p)) {
                exp.error_counts[g][1] += 1;
            } else {
                exp.error_counts[g][2] += 1;
            }
        }
    }

    for (int radius : spec.radii) {
        std::vector<std::uint64_t> corrected(n, 0);
        for (int i = 0; i < n; ++i) {
            corrected[i] = exp.confusion[static_cast<std::size_t>(i) * n + i];
        }
        for (int r = 0; r < spec.height; ++r) {
            for (int c = 0; c < spec.width; ++c) {
                ClassId g = scene.gt.at(r, c);
                ClassId p = scene.pred.at(r, c);
                if (g == p) continue;
                if (window_contains(scene.gt, r, c, p, radius)) corrected[g] += 1;
            }
        }
        std::vector<std::optional<double>> acc(n);
        for (int i = 0; i < n; ++i) {
            if (exp.gt_pixels[i] > 0) {
                acc[i] = static_cast<double>(corrected[i]) /
                         static_cast<double>(exp.gt_pixels[i]);
            }
        }
        exp.corrected_accuracy[radius] = std::move(acc);
    }

    for (const auto& [instance, offset] : shifts) {
        ClassId cls = spec.instances[instance - 1].class_id;
        int max_needed = 0;
        for (int r = 0; r < spec.height; ++r) {
            for (int c = 0; c < spec.width; ++c) {
                ClassId g = scene.gt.at(r, c);
                ClassId p = scene.pred.at(r, c);
                if (g == p) continue;
                bool from_this_shift =
                    scene.instances.at(r, c) == instance || (p == cls && g != cls);
                if (!from_this_shift) continue;
                int radius = 0;
                while (!window_contains(scene.gt, r, c, p, radius)) {
                    ++radius;
                    if (radius > std::max(spec.height, spec.width)) {
                        throw std::runtime_error("scene: shift error is not correctable");
                    }
                }
                max_needed = std::max(max_needed, radius);
            }
        }
        exp.full_correction_radius[instance] = max_needed;
    }

    // Both measures are permutation-invariant, so one representative vector
    // of each pixel kind suffices.
    fill_correct(correct_p, 0, spec.score_model.confidence);
    exp.relative_entropy_correct = entropy_of(correct_p);
    exp.relative_probability_correct = top2_ratio_of(correct_p);
    if (has_errors) {
        fill_error(error_p, 0, 1, spec.score_model);
        exp.relative_entropy_error = entropy_of(error_p);
        exp.relative_probability_error = top2_ratio_of(error_p);
    }
    return scene;
}

RgbImage render_rgb(const LabelMap& gt) {
    auto shade = [](ClassId id, int channel) -> std::uint8_t {
        if (id == 0) return 40;
        // Small deterministic palette: decorrelated per channel.
        static constexpr int mul[3] = {97, 57, 173};
        return static_cast<std::uint8_t>(60 + (id * mul[channel]) % 180);
    };
    RgbImage out(gt.height(), gt.width());
    for (int r = 0; r < gt.height(); ++r) {
        for (int c = 0; c < gt.width(); ++c) {
            for (int ch = 0; ch < 3; ++ch) {
                out.at(r, c, ch) = shade(gt.at(r, c), ch);
            }
        }
    }
    return out;
}

void write_scene(const std::filesystem::path& dir, const std::string& name, const Scene& scene) {
    for (int r = 0; r < scene.scores.height(); ++r) {
        for (int c = 0; c < scene.scores.width(); ++c) {
            auto px = scene.scores.pixel(r, c);
            int best = static_cast<int>(std::max_element(px.begin(), px.end()) - px.begin());
            if (static_cast<ClassId>(best) != scene.pred.at(r, c)) {
                throw std::runtime_error(
                    "write_scene: score argmax does not reproduce the prediction map "
                    "(top-2 tie?)");
            }
        }
    }
    std::filesystem::create_directories(dir);
    write_label_png(dir / (name + ".gt.png"), scene.gt);
    write_instance_png(dir / (name + ".inst.png"), scene.instances);
    write_rgb_png(dir / (name + ".image.png"), render_rgb(scene.gt));
    Scr1File file;
    file.height = scene.scores.height();
    file.width = scene.scores.width();
    file.channels = scene.scores.channels();
    file.kind = ScoreKind::probabilities;
    file.data = scene.scores.data();
    write_scr1(dir / (name + ".scores.scr1"), file);
}

std::filesystem::path write_synth_dataset(const std::filesystem::path& dir,
                                          std::span<const SceneSpec> specs) {
    if (specs.empty()) {
        throw std::runtime_error("write_synth_dataset: no scene specs");
    }
    for (const SceneSpec& s : specs) {
        if (s.num_classes != specs[0].num_classes || s.background_id != specs[0].background_id ||
            s.groups != specs[0].groups) {
            throw std::runtime_error("write_synth_dataset: specs disagree on the taxonomy");
        }
    }
    std::filesystem::create_directories(dir);

    ordered_json taxonomy;
    taxonomy["classes"] = ordered_json::array();
    for (int i = 0; i < specs[0].num_classes; ++i) {
        taxonomy["classes"].push_back(
            ordered_json{{"id", i}, {"name", "class_" + std::to_string(i)}});
    }
    taxonomy["background_id"] = specs[0].background_id;
    taxonomy["ignore_id"] = Taxonomy::kDefaultIgnoreId;
    ordered_json groups = ordered_json::object();
    for (const auto& [gname, members] : specs[0].groups) groups[gname] = members;
    taxonomy["groups"] = groups;
    {
        std::ofstream out(dir / "taxonomy.json");
        out << taxonomy.dump(2) << '\n';
    }

    ordered_json manifest;
    manifest["dataset"] = "synth";
    manifest["taxonomy_path"] = "taxonomy.json";
    manifest["records"] = ordered_json::array();
    for (std::size_t i = 0; i < specs.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "image_%03zu", i);
        Scene scene = generate(specs[i]);
        write_scene(dir, name, scene);
        manifest["records"].push_back(ordered_json{
            {"image_id", name},
            {"gt", std::string(name) + ".gt.png"},
            {"instances", std::string(name) + ".inst.png"},
            {"scores", std::string(name) + ".scores.scr1"},
            {"image", std::string(name) + ".image.png"}});
    }
    std::filesystem::path manifest_path = dir / "manifest.json";
    {
        std::ofstream out(manifest_path);
        out << manifest.dump(2) << '\n';
    }
    return manifest_path;
}

}  // namespace segdiag::synth
