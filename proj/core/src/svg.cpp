#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "emit.hpp"

namespace segdiag::detail {
namespace {

using nlohmann::ordered_json;

constexpr double kWidth = 860.0;
constexpr double kHeight = 420.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 20.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 60.0;
constexpr double kPlotW = kWidth - kLeft - kRight;
constexpr double kPlotH = kHeight - kTop - kBottom;

const char* kPalette[] = {"#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3",
                          "#937860", "#da8bc3", "#8c8c8c", "#ccb974", "#64b5cd"};

std::string esc(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

std::string num(double v) {
    std::ostringstream ss;
    ss << v;
    return ss.str();
}

class Svg {
public:
    Svg(const std::filesystem::path& path, const std::string& title)
        : out_(path, std::ios::binary | std::ios::trunc) {
        if (!out_) throw std::runtime_error("cannot write " + path.string());
        out_ << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
             << kHeight << "\" viewBox=\"0 0 " << kWidth << " " << kHeight
             << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
        out_ << "<rect width=\"" << kWidth << "\" height=\"" << kHeight << "\" fill=\"white\"/>\n";
        text(kWidth / 2, 20, esc(title), "middle", 14);
    }

    ~Svg() { out_ << "</svg>\n"; }

    void raw(const std::string& s) { out_ << s; }

    void text(double x, double y, const std::string& content, const char* anchor = "start",
              int size = 11, const std::string& extra = "") {
        out_ << "<text x=\"" << num(x) << "\" y=\"" << num(y) << "\" text-anchor=\"" << anchor
             << "\" font-size=\"" << size << "\"" << extra << ">" << content << "</text>\n";
    }

    void line(double x1, double y1, double x2, double y2, const std::string& stroke,
              const std::string& extra = "") {
        out_ << "<line x1=\"" << num(x1) << "\" y1=\"" << num(y1) << "\" x2=\"" << num(x2)
             << "\" y2=\"" << num(y2) << "\" stroke=\"" << stroke << "\"" << extra << "/>\n";
    }

    void rect(double x, double y, double w, double h, const std::string& fill,
              const std::string& extra = "") {
        out_ << "<rect x=\"" << num(x) << "\" y=\"" << num(y) << "\" width=\"" << num(w)
             << "\" height=\"" << num(h) << "\" fill=\"" << fill << "\"" << extra << "/>\n";
    }

    /// Horizontal gridlines plus tick labels for a [lo, hi] value axis.
    void value_axis(double lo, double hi, int ticks = 5) {
        for (int i = 0; i <= ticks; ++i) {
            double v = lo + (hi - lo) * i / ticks;
            double y = y_of(v, lo, hi);
            line(kLeft, y, kWidth - kRight, y, "#dddddd");
            text(kLeft - 6, y + 4, num(v), "end", 10);
        }
        line(kLeft, kTop, kLeft, kHeight - kBottom, "#333333");
        line(kLeft, kHeight - kBottom, kWidth - kRight, kHeight - kBottom, "#333333");
    }

    static double y_of(double v, double lo, double hi) {
        if (hi <= lo) return kHeight - kBottom;
        return kHeight - kBottom - (v - lo) / (hi - lo) * kPlotH;
    }

private:
    std::ofstream out_;
};

std::string attr(const std::string& name, const std::string& value) {
    return " " + name + "=\"" + esc(value) + "\"";
}

std::string data_attrs(std::initializer_list<std::pair<const char*, std::string>> kv) {
    std::string out;
    for (const auto& [k, v] : kv) out += attr(std::string("data-") + k, v);
    return out;
}

std::string opt_str(const ordered_json& row, const char* key) {
    auto it = row.find(key);
    if (it == row.end() || it->is_null()) return "";
    if (it->is_string()) return it->get<std::string>();
    return it->dump();
}

/// Grouped bars per class over the five bins, with std-error whiskers and a
/// dashed line at the class's overall mean.
void write_grouped_bins(const ordered_json& rows, const std::filesystem::path& path,
                        const std::string& title, const std::string& value_label) {
    Svg svg(path, title);
    svg.value_axis(0.0, 1.0);
    svg.text(14, kTop + kPlotH / 2, esc(value_label), "middle", 11,
             " transform=\"rotate(-90 14 " + num(kTop + kPlotH / 2) + ")\"");
    std::size_t n_classes = rows.size();
    if (n_classes == 0) return;
    double group_w = kPlotW / static_cast<double>(n_classes);
    std::size_t ci = 0;
    for (const auto& row : rows) {
        const ordered_json& bins = row.at("bins");
        double gx = kLeft + group_w * static_cast<double>(ci);
        double bar_w = group_w * 0.8 / static_cast<double>(bins.size());
        std::size_t bi = 0;
        for (auto it = bins.begin(); it != bins.end(); ++it, ++bi) {
            double x = gx + group_w * 0.1 + bar_w * static_cast<double>(bi);
            std::string mean = opt_str(it.value(), "mean");
            std::string extra = data_attrs({{"class-id", row.at("class_id").dump()},
                                            {"bin", it.key()},
                                            {"count", it.value().at("count").dump()},
                                            {"mean", mean},
                                            {"std-error", opt_str(it.value(), "std_error")}});
            if (mean.empty()) {
                svg.rect(x, kHeight - kBottom, bar_w, 0, "none", extra);
                continue;
            }
            double v = it.value().at("mean").get<double>();
            double y = Svg::y_of(v, 0, 1);
            svg.rect(x, y, bar_w, kHeight - kBottom - y,
                     kPalette[bi % (sizeof(kPalette) / sizeof(kPalette[0]))], extra);
            if (it.value().contains("std_error")) {
                double se = it.value().at("std_error").get<double>();
                double y0 = Svg::y_of(std::max(0.0, v - se), 0, 1);
                double y1 = Svg::y_of(std::min(1.0, v + se), 0, 1);
                svg.line(x + bar_w / 2, y0, x + bar_w / 2, y1, "#222222");
            }
        }
        if (row.at("overall").contains("mean")) {
            double m = row.at("overall").at("mean").get<double>();
            double y = Svg::y_of(m, 0, 1);
            svg.line(gx + group_w * 0.05, y, gx + group_w * 0.95, y, "#333333",
                     " stroke-dasharray=\"4 3\"" +
                         data_attrs({{"class-id", row.at("class_id").dump()},
                                     {"overall-mean", num(m)}}));
        }
        svg.text(gx + group_w / 2, kHeight - kBottom + 16,
                 esc(row.at("name").get<std::string>()), "middle", 10);
        ++ci;
    }
    // Bin legend along the top edge.
    const ordered_json& first_bins = rows.front().at("bins");
    double lx = kLeft;
    std::size_t bi = 0;
    for (auto it = first_bins.begin(); it != first_bins.end(); ++it, ++bi) {
        svg.rect(lx, kTop - 14, 10, 10, kPalette[bi % (sizeof(kPalette) / sizeof(kPalette[0]))]);
        svg.text(lx + 14, kTop - 5, esc(it.key()), "start", 10);
        lx += 60;
    }
}

void write_error_breakdown_chart(const ordered_json& e, const std::filesystem::path& path) {
    Svg svg(path, "Error breakdown by class");
    svg.value_axis(0.0, 1.0);
    const ordered_json& rows = e.at("per_class");
    std::size_t n = rows.size();
    if (n == 0) return;
    double group_w = kPlotW / static_cast<double>(n);
    static const char* kKinds[] = {"background", "similar", "dissimilar"};
    static const char* kColors[] = {"#8c8c8c", "#dd8452", "#c44e52"};
    std::size_t ci = 0;
    for (const auto& row : rows) {
        double x = kLeft + group_w * static_cast<double>(ci) + group_w * 0.15;
        double bar_w = group_w * 0.7;
        double acc = 0.0;
        const ordered_json& p = row.at("proportions");
        for (std::size_t k = 0; k < 3; ++k) {
            double frac = p.at(kKinds[k]).get<double>();
            double y0 = Svg::y_of(acc, 0, 1);
            double y1 = Svg::y_of(acc + frac, 0, 1);
            svg.rect(x, y1, bar_w, y0 - y1, kColors[k],
                     data_attrs({{"class-id", row.at("class_id").dump()},
                                 {"kind", kKinds[k]},
                                 {"count", row.at(kKinds[k]).dump()},
                                 {"fraction", p.at(kKinds[k]).dump()}}));
            acc += frac;
        }
        svg.text(x + bar_w / 2, kHeight - kBottom + 16, esc(row.at("name").get<std::string>()),
                 "middle", 10);
        ++ci;
    }
    double lx = kLeft;
    for (std::size_t k = 0; k < 3; ++k) {
        svg.rect(lx, kTop - 14, 10, 10, kColors[k]);
        svg.text(lx + 14, kTop - 5, kKinds[k], "start", 10);
        lx += 100;
    }
}

void write_mislocalisation_chart(const ordered_json& m, const std::filesystem::path& path) {
    Svg svg(path, "Accuracy after crediting mislocalised pixels");
    svg.value_axis(0.0, 1.0);
    std::vector<double> radii{0.0};
    for (const auto& r : m.at("radii")) radii.push_back(r.get<double>());
    double max_r = radii.back() > 0 ? radii.back() : 1.0;
    auto x_of = [&](double r) { return kLeft + r / max_r * kPlotW; };
    for (double r : radii) {
        svg.text(x_of(r), kHeight - kBottom + 16, num(r), "middle", 10);
    }
    svg.text(kLeft + kPlotW / 2, kHeight - kBottom + 36, "correction radius (pixels)", "middle");

    // One polyline per class: baseline accuracy followed by the corrected
    // accuracy at each radius.
    const ordered_json& baseline = m.at("baseline").at("per_class");
    std::size_t ci = 0;
    for (const auto& base_row : baseline) {
        if (!base_row.contains("accuracy")) continue;
        std::string class_id = base_row.at("class_id").dump();
        std::vector<std::pair<double, double>> points;
        points.emplace_back(0.0, base_row.at("accuracy").get<double>());
        for (const auto& corrected : m.at("corrected")) {
            for (const auto& row : corrected.at("per_class")) {
                if (row.at("class_id").dump() == class_id && row.contains("accuracy")) {
                    points.emplace_back(corrected.at("radius").get<double>(),
                                        row.at("accuracy").get<double>());
                }
            }
        }
        std::ostringstream pts;
        std::ostringstream vals;
        for (const auto& [r, v] : points) {
            pts << x_of(r) << ',' << Svg::y_of(v, 0, 1) << ' ';
            vals << r << ':' << v << ' ';
        }
        const char* color = kPalette[ci % (sizeof(kPalette) / sizeof(kPalette[0]))];
        svg.raw("<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" points=\"" +
                pts.str() + "\"" +
                data_attrs({{"class-id", class_id},
                            {"name", base_row.at("name").get<std::string>()},
                            {"series", vals.str()}}) +
                "/>\n");
        svg.rect(kLeft + 8.0, kTop + 4.0 + 13.0 * static_cast<double>(ci), 10, 10, color);
        svg.text(kLeft + 22.0, kTop + 13.0 + 13.0 * static_cast<double>(ci),
                 esc(base_row.at("name").get<std::string>()), "start", 10);
        ++ci;
    }
}

void write_distance_boxes(const ordered_json& section, const std::filesystem::path& path) {
    std::string measure = section.at("measure").get<std::string>();
    const ordered_json& bins = section.at("by_distance").at("bins");
    double hi = 0.0;
    for (const auto& bin : bins) {
        if (bin.contains("q75")) hi = std::max(hi, bin.at("q75").get<double>());
    }
    if (hi <= 0.0) hi = 1.0;
    hi *= 1.1;
    Svg svg(path, "Uncertainty (" + measure + ") vs distance to GT boundary");
    svg.value_axis(0.0, hi);
    std::size_t n = bins.size();
    double slot = kPlotW / static_cast<double>(std::max<std::size_t>(n, 1));
    std::size_t bi = 0;
    for (const auto& bin : bins) {
        double x = kLeft + slot * static_cast<double>(bi) + slot * 0.25;
        double w = slot * 0.5;
        std::string extra = data_attrs({{"low", opt_str(bin, "low")},
                                        {"high", opt_str(bin, "high")},
                                        {"count", bin.at("count").dump()},
                                        {"q25", opt_str(bin, "q25")},
                                        {"median", opt_str(bin, "median")},
                                        {"q75", opt_str(bin, "q75")}});
        if (bin.contains("median")) {
            double q25 = Svg::y_of(bin.at("q25").get<double>(), 0, hi);
            double q50 = Svg::y_of(bin.at("median").get<double>(), 0, hi);
            double q75 = Svg::y_of(bin.at("q75").get<double>(), 0, hi);
            svg.rect(x, q75, w, q25 - q75, "#9ecae1", extra + " stroke=\"#333333\"");
            svg.line(x, q50, x + w, q50, "#08306b", " stroke-width=\"2\"");
        } else {
            svg.rect(x, kHeight - kBottom, w, 0, "none", extra);
        }
        svg.text(x + w / 2, kHeight - kBottom + 16,
                 esc(opt_str(bin, "low") + "-" + opt_str(bin, "high")), "middle", 9);
        ++bi;
    }
    svg.text(kLeft + kPlotW / 2, kHeight - kBottom + 36, "distance to boundary (pixels)",
             "middle");
}

void write_merged_gain_chart(const ordered_json& m, const std::filesystem::path& path) {
    std::vector<const ordered_json*> rows;
    double max_gain = 0.0;
    for (const auto& row : m.at("per_class")) {
        if (!row.contains("accuracy_gain")) continue;
        rows.push_back(&row);
        max_gain = std::max(max_gain, row.at("accuracy_gain").get<double>());
    }
    if (max_gain <= 0.0) max_gain = 0.01;
    max_gain *= 1.1;
    Svg svg(path, "Accuracy gain from merging semantic groups");
    svg.value_axis(0.0, max_gain);
    if (rows.empty()) return;
    double slot = kPlotW / static_cast<double>(rows.size());
    std::size_t ci = 0;
    for (const ordered_json* row : rows) {
        double gain = row->at("accuracy_gain").get<double>();
        double x = kLeft + slot * static_cast<double>(ci) + slot * 0.2;
        double y = Svg::y_of(gain, 0, max_gain);
        svg.rect(x, y, slot * 0.6, kHeight - kBottom - y, "#55a868",
                 data_attrs({{"class-id", row->at("class_id").dump()},
                             {"gain", row->at("accuracy_gain").dump()}}));
        svg.text(x + slot * 0.3, kHeight - kBottom + 16, esc(row->at("name").get<std::string>()),
                 "middle", 10);
        ++ci;
    }
}

void write_category_heatmap(const ordered_json& arr, const std::filesystem::path& path) {
    static const char* kSize[] = {"XS", "S", "M", "L", "XL"};
    static const char* kAspect[] = {"XT", "T", "M", "W", "XW"};
    std::uint64_t grid[5][5] = {};
    std::uint64_t max_count = 0;
    for (const auto& row : arr) {
        const ordered_json& counts = row.at("counts");
        for (std::size_t s = 0; s < 5; ++s) {
            for (std::size_t a = 0; a < 5; ++a) {
                grid[s][a] += counts[s][a].get<std::uint64_t>();
                max_count = std::max(max_count, grid[s][a]);
            }
        }
    }
    Svg svg(path, "Instance counts by size and aspect");
    double cell_w = kPlotW / 5.0;
    double cell_h = kPlotH / 5.0;
    for (std::size_t s = 0; s < 5; ++s) {
        for (std::size_t a = 0; a < 5; ++a) {
            double x = kLeft + cell_w * static_cast<double>(a);
            double y = kTop + cell_h * static_cast<double>(s);
            double frac = max_count == 0
                              ? 0.0
                              : static_cast<double>(grid[s][a]) / static_cast<double>(max_count);
            int shade = 255 - static_cast<int>(std::lround(frac * 185.0));
            std::ostringstream fill;
            fill << "rgb(" << shade << "," << shade << ",255)";
            svg.rect(x, y, cell_w - 2, cell_h - 2, fill.str(),
                     data_attrs({{"size-bin", kSize[s]},
                                 {"aspect-bin", kAspect[a]},
                                 {"count", std::to_string(grid[s][a])}}));
            svg.text(x + cell_w / 2, y + cell_h / 2 + 4, std::to_string(grid[s][a]), "middle");
        }
        svg.text(kLeft - 8, kTop + cell_h * static_cast<double>(s) + cell_h / 2 + 4, kSize[s],
                 "end");
    }
    for (std::size_t a = 0; a < 5; ++a) {
        svg.text(kLeft + cell_w * static_cast<double>(a) + cell_w / 2, kHeight - kBottom + 16,
                 kAspect[a], "middle");
    }
}

const ordered_json* find(const ordered_json& j, const char* key) {
    auto it = j.find(key);
    return it == j.end() ? nullptr : &*it;
}

}  // namespace

void write_charts(const ordered_json& report, const std::filesystem::path& dir) {
    std::filesystem::path charts = dir / "charts";
    std::filesystem::create_directories(charts);
    const ordered_json& sections = report.at("sections");
    if (const ordered_json* s = find(sections, "sensitivity")) {
        write_grouped_bins(s->at("size"), charts / "sensitivity_size.svg",
                           "Instance accuracy by size bin", "instance accuracy");
        write_grouped_bins(s->at("aspect"), charts / "sensitivity_aspect.svg",
                           "Instance accuracy by aspect bin", "instance accuracy");
    }
    if (const ordered_json* e = find(sections, "error_breakdown")) {
        write_error_breakdown_chart(*e, charts / "error_breakdown.svg");
    }
    if (const ordered_json* m = find(sections, "mislocalisation")) {
        write_mislocalisation_chart(*m, charts / "mislocalisation.svg");
    }
    if (const ordered_json* u = find(sections, "uncertainty")) {
        for (const auto& section : *u) {
            if (!section.contains("by_distance")) continue;
            std::string measure = section.at("measure").get<std::string>();
            write_distance_boxes(section,
                                 charts / ("uncertainty_by_distance_" + measure + ".svg"));
        }
    }
    if (const ordered_json* m = find(sections, "merged_groups")) {
        write_merged_gain_chart(*m, charts / "merged_groups.svg");
    }
    if (const ordered_json* c = find(sections, "category_distribution")) {
        write_category_heatmap(*c, charts / "category_distribution.svg");
    }
}

}  // namespace segdiag::detail
