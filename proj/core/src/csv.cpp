#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "emit.hpp"

namespace segdiag::detail {
namespace {

using nlohmann::ordered_json;

// Every numeric cell is the dump of the JSON scalar itself, so a value always
// prints identically in report.json and in the tables.
std::string cell(const ordered_json& v) {
    if (v.is_null()) return "";
    if (v.is_string()) return v.get<std::string>();
    return v.dump();
}

std::string quoted(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& path) : out_(path, std::ios::binary | std::ios::trunc) {
        if (!out_) throw std::runtime_error("cannot write " + path.string());
    }

    void row(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out_ << ',';
            out_ << quoted(cells[i]);
        }
        out_ << "\r\n";
    }

private:
    std::ofstream out_;
};

const ordered_json* find(const ordered_json& j, const char* key) {
    auto it = j.find(key);
    return it == j.end() ? nullptr : &*it;
}

std::string opt(const ordered_json& row, const char* key) {
    const ordered_json* v = find(row, key);
    return v ? cell(*v) : "";
}

void metrics_rows(CsvWriter& w, const ordered_json& m, const std::string& tag) {
    for (const auto& row : m.at("per_class")) {
        w.row({tag, cell(row.at("class_id")), cell(row.at("name")), cell(row.at("gt_pixels")),
               cell(row.at("pred_pixels")), opt(row, "accuracy"), opt(row, "iou")});
    }
}

void metrics_summary_row(CsvWriter& w, const ordered_json& m, const std::string& tag) {
    w.row({tag, cell(m.at("pixels")), cell(m.at("total_pixel_accuracy")),
           cell(m.at("mean_class_accuracy")), cell(m.at("mean_iou"))});
}

void write_metrics(const ordered_json& m, const std::filesystem::path& dir) {
    CsvWriter per_class(dir / "metrics.csv");
    per_class.row({"class_id", "name", "gt_pixels", "pred_pixels", "accuracy", "iou"});
    for (const auto& row : m.at("per_class")) {
        per_class.row({cell(row.at("class_id")), cell(row.at("name")), cell(row.at("gt_pixels")),
                       cell(row.at("pred_pixels")), opt(row, "accuracy"), opt(row, "iou")});
    }
    CsvWriter summary(dir / "metrics_summary.csv");
    summary.row({"pixels", "total_pixel_accuracy", "mean_class_accuracy", "mean_iou"});
    summary.row({cell(m.at("pixels")), cell(m.at("total_pixel_accuracy")),
                 cell(m.at("mean_class_accuracy")), cell(m.at("mean_iou"))});
}

void write_topn(const ordered_json& topn, const std::filesystem::path& dir) {
    CsvWriter per_class(dir / "topn.csv");
    per_class.row({"n", "class_id", "name", "gt_pixels", "pred_pixels", "accuracy", "iou"});
    CsvWriter summary(dir / "topn_summary.csv");
    summary.row({"n", "pixels", "total_pixel_accuracy", "mean_class_accuracy", "mean_iou"});
    for (const auto& entry : topn) {
        metrics_rows(per_class, entry, cell(entry.at("n")));
        metrics_summary_row(summary, entry, cell(entry.at("n")));
    }
}

void write_merged(const ordered_json& m, const std::filesystem::path& dir) {
    CsvWriter w(dir / "merged_groups.csv");
    w.row({"class_id", "name", "representative", "gt_pixels", "accuracy", "merged_accuracy",
           "accuracy_gain"});
    for (const auto& row : m.at("per_class")) {
        w.row({cell(row.at("class_id")), cell(row.at("name")), cell(row.at("representative")),
               cell(row.at("gt_pixels")), opt(row, "accuracy"), opt(row, "merged_accuracy"),
               opt(row, "accuracy_gain")});
    }
}

void write_sensitivity_table(const ordered_json& rows, const std::filesystem::path& path) {
    CsvWriter w(path);
    bool header = false;
    for (const auto& row : rows) {
        const ordered_json& bins = row.at("bins");
        if (!header) {
            std::vector<std::string> h{"class_id", "name"};
            for (auto it = bins.begin(); it != bins.end(); ++it) {
                h.push_back(it.key() + "_count");
                h.push_back(it.key() + "_mean");
                h.push_back(it.key() + "_std_error");
            }
            h.insert(h.end(), {"overall_count", "overall_mean", "overall_std_error"});
            w.row(h);
            header = true;
        }
        std::vector<std::string> cells{cell(row.at("class_id")), cell(row.at("name"))};
        for (auto it = bins.begin(); it != bins.end(); ++it) {
            cells.push_back(cell(it.value().at("count")));
            cells.push_back(opt(it.value(), "mean"));
            cells.push_back(opt(it.value(), "std_error"));
        }
        const ordered_json& overall = row.at("overall");
        cells.push_back(cell(overall.at("count")));
        cells.push_back(opt(overall, "mean"));
        cells.push_back(opt(overall, "std_error"));
        w.row(cells);
    }
}

void write_category_distribution(const ordered_json& arr, const std::filesystem::path& dir) {
    CsvWriter w(dir / "category_distribution.csv");
    w.row({"class_id", "name", "size_bin", "aspect_bin", "count"});
    static const char* kSize[] = {"XS", "S", "M", "L", "XL"};
    static const char* kAspect[] = {"XT", "T", "M", "W", "XW"};
    for (const auto& row : arr) {
        const ordered_json& counts = row.at("counts");
        for (std::size_t s = 0; s < counts.size(); ++s) {
            for (std::size_t a = 0; a < counts[s].size(); ++a) {
                w.row({cell(row.at("class_id")), cell(row.at("name")), kSize[s], kAspect[a],
                       cell(counts[s][a])});
            }
        }
    }
}

void write_error_breakdown(const ordered_json& e, const std::filesystem::path& dir) {
    CsvWriter w(dir / "error_breakdown.csv");
    w.row({"class_id", "name", "background", "similar", "dissimilar", "total", "background_frac",
           "similar_frac", "dissimilar_frac"});
    for (const auto& row : e.at("per_class")) {
        const ordered_json& p = row.at("proportions");
        w.row({cell(row.at("class_id")), cell(row.at("name")), cell(row.at("background")),
               cell(row.at("similar")), cell(row.at("dissimilar")), cell(row.at("total")),
               cell(p.at("background")), cell(p.at("similar")), cell(p.at("dissimilar"))});
    }
}

void write_mislocalisation(const ordered_json& m, const std::filesystem::path& dir) {
    CsvWriter w(dir / "mislocalisation.csv");
    w.row({"radius", "class_id", "name", "accuracy", "iou", "total_pixel_accuracy",
           "mean_class_accuracy", "mean_iou"});
    auto emit = [&](const std::string& radius, const ordered_json& metrics) {
        for (const auto& row : metrics.at("per_class")) {
            w.row({radius, cell(row.at("class_id")), cell(row.at("name")), opt(row, "accuracy"),
                   opt(row, "iou"), cell(metrics.at("total_pixel_accuracy")),
                   cell(metrics.at("mean_class_accuracy")), cell(metrics.at("mean_iou"))});
        }
    };
    emit("baseline", m.at("baseline"));
    for (const auto& corrected : m.at("corrected")) {
        emit(cell(corrected.at("radius")), corrected);
    }
}

void write_uncertainty(const ordered_json& arr, const std::filesystem::path& dir) {
    {
        CsvWriter w(dir / "uncertainty_by_distance.csv");
        w.row({"measure", "low", "high", "count", "q25", "median", "q75"});
        for (const auto& section : arr) {
            const ordered_json* bd = find(section, "by_distance");
            if (!bd) continue;
            for (const auto& bin : bd->at("bins")) {
                w.row({cell(section.at("measure")), cell(bin.at("low")), cell(bin.at("high")),
                       cell(bin.at("count")), opt(bin, "q25"), opt(bin, "median"),
                       opt(bin, "q75")});
            }
        }
    }
    for (const auto& section : arr) {
        const ordered_json* bc = find(section, "by_category");
        if (!bc) continue;
        std::string measure = section.at("measure").get<std::string>();
        write_sensitivity_table(bc->at("size"),
                                dir / ("uncertainty_by_category_size_" + measure + ".csv"));
        write_sensitivity_table(bc->at("aspect"),
                                dir / ("uncertainty_by_category_aspect_" + measure + ".csv"));
    }
    {
        CsvWriter w(dir / "uncertainty_by_error_type.csv");
        w.row({"measure", "category", "count", "mean"});
        for (const auto& section : arr) {
            const ordered_json* et = find(section, "by_error_type");
            if (!et) continue;
            for (auto it = et->begin(); it != et->end(); ++it) {
                w.row({cell(section.at("measure")), it.key(), cell(it.value().at("count")),
                       opt(it.value(), "mean")});
            }
        }
    }
    {
        CsvWriter w(dir / "fgbg.csv");
        w.row({"measure", "tp", "fp", "tn", "fn", "precision", "recall", "accuracy"});
        for (const auto& section : arr) {
            const ordered_json* f = find(section, "fgbg");
            if (!f) continue;
            w.row({cell(section.at("measure")), cell(f->at("tp")), cell(f->at("fp")),
                   cell(f->at("tn")), cell(f->at("fn")), cell(f->at("precision")),
                   cell(f->at("recall")), cell(f->at("accuracy"))});
        }
    }
}

void write_refinement(const ordered_json& r, const std::filesystem::path& dir) {
    {
        CsvWriter w(dir / "refinement_cases.csv");
        w.row({"image_id", "class_id", "instance_id", "size_bin", "accuracy_before",
               "accuracy_after"});
        for (const auto& row : r.at("cases")) {
            w.row({cell(row.at("image_id")), cell(row.at("class_id")),
                   cell(row.at("instance_id")), cell(row.at("size_bin")),
                   cell(row.at("accuracy_before")), cell(row.at("accuracy_after"))});
        }
    }
    CsvWriter w(dir / "refinement.csv");
    w.row({"class_id", "name", "count_xs", "count_s", "acc_xs_before", "acc_xs_after",
           "acc_s_before", "acc_s_after", "iou_before", "iou_after", "acc_before", "acc_after"});
    for (const auto& row : r.at("classes")) {
        w.row({cell(row.at("class_id")), cell(row.at("name")), cell(row.at("count_xs")),
               cell(row.at("count_s")), opt(row, "acc_xs_before"), opt(row, "acc_xs_after"),
               opt(row, "acc_s_before"), opt(row, "acc_s_after"), opt(row, "iou_before"),
               opt(row, "iou_after"), opt(row, "acc_before"), opt(row, "acc_after")});
    }
}

}  // namespace

void write_tables(const ordered_json& report, const std::filesystem::path& dir) {
    std::filesystem::path tables = dir / "tables";
    std::filesystem::create_directories(tables);
    const ordered_json& sections = report.at("sections");
    if (const ordered_json* m = find(sections, "metrics")) write_metrics(*m, tables);
    if (const ordered_json* m = find(sections, "topn")) write_topn(*m, tables);
    if (const ordered_json* m = find(sections, "merged_groups")) write_merged(*m, tables);
    if (const ordered_json* m = find(sections, "sensitivity")) {
        write_sensitivity_table(m->at("size"), tables / "sensitivity_size.csv");
        write_sensitivity_table(m->at("aspect"), tables / "sensitivity_aspect.csv");
    }
    if (const ordered_json* m = find(sections, "category_distribution")) {
        write_category_distribution(*m, tables);
    }
    if (const ordered_json* m = find(sections, "error_breakdown")) {
        write_error_breakdown(*m, tables);
    }
    if (const ordered_json* m = find(sections, "mislocalisation")) {
        write_mislocalisation(*m, tables);
    }
    if (const ordered_json* m = find(sections, "uncertainty")) write_uncertainty(*m, tables);
    if (const ordered_json* m = find(sections, "refinement")) write_refinement(*m, tables);
}

}  // namespace segdiag::detail
