#include "segdiag/refine.hpp"

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <random>
#include <stdexcept>

#include "segdiag/png_io.hpp"
#include "segdiag/resample.hpp"
#include "subprocess.hpp"

namespace segdiag {
namespace {

std::string substitute(const std::string& tmpl, const std::string& key,
                       const std::string& value) {
    std::string out = tmpl;
    std::size_t pos = 0;
    while ((pos = out.find(key, pos)) != std::string::npos) {
        out.replace(pos, key.size(), value);
        pos += value.size();
    }
    return out;
}

std::filesystem::path unique_temp_path(const char* stem, const char* ext) {
    static std::atomic<std::uint64_t> counter{0};
    std::random_device rd;
    std::uint64_t tag = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
    return std::filesystem::temp_directory_path() /
           (std::string(stem) + "-" + std::to_string(::getpid()) + "-" +
            std::to_string(counter.fetch_add(1)) + "-" + std::to_string(tag) + ext);
}

}  // namespace

std::vector<RefineSelection> select_single_small(
    std::span<const std::pair<std::string, std::vector<InstanceRecord>>> per_image,
    std::span<const ClassId> target_classes) {
    std::vector<RefineSelection> out;
    for (const auto& [image_id, records] : per_image) {
        for (ClassId target : target_classes) {
            const InstanceRecord* only = nullptr;
            int count = 0;
            for (const InstanceRecord& rec : records) {
                if (rec.class_id != target) continue;
                ++count;
                only = &rec;
            }
            if (count != 1) continue;
            if (!only->size_bin) {
                throw std::invalid_argument("select_single_small: record is missing bins");
            }
            if (*only->size_bin != SizeBin::XS && *only->size_bin != SizeBin::S) continue;
            out.push_back(RefineSelection{image_id, *only});
        }
    }
    return out;
}

CropRect crop_around_max_activation(const ScoreTensor& scores, ClassId class_id, int side,
                                    const Taxonomy& t) {
    if (side <= 0 || side > scores.height() || side > scores.width()) {
        throw std::invalid_argument("crop_around_max_activation: side exceeds image");
    }
    std::size_t channel = t.index_of(class_id);
    int best_r = 0;
    int best_c = 0;
    float best = scores.at(0, 0, static_cast<int>(channel));
    for (int r = 0; r < scores.height(); ++r) {
        for (int c = 0; c < scores.width(); ++c) {
            float v = scores.at(r, c, static_cast<int>(channel));
            if (v > best) {
                best = v;
                best_r = r;
                best_c = c;
            }
        }
    }
    int row0 = std::clamp(best_r - side / 2, 0, scores.height() - side);
    int col0 = std::clamp(best_c - side / 2, 0, scores.width() - side);
    return CropRect{row0, col0, row0 + side - 1, col0 + side - 1};
}

CropRect gt_bbox_crop(const InstanceRecord& rec, int margin, int height, int width) {
    if (margin < 0) {
        throw std::invalid_argument("gt_bbox_crop: margin must be non-negative");
    }
    CropRect crop;
    crop.row0 = std::max(0, rec.bbox.row_min - margin);
    crop.col0 = std::max(0, rec.bbox.col_min - margin);
    crop.row1 = std::min(height - 1, rec.bbox.row_max + margin);
    crop.col1 = std::min(width - 1, rec.bbox.col_max + margin);
    return crop;
}

RefineResult refine_image(const RgbImage& image, const ScoreTensor& scores, const CropRect& crop,
                          const RefineConfig& cfg, const Taxonomy& t) {
    if (image.height != scores.height() || image.width != scores.width()) {
        throw std::invalid_argument("refine_image: image and scores differ in shape");
    }
    if (crop.row0 < 0 || crop.col0 < 0 || crop.row1 >= image.height ||
        crop.col1 >= image.width || crop.row0 > crop.row1 || crop.col0 > crop.col1) {
        throw std::invalid_argument("refine_image: crop out of bounds");
    }
    if (cfg.upsample_factor < 1.0) {
        throw std::invalid_argument("refine_image: upsample factor must be >= 1");
    }
    if (cfg.scorer.command.find("{input}") == std::string::npos ||
        cfg.scorer.command.find("{output}") == std::string::npos) {
        throw std::invalid_argument("refine_image: scorer command needs {input} and {output}");
    }

    RgbImage patch(crop.height(), crop.width());
    for (int r = 0; r < patch.height; ++r) {
        for (int c = 0; c < patch.width; ++c) {
            for (int ch = 0; ch < 3; ++ch) {
                patch.at(r, c, ch) = image.at(crop.row0 + r, crop.col0 + c, ch);
            }
        }
    }
    int up_h = static_cast<int>(std::lround(cfg.upsample_factor * patch.height));
    int up_w = static_cast<int>(std::lround(cfg.upsample_factor * patch.width));
    RgbImage upsampled = bicubic_resize(patch, up_h, up_w);

    std::filesystem::path input_path = unique_temp_path("segdiag-crop", ".png");
    std::filesystem::path output_path = unique_temp_path("segdiag-scores", ".scr1");
    write_rgb_png(input_path, upsampled);

    std::string command = substitute(cfg.scorer.command, "{input}", input_path.string());
    command = substitute(command, "{output}", output_path.string());
    detail::CommandResult run = detail::run_command(command, cfg.scorer.timeout_seconds);

    std::error_code ec;
    std::filesystem::remove(input_path, ec);
    if (run.timed_out) {
        std::filesystem::remove(output_path, ec);
        throw std::runtime_error("scorer timed out: " + command);
    }
    if (run.exit_code != 0) {
        std::filesystem::remove(output_path, ec);
        throw std::runtime_error("scorer failed with exit code " +
                                 std::to_string(run.exit_code) + ": " + command);
    }

    ScoreTensor returned;
    try {
        returned = load_scores(output_path, t);
    } catch (...) {
        std::filesystem::remove(output_path, ec);
        throw;
    }
    std::filesystem::remove(output_path, ec);

    ScoreTensor patch_scores = bicubic_resize(returned, crop.height(), crop.width());
    renormalize(patch_scores);

    RefineResult result;
    result.crop = crop;
    result.scores = scores;
    for (int r = 0; r < patch_scores.height(); ++r) {
        for (int c = 0; c < patch_scores.width(); ++c) {
            for (int ch = 0; ch < patch_scores.channels(); ++ch) {
                result.scores.at(crop.row0 + r, crop.col0 + c, ch) = patch_scores.at(r, c, ch);
            }
        }
    }
    result.labels = argmax_labels(result.scores, t);
    return result;
}

RefineEvaluation evaluate_refinement(std::span<const RefineCase> cases,
                                     const ConfusionMatrix& before, const ConfusionMatrix& after,
                                     const Taxonomy& t) {
    RefineEvaluation eval;
    eval.cases.assign(cases.begin(), cases.end());

    struct Sums {
        double xs_before = 0, xs_after = 0, s_before = 0, s_after = 0;
        std::size_t xs = 0, s = 0;
    };
    std::map<ClassId, Sums> sums;
    for (const RefineCase& c : cases) {
        Sums& s = sums[c.class_id];
        if (c.size_bin == SizeBin::XS) {
            s.xs_before += c.accuracy_before;
            s.xs_after += c.accuracy_after;
            ++s.xs;
        } else {
            s.s_before += c.accuracy_before;
            s.s_after += c.accuracy_after;
            ++s.s;
        }
    }
    ClassMetrics m_before = class_metrics(before);
    ClassMetrics m_after = class_metrics(after);
    for (const auto& [id, s] : sums) {
        RefineClassRow row;
        row.class_id = id;
        row.count_xs = s.xs;
        row.count_s = s.s;
        if (s.xs > 0) {
            row.acc_xs_before = s.xs_before / static_cast<double>(s.xs);
            row.acc_xs_after = s.xs_after / static_cast<double>(s.xs);
        }
        if (s.s > 0) {
            row.acc_s_before = s.s_before / static_cast<double>(s.s);
            row.acc_s_after = s.s_after / static_cast<double>(s.s);
        }
        std::size_t idx = t.index_of(id);
        row.iou_before = m_before.iou[idx];
        row.iou_after = m_after.iou[idx];
        row.acc_before = m_before.accuracy[idx];
        row.acc_after = m_after.accuracy[idx];
        eval.rows.push_back(row);
    }
    return eval;
}

}  // namespace segdiag
