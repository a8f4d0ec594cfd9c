#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "segdiag/image.hpp"
#include "segdiag/taxonomy.hpp"

namespace segdiag {

enum class ScoreKind : std::uint8_t { probabilities = 0, logits = 1 };

/// H x W x C per-pixel class scores, channels innermost. Channel c holds the
/// score of the taxonomy class at dense index c. A normalized tensor has
/// per-pixel sums equal to 1 within 1e-5.
class ScoreTensor {
public:
    ScoreTensor() = default;
    ScoreTensor(int height, int width, int channels);
    ScoreTensor(int height, int width, int channels, std::vector<float> data);

    int height() const { return height_; }
    int width() const { return width_; }
    int channels() const { return channels_; }
    bool empty() const { return data_.empty(); }

    float at(int row, int col, int channel) const { return data_[index(row, col, channel)]; }
    float& at(int row, int col, int channel) { return data_[index(row, col, channel)]; }

    std::span<const float> pixel(int row, int col) const {
        return {data_.data() + index(row, col, 0), static_cast<std::size_t>(channels_)};
    }
    std::span<float> pixel(int row, int col) {
        return {data_.data() + index(row, col, 0), static_cast<std::size_t>(channels_)};
    }

    const std::vector<float>& data() const { return data_; }
    std::vector<float>& data() { return data_; }

    bool normalized() const { return normalized_; }
    void set_normalized(bool v) { normalized_ = v; }

private:
    std::size_t index(int row, int col, int channel) const {
        return (static_cast<std::size_t>(row) * width_ + col) * channels_ + channel;
    }

    int height_ = 0;
    int width_ = 0;
    int channels_ = 0;
    bool normalized_ = false;
    std::vector<float> data_;
};

/// SCR1 container: magic "SCR1", then little-endian u32 height, u32 width,
/// u32 channels, u8 kind (0 = probabilities, 1 = logits), then
/// height*width*channels little-endian float32, row-major with channels
/// innermost. Write->read round-trips are bit-exact.
struct Scr1File {
    int height = 0;
    int width = 0;
    int channels = 0;
    ScoreKind kind = ScoreKind::probabilities;
    std::vector<float> data;
};

Scr1File read_scr1(const std::filesystem::path& path);
void write_scr1(const std::filesystem::path& path, const Scr1File& file);

/// Builds a normalized tensor. Logits go through a per-pixel max-shifted
/// softmax; probabilities are validated (sums within 1e-5 of 1). All values
/// must be finite.
ScoreTensor scores_from_data(int height, int width, int channels, std::vector<float> data,
                             ScoreKind kind);

/// Loads an SCR1 file and normalizes it. The channel count must match the
/// taxonomy. When `expected_kind` is set and the file header disagrees, the
/// load fails.
ScoreTensor load_scores(const std::filesystem::path& path, const Taxonomy& t,
                        std::optional<ScoreKind> expected_kind = std::nullopt);

/// Per-pixel argmax channel mapped to class ids (first max wins on ties).
LabelMap argmax_labels(const ScoreTensor& scores, const Taxonomy& t);

/// Clamps negatives to zero and rescales each pixel to sum to 1. Pixels that
/// end up all-zero fall back to the uniform distribution.
void renormalize(ScoreTensor& scores);

}  // namespace segdiag
