#include "segdiag/scores.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace segdiag {
namespace {

constexpr char kMagic[4] = {'S', 'C', 'R', '1'};
constexpr double kSumTolerance = 1e-5;

static_assert(std::endian::native == std::endian::little,
              "SCR1 I/O assumes a little-endian host");
static_assert(sizeof(float) == 4 && std::numeric_limits<float>::is_iec559);

std::uint32_t read_u32(std::istream& in) {
    unsigned char buf[4];
    in.read(reinterpret_cast<char*>(buf), 4);
    return static_cast<std::uint32_t>(buf[0]) | (static_cast<std::uint32_t>(buf[1]) << 8) |
           (static_cast<std::uint32_t>(buf[2]) << 16) | (static_cast<std::uint32_t>(buf[3]) << 24);
}

void write_u32(std::ostream& out, std::uint32_t v) {
    unsigned char buf[4] = {static_cast<unsigned char>(v & 0xff),
                            static_cast<unsigned char>((v >> 8) & 0xff),
                            static_cast<unsigned char>((v >> 16) & 0xff),
                            static_cast<unsigned char>((v >> 24) & 0xff)};
    out.write(reinterpret_cast<const char*>(buf), 4);
}

}  // namespace

ScoreTensor::ScoreTensor(int height, int width, int channels)
    : ScoreTensor(height, width, channels,
                  std::vector<float>(static_cast<std::size_t>(height) * width * channels, 0.0f)) {}

ScoreTensor::ScoreTensor(int height, int width, int channels, std::vector<float> data)
    : height_(height), width_(width), channels_(channels), data_(std::move(data)) {
    if (height <= 0 || width <= 0 || channels <= 0) {
        throw std::invalid_argument("ScoreTensor: dimensions must be positive");
    }
    if (data_.size() != static_cast<std::size_t>(height) * width * channels) {
        throw std::invalid_argument("ScoreTensor: data size does not match dimensions");
    }
}

Scr1File read_scr1(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open score file: " + path.string());
    }
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0) {
        throw std::runtime_error("not an SCR1 file: " + path.string());
    }
    Scr1File file;
    std::uint32_t h = read_u32(in);
    std::uint32_t w = read_u32(in);
    std::uint32_t c = read_u32(in);
    char kind_byte = 0;
    in.read(&kind_byte, 1);
    if (!in) {
        throw std::runtime_error("truncated SCR1 header: " + path.string());
    }
    if (kind_byte != 0 && kind_byte != 1) {
        throw std::runtime_error("SCR1 kind byte must be 0 or 1: " + path.string());
    }
    if (h == 0 || w == 0 || c == 0) {
        throw std::runtime_error("SCR1 dimensions must be positive: " + path.string());
    }
    file.height = static_cast<int>(h);
    file.width = static_cast<int>(w);
    file.channels = static_cast<int>(c);
    file.kind = static_cast<ScoreKind>(kind_byte);
    std::size_t count = static_cast<std::size_t>(h) * w * c;
    file.data.resize(count);
    in.read(reinterpret_cast<char*>(file.data.data()),
            static_cast<std::streamsize>(count * sizeof(float)));
    if (!in || in.gcount() != static_cast<std::streamsize>(count * sizeof(float))) {
        throw std::runtime_error("truncated SCR1 payload: " + path.string());
    }
    return file;
}

void write_scr1(const std::filesystem::path& path, const Scr1File& file) {
    if (file.height <= 0 || file.width <= 0 || file.channels <= 0) {
        throw std::invalid_argument("write_scr1: dimensions must be positive");
    }
    std::size_t count =
        static_cast<std::size_t>(file.height) * file.width * file.channels;
    if (file.data.size() != count) {
        throw std::invalid_argument("write_scr1: data size does not match dimensions");
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot write score file: " + path.string());
    }
    out.write(kMagic, 4);
    write_u32(out, static_cast<std::uint32_t>(file.height));
    write_u32(out, static_cast<std::uint32_t>(file.width));
    write_u32(out, static_cast<std::uint32_t>(file.channels));
    char kind_byte = static_cast<char>(file.kind);
    out.write(&kind_byte, 1);
    out.write(reinterpret_cast<const char*>(file.data.data()),
              static_cast<std::streamsize>(count * sizeof(float)));
    if (!out) {
        throw std::runtime_error("failed writing score file: " + path.string());
    }
}

ScoreTensor scores_from_data(int height, int width, int channels, std::vector<float> data,
                             ScoreKind kind) {
    ScoreTensor tensor(height, width, channels, std::move(data));
    for (float v : tensor.data()) {
        if (!std::isfinite(v)) {
            throw std::runtime_error("score tensor contains a non-finite value");
        }
    }
    if (kind == ScoreKind::logits) {
        for (int r = 0; r < height; ++r) {
            for (int c = 0; c < width; ++c) {
                auto px = tensor.pixel(r, c);
                float max_logit = *std::max_element(px.begin(), px.end());
                double sum = 0.0;
                for (float& v : px) {
                    double e = std::exp(static_cast<double>(v) - max_logit);
                    v = static_cast<float>(e);
                    sum += e;
                }
                for (float& v : px) {
                    v = static_cast<float>(v / sum);
                }
            }
        }
    } else {
        for (int r = 0; r < height; ++r) {
            for (int c = 0; c < width; ++c) {
                auto px = tensor.pixel(r, c);
                double sum = 0.0;
                for (float v : px) {
                    if (v < 0.0f) {
                        throw std::runtime_error("probability tensor contains a negative value");
                    }
                    sum += v;
                }
                if (std::abs(sum - 1.0) > kSumTolerance) {
                    throw std::runtime_error("probability tensor pixel does not sum to 1");
                }
            }
        }
    }
    tensor.set_normalized(true);
    return tensor;
}

ScoreTensor load_scores(const std::filesystem::path& path, const Taxonomy& t,
                        std::optional<ScoreKind> expected_kind) {
    Scr1File file = read_scr1(path);
    if (expected_kind && file.kind != *expected_kind) {
        throw std::runtime_error("SCR1 kind does not match the expected kind: " + path.string());
    }
    if (static_cast<std::size_t>(file.channels) != t.num_classes()) {
        throw std::runtime_error("SCR1 channel count does not match the taxonomy: " +
                                 path.string());
    }
    return scores_from_data(file.height, file.width, file.channels, std::move(file.data),
                            file.kind);
}

LabelMap argmax_labels(const ScoreTensor& scores, const Taxonomy& t) {
    if (static_cast<std::size_t>(scores.channels()) != t.num_classes()) {
        throw std::invalid_argument("argmax_labels: channel count does not match the taxonomy");
    }
    LabelMap labels(scores.height(), scores.width());
    for (int r = 0; r < scores.height(); ++r) {
        for (int c = 0; c < scores.width(); ++c) {
            auto px = scores.pixel(r, c);
            int best = static_cast<int>(std::max_element(px.begin(), px.end()) - px.begin());
            labels.at(r, c) = t.id_at(best);
        }
    }
    return labels;
}

void renormalize(ScoreTensor& scores) {
    for (int r = 0; r < scores.height(); ++r) {
        for (int c = 0; c < scores.width(); ++c) {
            auto px = scores.pixel(r, c);
            double sum = 0.0;
            for (float& v : px) {
                if (v < 0.0f) v = 0.0f;
                sum += v;
            }
            if (sum <= 0.0) {
                float uniform = 1.0f / static_cast<float>(px.size());
                for (float& v : px) v = uniform;
            } else {
                for (float& v : px) v = static_cast<float>(v / sum);
            }
        }
    }
    scores.set_normalized(true);
}

}  // namespace segdiag
