#include "segdiag/resample.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace segdiag {
namespace {

/// Cubic convolution kernel, Keys 1981, a = -0.5.
double cubic_weight(double x) {
    constexpr double a = -0.5;
    x = std::abs(x);
    if (x < 1.0) {
        return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
    }
    if (x < 2.0) {
        return (((x - 5.0) * x + 8.0) * x - 4.0) * a;
    }
    return 0.0;
}

struct Taps {
    int base;          // index of the first of four source samples
    double weight[4];  // kernel weights for base .. base + 3
};

std::vector<Taps> make_taps(int src_size, int dst_size) {
    std::vector<Taps> taps(dst_size);
    double factor = static_cast<double>(dst_size) / src_size;
    for (int d = 0; d < dst_size; ++d) {
        double s = (d + 0.5) / factor - 0.5;
        int floor_s = static_cast<int>(std::floor(s));
        double frac = s - floor_s;
        taps[d].base = floor_s - 1;
        for (int k = 0; k < 4; ++k) {
            taps[d].weight[k] = cubic_weight(frac - (k - 1));
        }
    }
    return taps;
}

int clamp_index(int i, int size) { return std::clamp(i, 0, size - 1); }

}  // namespace

Image<double> bicubic_resize(const Image<double>& src, int out_height, int out_width) {
    if (out_height <= 0 || out_width <= 0) {
        throw std::invalid_argument("bicubic_resize: output dimensions must be positive");
    }
    auto row_taps = make_taps(src.height(), out_height);
    auto col_taps = make_taps(src.width(), out_width);

    // Horizontal pass, then vertical.
    Image<double> mid(src.height(), out_width);
    for (int r = 0; r < src.height(); ++r) {
        for (int c = 0; c < out_width; ++c) {
            const Taps& t = col_taps[c];
            double acc = 0.0;
            for (int k = 0; k < 4; ++k) {
                acc += t.weight[k] * src.at(r, clamp_index(t.base + k, src.width()));
            }
            mid.at(r, c) = acc;
        }
    }
    Image<double> out(out_height, out_width);
    for (int r = 0; r < out_height; ++r) {
        const Taps& t = row_taps[r];
        for (int c = 0; c < out_width; ++c) {
            double acc = 0.0;
            for (int k = 0; k < 4; ++k) {
                acc += t.weight[k] * mid.at(clamp_index(t.base + k, src.height()), c);
            }
            out.at(r, c) = acc;
        }
    }
    return out;
}

ScoreTensor bicubic_resize(const ScoreTensor& src, int out_height, int out_width) {
    ScoreTensor out(out_height, out_width, src.channels());
    Image<double> plane(src.height(), src.width());
    for (int ch = 0; ch < src.channels(); ++ch) {
        for (int r = 0; r < src.height(); ++r) {
            for (int c = 0; c < src.width(); ++c) {
                plane.at(r, c) = src.at(r, c, ch);
            }
        }
        Image<double> resized = bicubic_resize(plane, out_height, out_width);
        for (int r = 0; r < out_height; ++r) {
            for (int c = 0; c < out_width; ++c) {
                out.at(r, c, ch) = static_cast<float>(resized.at(r, c));
            }
        }
    }
    return out;
}

RgbImage bicubic_resize(const RgbImage& src, int out_height, int out_width) {
    RgbImage out;
    out.height = out_height;
    out.width = out_width;
    out.data.resize(static_cast<std::size_t>(out_height) * out_width * 3);
    Image<double> plane(src.height, src.width);
    for (int ch = 0; ch < 3; ++ch) {
        for (int r = 0; r < src.height; ++r) {
            for (int c = 0; c < src.width; ++c) {
                plane.at(r, c) = src.at(r, c, ch);
            }
        }
        Image<double> resized = bicubic_resize(plane, out_height, out_width);
        for (int r = 0; r < out_height; ++r) {
            for (int c = 0; c < out_width; ++c) {
                double v = std::round(resized.at(r, c));
                out.at(r, c, ch) = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
            }
        }
    }
    return out;
}

}  // namespace segdiag
