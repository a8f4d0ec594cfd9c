#pragma once

#include <cmath>

#include "segdiag/image.hpp"
#include "segdiag/scores.hpp"

namespace segdiag {

/// Bicubic resampling with the cubic convolution kernel (a = -0.5).
/// Sample centers align: src = (dst + 0.5) / factor - 0.5, with coordinates
/// clamped at the edges. Arithmetic is double precision.
Image<double> bicubic_resize(const Image<double>& src, int out_height, int out_width);

inline Image<double> bicubic_resize(const Image<double>& src, double factor) {
    return bicubic_resize(src, static_cast<int>(std::lround(factor * src.height())),
                          static_cast<int>(std::lround(factor * src.width())));
}

/// Channel-wise bicubic resize. The result is not renormalized.
ScoreTensor bicubic_resize(const ScoreTensor& src, int out_height, int out_width);

/// Channel-wise bicubic resize with the result rounded and clamped to [0, 255].
RgbImage bicubic_resize(const RgbImage& src, int out_height, int out_width);

}  // namespace segdiag
