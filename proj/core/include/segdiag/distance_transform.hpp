#pragma once

#include <cstdint>

#include "segdiag/image.hpp"

namespace segdiag {

/// Exact squared Euclidean distance to the nearest nonzero seed, computed
/// with the Felzenszwalb-Huttenlocher lower-envelope algorithm. With no
/// seeds, every entry is +infinity.
Image<double> squared_euclidean_distance(const Image<std::uint8_t>& seeds);

}  // namespace segdiag
