#pragma once

#include <filesystem>

#include "segdiag/image.hpp"

namespace segdiag {

/// Reads a label map from an 8- or 16-bit grayscale PNG, or from a palette
/// PNG whose raw indices are the labels. RGB images are rejected: there is no
/// portable color-to-class convention.
LabelMap load_label_png(const std::filesystem::path& path);

/// Same decoding rules as load_label_png, but values are instance ids.
InstanceMap load_instance_png(const std::filesystem::path& path);

/// Reads an 8-bit RGB or RGBA PNG (alpha is dropped). Grayscale and palette
/// images are expanded to RGB.
RgbImage load_rgb_png(const std::filesystem::path& path);

/// Writes labels as grayscale: 8-bit when all values fit, 16-bit otherwise.
void write_label_png(const std::filesystem::path& path, const LabelMap& labels);

/// Writes instance ids as 16-bit grayscale. Ids above 65535 are rejected.
void write_instance_png(const std::filesystem::path& path, const InstanceMap& instances);

void write_rgb_png(const std::filesystem::path& path, const RgbImage& image);

}  // namespace segdiag
