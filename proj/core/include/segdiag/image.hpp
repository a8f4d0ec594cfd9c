#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace segdiag {

/// Row-major 2-D grid. Rows index downward, columns rightward.
template <typename T>
class Image {
public:
    Image() = default;

    Image(int height, int width, T fill = T{})
        : height_(height),
          width_(width),
          data_(checked_size(height, width), fill) {}

    Image(int height, int width, std::vector<T> data)
        : height_(height), width_(width), data_(std::move(data)) {
        if (data_.size() != checked_size(height, width))
            throw std::invalid_argument("Image: data size does not match dimensions");
    }

    int height() const { return height_; }
    int width() const { return width_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    T& at(int row, int col) { return data_[index(row, col)]; }
    const T& at(int row, int col) const { return data_[index(row, col)]; }
    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    std::vector<T>& data() { return data_; }
    const std::vector<T>& data() const { return data_; }

    bool same_shape(const Image& other) const {
        return height_ == other.height_ && width_ == other.width_;
    }
    bool in_bounds(int row, int col) const {
        return row >= 0 && row < height_ && col >= 0 && col < width_;
    }

    friend bool operator==(const Image&, const Image&) = default;

private:
    static std::size_t checked_size(int height, int width) {
        if (height <= 0 || width <= 0)
            throw std::invalid_argument("Image: dimensions must be positive");
        return static_cast<std::size_t>(height) * static_cast<std::size_t>(width);
    }
    std::size_t index(int row, int col) const {
        return static_cast<std::size_t>(row) * width_ + col;
    }

    int height_ = 0;
    int width_ = 0;
    std::vector<T> data_;
};

using ClassId = std::uint16_t;
using LabelMap = Image<ClassId>;
using InstanceMap = Image<std::uint32_t>;

/// Interleaved 8-bit RGB image.
struct RgbImage {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> data;  // height*width*3, RGB innermost

    RgbImage() = default;
    RgbImage(int h, int w)
        : height(h), width(w), data(static_cast<std::size_t>(h) * w * 3, 0) {
        if (h <= 0 || w <= 0)
            throw std::invalid_argument("RgbImage: dimensions must be positive");
    }
    std::uint8_t& at(int row, int col, int channel) {
        return data[(static_cast<std::size_t>(row) * width + col) * 3 + channel];
    }
    std::uint8_t at(int row, int col, int channel) const {
        return data[(static_cast<std::size_t>(row) * width + col) * 3 + channel];
    }
};

}  // namespace segdiag
