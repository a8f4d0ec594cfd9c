#include "segdiag/png_io.hpp"

#include <png.h>

#include <cstdio>
#include <cstring>
#include <limits>
#include <memory>
#include <stdexcept>
#include <vector>

namespace segdiag {
namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
    FilePtr f(std::fopen(path.string().c_str(), mode));
    if (!f) {
        throw std::runtime_error("cannot open PNG file: " + path.string());
    }
    return f;
}

class PngReader {
public:
    explicit PngReader(const std::filesystem::path& path) : path_(path), file_(open_file(path, "rb")) {
        unsigned char sig[8];
        if (std::fread(sig, 1, 8, file_.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
            throw std::runtime_error("not a PNG file: " + path.string());
        }
        png_ = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
        if (!png_) throw std::runtime_error("png_create_read_struct failed");
        info_ = png_create_info_struct(png_);
        if (!info_) {
            png_destroy_read_struct(&png_, nullptr, nullptr);
            throw std::runtime_error("png_create_info_struct failed");
        }
        if (setjmp(png_jmpbuf(png_))) {
            throw std::runtime_error("failed reading PNG: " + path.string());
        }
        png_init_io(png_, file_.get());
        png_set_sig_bytes(png_, 8);
        png_read_info(png_, info_);
    }

    ~PngReader() { png_destroy_read_struct(&png_, &info_, nullptr); }

    PngReader(const PngReader&) = delete;
    PngReader& operator=(const PngReader&) = delete;

    png_structp png() { return png_; }
    png_infop info() { return info_; }
    const std::filesystem::path& path() const { return path_; }

    int width() const { return static_cast<int>(png_get_image_width(png_, info_)); }
    int height() const { return static_cast<int>(png_get_image_height(png_, info_)); }
    int bit_depth() const { return png_get_bit_depth(png_, info_); }
    int color_type() const { return png_get_color_type(png_, info_); }

    std::vector<std::vector<unsigned char>> read_rows() {
        if (setjmp(png_jmpbuf(png_))) {
            throw std::runtime_error("failed reading PNG rows: " + path_.string());
        }
        png_read_update_info(png_, info_);
        std::size_t rowbytes = png_get_rowbytes(png_, info_);
        std::vector<std::vector<unsigned char>> rows(height(),
                                                     std::vector<unsigned char>(rowbytes));
        std::vector<png_bytep> row_ptrs(rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i) row_ptrs[i] = rows[i].data();
        png_read_image(png_, row_ptrs.data());
        png_read_end(png_, nullptr);
        return rows;
    }

private:
    std::filesystem::path path_;
    FilePtr file_;
    png_structp png_ = nullptr;
    png_infop info_ = nullptr;
};

/// Decodes a grayscale or palette PNG into raw per-pixel integers.
template <typename T>
Image<T> load_index_png(const std::filesystem::path& path, const char* what) {
    PngReader reader(path);
    int color = reader.color_type();
    int depth = reader.bit_depth();
    if (color != PNG_COLOR_TYPE_GRAY && color != PNG_COLOR_TYPE_PALETTE) {
        throw std::runtime_error(std::string(what) +
                                 " PNG must be grayscale or palette-indexed: " + path.string());
    }
    if (setjmp(png_jmpbuf(reader.png()))) {
        throw std::runtime_error("failed reading PNG: " + path.string());
    }
    if (depth < 8) {
        png_set_packing(reader.png());
    }
    if (depth == 16) {
        png_set_swap(reader.png());
    }
    auto rows = reader.read_rows();

    Image<T> out(reader.height(), reader.width());
    int bytes_per_sample = depth == 16 ? 2 : 1;
    for (int r = 0; r < out.height(); ++r) {
        const unsigned char* row = rows[r].data();
        for (int c = 0; c < out.width(); ++c) {
            std::uint32_t value;
            if (bytes_per_sample == 2) {
                std::uint16_t v;
                std::memcpy(&v, row + 2 * c, 2);
                value = v;
            } else {
                value = row[c];
            }
            if (value > std::numeric_limits<T>::max()) {
                throw std::runtime_error(std::string(what) + " value out of range in " +
                                         path.string());
            }
            out.at(r, c) = static_cast<T>(value);
        }
    }
    return out;
}

}  // namespace

LabelMap load_label_png(const std::filesystem::path& path) {
    return load_index_png<ClassId>(path, "label");
}

InstanceMap load_instance_png(const std::filesystem::path& path) {
    return load_index_png<std::uint32_t>(path, "instance");
}

RgbImage load_rgb_png(const std::filesystem::path& path) {
    PngReader reader(path);
    if (setjmp(png_jmpbuf(reader.png()))) {
        throw std::runtime_error("failed reading PNG: " + path.string());
    }
    int color = reader.color_type();
    if (color == PNG_COLOR_TYPE_PALETTE) {
        png_set_palette_to_rgb(reader.png());
    }
    if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) {
        if (reader.bit_depth() < 8) png_set_expand_gray_1_2_4_to_8(reader.png());
        png_set_gray_to_rgb(reader.png());
    }
    if (reader.bit_depth() == 16) {
        png_set_strip_16(reader.png());
    }
    png_set_strip_alpha(reader.png());
    auto rows = reader.read_rows();

    RgbImage out;
    out.height = reader.height();
    out.width = reader.width();
    out.data.resize(static_cast<std::size_t>(out.height) * out.width * 3);
    for (int r = 0; r < out.height; ++r) {
        std::memcpy(out.data.data() + static_cast<std::size_t>(r) * out.width * 3, rows[r].data(),
                    static_cast<std::size_t>(out.width) * 3);
    }
    return out;
}

namespace {

class PngWriter {
public:
    PngWriter(const std::filesystem::path& path, int height, int width, int bit_depth,
              int color_type)
        : path_(path), file_(open_file(path, "wb")) {
        png_ = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
        if (!png_) throw std::runtime_error("png_create_write_struct failed");
        info_ = png_create_info_struct(png_);
        if (!info_) {
            png_destroy_write_struct(&png_, nullptr);
            throw std::runtime_error("png_create_info_struct failed");
        }
        if (setjmp(png_jmpbuf(png_))) {
            throw std::runtime_error("failed writing PNG: " + path.string());
        }
        png_init_io(png_, file_.get());
        png_set_IHDR(png_, info_, static_cast<png_uint_32>(width),
                     static_cast<png_uint_32>(height), bit_depth, color_type,
                     PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
        png_write_info(png_, info_);
        if (bit_depth == 16) {
            png_set_swap(png_);
        }
    }

    ~PngWriter() { png_destroy_write_struct(&png_, &info_); }

    PngWriter(const PngWriter&) = delete;
    PngWriter& operator=(const PngWriter&) = delete;

    void write(std::vector<png_bytep>& row_ptrs) {
        if (setjmp(png_jmpbuf(png_))) {
            throw std::runtime_error("failed writing PNG rows: " + path_.string());
        }
        png_write_image(png_, row_ptrs.data());
        png_write_end(png_, nullptr);
    }

private:
    std::filesystem::path path_;
    FilePtr file_;
    png_structp png_ = nullptr;
    png_infop info_ = nullptr;
};

template <typename T>
void write_gray_png(const std::filesystem::path& path, const Image<T>& image, int bit_depth) {
    std::size_t bytes = bit_depth == 16 ? 2 : 1;
    std::vector<std::vector<unsigned char>> rows(
        image.height(), std::vector<unsigned char>(image.width() * bytes));
    for (int r = 0; r < image.height(); ++r) {
        for (int c = 0; c < image.width(); ++c) {
            if (bytes == 2) {
                std::uint16_t v = static_cast<std::uint16_t>(image.at(r, c));
                std::memcpy(rows[r].data() + 2 * c, &v, 2);
            } else {
                rows[r][c] = static_cast<unsigned char>(image.at(r, c));
            }
        }
    }
    std::vector<png_bytep> row_ptrs(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) row_ptrs[i] = rows[i].data();
    PngWriter writer(path, image.height(), image.width(), bit_depth, PNG_COLOR_TYPE_GRAY);
    writer.write(row_ptrs);
}

}  // namespace

void write_label_png(const std::filesystem::path& path, const LabelMap& labels) {
    bool fits_8bit = true;
    for (int r = 0; r < labels.height() && fits_8bit; ++r) {
        for (int c = 0; c < labels.width(); ++c) {
            if (labels.at(r, c) > 255) {
                fits_8bit = false;
                break;
            }
        }
    }
    write_gray_png(path, labels, fits_8bit ? 8 : 16);
}

void write_instance_png(const std::filesystem::path& path, const InstanceMap& instances) {
    for (int r = 0; r < instances.height(); ++r) {
        for (int c = 0; c < instances.width(); ++c) {
            if (instances.at(r, c) > 65535) {
                throw std::runtime_error("instance id exceeds 16-bit PNG range: " + path.string());
            }
        }
    }
    write_gray_png(path, instances, 16);
}

void write_rgb_png(const std::filesystem::path& path, const RgbImage& image) {
    if (image.data.size() != static_cast<std::size_t>(image.height) * image.width * 3) {
        throw std::invalid_argument("write_rgb_png: data size does not match dimensions");
    }
    std::vector<png_bytep> row_ptrs(image.height);
    for (int r = 0; r < image.height; ++r) {
        row_ptrs[r] =
            const_cast<png_bytep>(image.data.data() + static_cast<std::size_t>(r) * image.width * 3);
    }
    PngWriter writer(path, image.height, image.width, 8, PNG_COLOR_TYPE_RGB);
    writer.write(row_ptrs);
}

}  // namespace segdiag
