#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace vmfguard {

/// Raised by the raster codecs on malformed or unsupported input.
class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct PixelCoord {
    int row = 0;
    int col = 0;

    auto operator<=>(const PixelCoord&) const = default;
};

/// Dense H x W x C raster, row-major and channel-interleaved.
///
/// Every element is finite and in [0,1] after construction or decode. The
/// mutable accessors exist for kernels that write into a preallocated
/// output; callers that write out-of-range values must clamp_unit() before
/// handing the image on.
class Image {
public:
    Image() = default;
    Image(int height, int width, int channels, double fill = 0.0);
    /// Takes ownership of `data`; throws std::invalid_argument on a size
    /// mismatch or any value outside [0,1].
    Image(int height, int width, int channels, std::vector<double> data);

    int height() const { return height_; }
    int width() const { return width_; }
    int channels() const { return channels_; }
    std::size_t pixel_count() const { return static_cast<std::size_t>(height_) * width_; }
    bool empty() const { return data_.empty(); }

    std::span<const double> data() const { return data_; }
    std::span<double> data() { return data_; }

    std::span<const double> pixel(int row, int col) const {
        return {data_.data() + offset(row, col), static_cast<std::size_t>(channels_)};
    }
    std::span<double> pixel(int row, int col) {
        return {data_.data() + offset(row, col), static_cast<std::size_t>(channels_)};
    }
    double at(int row, int col, int ch) const { return data_[offset(row, col) + ch]; }
    double& at(int row, int col, int ch) { return data_[offset(row, col) + ch]; }

    bool contains(PixelCoord p) const {
        return p.row >= 0 && p.row < height_ && p.col >= 0 && p.col < width_;
    }
    bool same_shape(const Image& other) const {
        return height_ == other.height_ && width_ == other.width_ && channels_ == other.channels_;
    }

    void clamp_unit();

    bool operator==(const Image&) const = default;

private:
    std::size_t offset(int row, int col) const {
        return (static_cast<std::size_t>(row) * width_ + col) * channels_;
    }

    int height_ = 0;
    int width_ = 0;
    int channels_ = 0;
    std::vector<double> data_;
};

/// H x W x C real field without the [0,1] constraint (input gradients).
struct Field {
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<double> data;

    Field() = default;
    Field(int h, int w, int c) : height(h), width(w), channels(c), data(std::size_t(h) * w * c, 0.0) {}

    double at(int row, int col, int ch) const {
        return data[(static_cast<std::size_t>(row) * width + col) * channels + ch];
    }
    double& at(int row, int col, int ch) {
        return data[(static_cast<std::size_t>(row) * width + col) * channels + ch];
    }
};

/// H x W saliency field in [0,1].
class AttentionMap {
public:
    AttentionMap() = default;
    AttentionMap(int height, int width, std::vector<double> data);

    int height() const { return height_; }
    int width() const { return width_; }
    double at(int row, int col) const { return data_[static_cast<std::size_t>(row) * width_ + col]; }
    double at(PixelCoord p) const { return at(p.row, p.col); }
    std::span<const double> data() const { return data_; }

    bool matches(const Image& img) const { return height_ == img.height() && width_ == img.width(); }

    /// Single-channel image reinterpreted as saliency.
    static AttentionMap from_image(const Image& gray);

private:
    int height_ = 0;
    int width_ = 0;
    std::vector<double> data_;
};

/// Window members gathered around a center: coordinates plus a flat copy of
/// their pixel vectors, in row-major order.
struct Neighborhood {
    int channels = 0;
    std::vector<PixelCoord> coords;
    std::vector<double> pixels;

    std::size_t size() const { return coords.size(); }
    std::span<const double> pixel(std::size_t j) const {
        return {pixels.data() + j * channels, static_cast<std::size_t>(channels)};
    }
    void push_back(PixelCoord p, std::span<const double> value);
};

/// All in-bounds pixels of the side x side square centered at `center`.
/// Border windows are clipped to the image, never padded.
Neighborhood window(const Image& img, PixelCoord center, int side);

// Binary PPM (P6) / PGM (P5), maxval 255.
Image decode_ppm(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_ppm(const Image& img);

// 8-bit gray / RGB PNG, input only. Alpha is dropped.
Image decode_png(std::span<const std::uint8_t> bytes);

/// Reads PPM/PGM or PNG, dispatching on the file signature.
Image read_image(const std::filesystem::path& path);
void write_ppm(const std::filesystem::path& path, const Image& img);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace vmfguard
