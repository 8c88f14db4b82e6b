#include "vmfguard/image.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <string>

namespace vmfguard {

namespace {

void check_unit(std::span<const double> values, const char* what) {
    for (double v : values) {
        if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
            throw std::invalid_argument(std::string(what) + ": value outside [0,1]");
        }
    }
}

void check_dims(int height, int width) {
    if (height <= 0 || width <= 0) {
        throw std::invalid_argument("image dimensions must be positive");
    }
}

std::uint8_t quantize(double v) {
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

// Netpbm header tokenizer: whitespace separated, '#' to end of line is a comment.
class HeaderReader {
public:
    explicit HeaderReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    std::string token() {
        skip_space_and_comments();
        std::string out;
        while (pos_ < bytes_.size() && !std::isspace(bytes_[pos_]) && bytes_[pos_] != '#') {
            out.push_back(static_cast<char>(bytes_[pos_++]));
        }
        if (out.empty()) throw ParseError("ppm: truncated header");
        return out;
    }

    int number(const char* field) {
        const std::string tok = token();
        if (!std::all_of(tok.begin(), tok.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })
            || tok.size() > 9) {
            throw ParseError(std::string("ppm: bad ") + field + " '" + tok + "'");
        }
        return std::stoi(tok);
    }

    // Exactly one whitespace byte separates maxval from the raster.
    std::size_t raster_start() {
        if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) {
            throw ParseError("ppm: missing separator before raster");
        }
        return pos_ + 1;
    }

private:
    void skip_space_and_comments() {
        while (pos_ < bytes_.size()) {
            if (std::isspace(bytes_[pos_])) {
                ++pos_;
            } else if (bytes_[pos_] == '#') {
                while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
            } else {
                break;
            }
        }
    }

    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

Image::Image(int height, int width, int channels, double fill)
    : height_(height), width_(width), channels_(channels) {
    check_dims(height, width);
    if (channels < 1 || channels > 4) throw std::invalid_argument("channels must be in 1..4");
    if (!std::isfinite(fill) || fill < 0.0 || fill > 1.0) throw std::invalid_argument("fill outside [0,1]");
    data_.assign(static_cast<std::size_t>(height) * width * channels, fill);
}

Image::Image(int height, int width, int channels, std::vector<double> data)
    : height_(height), width_(width), channels_(channels), data_(std::move(data)) {
    check_dims(height, width);
    if (channels < 1 || channels > 4) throw std::invalid_argument("channels must be in 1..4");
    if (data_.size() != static_cast<std::size_t>(height) * width * channels) {
        throw std::invalid_argument("image data length does not match dimensions");
    }
    check_unit(data_, "image");
}

void Image::clamp_unit() {
    for (double& v : data_) v = std::clamp(v, 0.0, 1.0);
}

AttentionMap::AttentionMap(int height, int width, std::vector<double> data)
    : height_(height), width_(width), data_(std::move(data)) {
    check_dims(height, width);
    if (data_.size() != static_cast<std::size_t>(height) * width) {
        throw std::invalid_argument("attention data length does not match dimensions");
    }
    check_unit(data_, "attention map");
}

AttentionMap AttentionMap::from_image(const Image& gray) {
    if (gray.channels() != 1) throw std::invalid_argument("attention map must be single-channel");
    return AttentionMap(gray.height(), gray.width(), {gray.data().begin(), gray.data().end()});
}

void Neighborhood::push_back(PixelCoord p, std::span<const double> value) {
    coords.push_back(p);
    pixels.insert(pixels.end(), value.begin(), value.end());
}

Neighborhood window(const Image& img, PixelCoord center, int side) {
    if (side < 1 || side % 2 == 0) throw std::invalid_argument("window side must be odd and >= 1");
    if (!img.contains(center)) throw std::invalid_argument("window center out of bounds");
    const int half = side / 2;
    const int r0 = std::max(0, center.row - half), r1 = std::min(img.height() - 1, center.row + half);
    const int c0 = std::max(0, center.col - half), c1 = std::min(img.width() - 1, center.col + half);

    Neighborhood out;
    out.channels = img.channels();
    out.coords.reserve(std::size_t(r1 - r0 + 1) * (c1 - c0 + 1));
    for (int r = r0; r <= r1; ++r) {
        for (int c = c0; c <= c1; ++c) out.push_back({r, c}, img.pixel(r, c));
    }
    return out;
}

Image decode_ppm(std::span<const std::uint8_t> bytes) {
    HeaderReader header(bytes);
    const std::string magic = header.token();
    int channels = 0;
    if (magic == "P6") {
        channels = 3;
    } else if (magic == "P5") {
        channels = 1;
    } else {
        throw ParseError("ppm: unsupported magic '" + magic + "'");
    }
    const int width = header.number("width");
    const int height = header.number("height");
    const int maxval = header.number("maxval");
    if (width <= 0 || height <= 0) throw ParseError("ppm: zero dimension");
    if (maxval != 255) throw ParseError("ppm: unsupported maxval " + std::to_string(maxval));

    const std::size_t start = header.raster_start();
    const std::size_t count = static_cast<std::size_t>(width) * height * channels;
    if (bytes.size() - start < count) throw ParseError("ppm: truncated payload");

    std::vector<double> data(count);
    for (std::size_t i = 0; i < count; ++i) data[i] = bytes[start + i] / 255.0;
    return Image(height, width, channels, std::move(data));
}

std::vector<std::uint8_t> encode_ppm(const Image& img) {
    if (img.channels() != 1 && img.channels() != 3) {
        throw std::invalid_argument("ppm: only 1 or 3 channels can be encoded");
    }
    const std::string header = std::string(img.channels() == 3 ? "P6" : "P5") + "\n" +
                               std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.reserve(out.size() + img.data().size());
    for (double v : img.data()) out.push_back(quantize(v));
    return out;
}

Image decode_png(std::span<const std::uint8_t> bytes) {
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
        throw ParseError(std::string("png: ") + image.message);
    }
    const bool color = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
    image.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    const int channels = color ? 3 : 1;
    std::vector<std::uint8_t> raw(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, raw.data(), 0, nullptr)) {
        std::string msg = image.message;
        png_image_free(&image);
        throw ParseError("png: " + msg);
    }
    std::vector<double> data(raw.size());
    std::transform(raw.begin(), raw.end(), data.begin(), [](std::uint8_t v) { return v / 255.0; });
    return Image(static_cast<int>(image.height), static_cast<int>(image.width), channels, std::move(data));
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("short write to " + path.string());
}

Image read_image(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    static constexpr std::uint8_t png_sig[] = {0x89, 'P', 'N', 'G'};
    if (bytes.size() >= 4 && std::equal(std::begin(png_sig), std::end(png_sig), bytes.begin())) {
        return decode_png(bytes);
    }
    return decode_ppm(bytes);
}

void write_ppm(const std::filesystem::path& path, const Image& img) {
    write_file(path, encode_ppm(img));
}

}  // namespace vmfguard
