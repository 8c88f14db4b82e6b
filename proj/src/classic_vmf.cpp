#include <omp.h>

#include <algorithm>
#include <limits>
#include <stdexcept>

#include "smart_vmf_detail.hpp"
#include "vmfguard/smart_vmf.hpp"

namespace vmfguard {

namespace {

void check_side(int side) {
    if (side < 1 || side % 2 == 0) throw std::invalid_argument("classic_vmf: side must be odd and >= 1");
}

// Index of the member with the smallest aggregate distance; strict '<' keeps
// the first one on ties.
std::size_t vector_median_index(const double* pixels, std::size_t n, int channels) {
    std::size_t best = 0;
    double best_cost = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
        double cost = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            cost += detail::distance(pixels + i * channels, pixels + j * channels, channels);
        }
        if (cost < best_cost) {
            best_cost = cost;
            best = i;
        }
    }
    return best;
}

}  // namespace

Image classic_vmf_reference(const Image& img, int side) {
    check_side(side);
    Image out(img.height(), img.width(), img.channels());
    for (int r = 0; r < img.height(); ++r) {
        for (int c = 0; c < img.width(); ++c) {
            const Neighborhood nbhd = window(img, {r, c}, side);
            const std::size_t best = vector_median_index(nbhd.pixels.data(), nbhd.size(), nbhd.channels);
            std::ranges::copy(nbhd.pixel(best), out.pixel(r, c).begin());
        }
    }
    return out;
}

Image classic_vmf(const Image& img, int side) {
    check_side(side);
    const int height = img.height(), width = img.width(), channels = img.channels();
    const int half = side / 2;
    const double* src = img.data().data();
    Image out(height, width, channels);
    double* dst = out.data().data();

#pragma omp parallel
    {
        std::vector<double> pixels(std::size_t(side) * side * channels);

#pragma omp for schedule(static)
        for (int r = 0; r < height; ++r) {
            for (int c = 0; c < width; ++c) {
                std::size_t n = 0;
                for (int rr = std::max(0, r - half); rr <= std::min(height - 1, r + half); ++rr) {
                    for (int cc = std::max(0, c - half); cc <= std::min(width - 1, c + half); ++cc, ++n) {
                        const double* x = src + (std::size_t(rr) * width + cc) * channels;
                        std::copy(x, x + channels, pixels.data() + n * channels);
                    }
                }
                const std::size_t best = vector_median_index(pixels.data(), n, channels);
                std::copy_n(pixels.data() + best * channels, channels,
                            dst + (std::size_t(r) * width + c) * channels);
            }
        }
    }
    return out;
}

}  // namespace vmfguard
