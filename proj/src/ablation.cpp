#include "vmfguard/ablation.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace vmfguard {

namespace {

void check_delta_args(int height, int width, int m, int s) {
    if (height <= 0 || width <= 0 || m <= 0 || s <= 0) {
        throw std::invalid_argument("delta: dimensions, patch side and retain size must be positive");
    }
}

// Offset of `x` from `start` walking forward cyclically modulo `period`.
int cyclic_offset(int x, int start, int period) { return ((x - start) % period + period) % period; }

}  // namespace

std::string to_string(AblationKind kind) { return kind == AblationKind::block ? "block" : "band"; }

AblationKind parse_ablation_kind(const std::string& text) {
    if (text == "block") return AblationKind::block;
    if (text == "band") return AblationKind::band;
    throw std::invalid_argument("ablation kind must be block|band, got '" + text + "'");
}

void AblationSpec::validate(int height, int width) const {
    const int s = resolved_size(width);
    if (s < 1) throw std::invalid_argument("ablation_size: must be >= 1");
    if (stride < 1) throw std::invalid_argument("ablation_stride: must be >= 1");
    if (!(fill >= 0.0 && fill <= 1.0)) throw std::invalid_argument("ablation_fill: must be in [0,1]");
    if (kind == AblationKind::block && s > std::min(height, width)) {
        throw std::invalid_argument("ablation_size: block larger than the image");
    }
    if (kind == AblationKind::band && s > width) throw std::invalid_argument("ablation_size: band wider than the image");
}

bool RetainedRegion::retains(int r, int c, int height, int width) const {
    const bool in_cols = cyclic_offset(c, col, width) < size;
    if (kind == AblationKind::band) return in_cols;
    return in_cols && cyclic_offset(r, row, height) < size;
}

double delta_block(int height, int width, int patch_side, int retain_size) {
    check_delta_args(height, width, patch_side, retain_size);
    const double span = patch_side + retain_size - 1.0;
    return std::min(1.0, span * span / (static_cast<double>(height) * width));
}

double delta_band(int height, int width, int patch_side, int retain_size) {
    check_delta_args(height, width, patch_side, retain_size);
    return std::min(1.0, (patch_side + retain_size - 1.0) / width);
}

double delta_for(const AblationSpec& spec, int height, int width, int patch_side) {
    const int s = spec.resolved_size(width);
    return spec.kind == AblationKind::block ? delta_block(height, width, patch_side, s)
                                            : delta_band(height, width, patch_side, s);
}

AblationSet generate_ablations(const Image& img, const AblationSpec& spec, int patch_side) {
    spec.validate(img.height(), img.width());
    const int height = img.height(), width = img.width(), channels = img.channels();
    const int s = spec.resolved_size(width);

    std::vector<RetainedRegion> regions;
    if (spec.kind == AblationKind::band) {
        for (int c = 0; c < width; c += spec.stride) regions.push_back({AblationKind::band, 0, c, s});
    } else {
        for (int r = 0; r < height; r += spec.stride) {
            for (int c = 0; c < width; c += spec.stride) regions.push_back({AblationKind::block, r, c, s});
        }
    }

    AblationSet set;
    set.base = img;
    set.spec = spec;
    set.delta = delta_for(spec, height, width, patch_side);
    set.members.resize(regions.size());

#pragma omp parallel for schedule(static)
    for (std::size_t k = 0; k < regions.size(); ++k) {
        Image member(height, width, channels, spec.fill);
        const RetainedRegion& region = regions[k];
        for (int r = 0; r < height; ++r) {
            for (int c = 0; c < width; ++c) {
                if (!region.retains(r, c, height, width)) continue;
                std::ranges::copy(img.pixel(r, c), member.pixel(r, c).begin());
            }
        }
        set.members[k] = {region, std::move(member)};
    }
    return set;
}

}  // namespace vmfguard
