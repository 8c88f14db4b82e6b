#pragma once

#include <string>
#include <vector>

#include "vmfguard/image.hpp"

namespace vmfguard {

enum class AblationKind { block, band };

std::string to_string(AblationKind kind);
AblationKind parse_ablation_kind(const std::string& text);

struct AblationSpec {
    AblationKind kind = AblationKind::band;
    /// Block side or band width. 0 selects ceil(width / 8).
    int size = 0;
    int stride = 1;
    double fill = 0.5;

    int resolved_size(int width) const { return size > 0 ? size : (width + 7) / 8; }
    /// Throws std::invalid_argument when the spec cannot apply to h x w.
    void validate(int height, int width) const;
};

/// Retained region of one ablation: top-left start, wrapping cyclically.
/// Bands span every row.
struct RetainedRegion {
    AblationKind kind = AblationKind::band;
    int row = 0;
    int col = 0;
    int size = 1;

    bool retains(int r, int c, int height, int width) const;
};

struct AblationMember {
    RetainedRegion region;
    Image image;
};

struct AblationSet {
    Image base;
    AblationSpec spec;
    std::vector<AblationMember> members;
    double delta = 0.0;

    std::size_t n() const { return members.size(); }
};

/// (m+s-1)² / (h w), capped at 1.
double delta_block(int height, int width, int patch_side, int retain_size);
/// (m+s-1) / w, capped at 1.
double delta_band(int height, int width, int patch_side, int retain_size);
double delta_for(const AblationSpec& spec, int height, int width, int patch_side);

/// Deterministic enumeration of every start position (stepping by stride)
/// with cyclic wrap-around. `patch_side` only feeds the stored delta.
AblationSet generate_ablations(const Image& img, const AblationSpec& spec, int patch_side = 1);

}  // namespace vmfguard
