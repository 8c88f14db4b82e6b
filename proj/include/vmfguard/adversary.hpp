#pragma once

#include <cstdint>
#include <vector>

#include "vmfguard/classifier.hpp"
#include "vmfguard/image.hpp"

namespace vmfguard {

/// Binary placement field q.
struct Mask {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> data;

    bool at(int r, int c) const { return data[std::size_t(r) * width + c] != 0; }
    std::size_t popcount() const;
};

struct AttackConfig {
    int target_class = 1;
    /// Stop once softmax(target) reaches this probability.
    double target_prob = 0.9;
    double step = 1e-2;
    int max_iters = 500;
    double area_fraction = 0.01;
    int patches = 1;
    /// Use the update sign exactly as printed in the LaVAN pseudocode
    /// (descends the target-minus-competitor margin).
    bool literal_sign = false;
    /// Contrast against the initial prediction instead of the live
    /// strongest competitor.
    bool pin_source = false;

    /// round(sqrt(area_fraction * h * w)), at least 1.
    int patch_side(int height, int width) const;
    void validate() const;
};

struct PatchSpec {
    int side = 0;
    std::vector<PixelCoord> placements;
    /// One side x side x C content per placement, same order.
    std::vector<Image> contents;
};

struct TraceRow {
    int iteration = 0;
    double target_prob = 0.0;
    int predicted = 0;
    /// logit_target - logit_competitor at loop entry.
    double objective = 0.0;
};

struct AttackResult {
    PatchSpec patch;
    Image delta;        // full-size patch field
    Image adversarial;  // (1-q) x + q δ
    std::vector<TraceRow> trace;
    int source_class = 0;
    bool success = false;
};

/// First n of (0,0), (0,w-s), (h-s,0), (h-s,w-s).
std::vector<PixelCoord> corner_placements(int height, int width, int side, int n);

Mask build_mask(int height, int width, int side, const std::vector<PixelCoord>& placements);

/// (1-q)·x + q·δ, q broadcast over channels.
Image apply_patch(const Image& img, const Image& delta, const Mask& mask);

/// LaVAN patch training on a single image with a fixed mask. Gradients are
/// taken with respect to the full image and applied on the mask support.
AttackResult train_lavan(const Image& img, const Classifier& model, const AttackConfig& cfg, const Mask& mask,
                         int side, const std::vector<PixelCoord>& placements);

/// Convenience: corner placements from cfg.patches and cfg.area_fraction.
AttackResult train_lavan_corners(const Image& img, const Classifier& model, const AttackConfig& cfg);

}  // namespace vmfguard
