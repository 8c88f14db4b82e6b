#include "vmfguard/adversary.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace vmfguard {

std::size_t Mask::popcount() const {
    return static_cast<std::size_t>(std::count(data.begin(), data.end(), std::uint8_t{1}));
}

int AttackConfig::patch_side(int height, int width) const {
    const long side = std::lround(std::sqrt(area_fraction * height * width));
    return static_cast<int>(std::max(1L, side));
}

void AttackConfig::validate() const {
    if (!(target_prob > 0.0 && target_prob <= 1.0)) throw std::invalid_argument("target_prob: must be in (0,1]");
    if (!(step > 0.0)) throw std::invalid_argument("attack_step: must be > 0");
    if (max_iters < 0) throw std::invalid_argument("attack_iters: must be >= 0");
    if (!(area_fraction > 0.0 && area_fraction <= 0.25)) {
        throw std::invalid_argument("area_fraction: must be in (0, 0.25]");
    }
    if (patches < 1 || patches > 4) throw std::invalid_argument("patches: must be in 1..4");
}

std::vector<PixelCoord> corner_placements(int height, int width, int side, int n) {
    if (n < 1 || n > 4) throw std::invalid_argument("corner_placements: n must be in 1..4");
    if (side < 1 || 2 * side > std::min(height, width)) {
        throw std::invalid_argument("corner_placements: side " + std::to_string(side) +
                                    " exceeds half the smaller image dimension");
    }
    const std::vector<PixelCoord> corners{
        {0, 0}, {0, width - side}, {height - side, 0}, {height - side, width - side}};
    return {corners.begin(), corners.begin() + n};
}

Mask build_mask(int height, int width, int side, const std::vector<PixelCoord>& placements) {
    if (height <= 0 || width <= 0 || side < 1) throw std::invalid_argument("build_mask: bad dimensions");
    Mask mask{height, width, std::vector<std::uint8_t>(std::size_t(height) * width, 0)};
    for (const PixelCoord p : placements) {
        if (p.row < 0 || p.col < 0 || p.row + side > height || p.col + side > width) {
            throw std::invalid_argument("build_mask: placement (" + std::to_string(p.row) + "," +
                                        std::to_string(p.col) + ") out of bounds");
        }
        for (int r = p.row; r < p.row + side; ++r) {
            std::fill_n(mask.data.begin() + std::size_t(r) * width + p.col, side, std::uint8_t{1});
        }
    }
    return mask;
}

Image apply_patch(const Image& img, const Image& delta, const Mask& mask) {
    if (!img.same_shape(delta) || mask.height != img.height() || mask.width != img.width()) {
        throw std::invalid_argument("apply_patch: shape mismatch");
    }
    Image out = img;
    for (int r = 0; r < img.height(); ++r) {
        for (int c = 0; c < img.width(); ++c) {
            if (mask.at(r, c)) std::ranges::copy(delta.pixel(r, c), out.pixel(r, c).begin());
        }
    }
    out.clamp_unit();
    return out;
}

AttackResult train_lavan(const Image& img, const Classifier& model, const AttackConfig& cfg, const Mask& mask,
                         int side, const std::vector<PixelCoord>& placements) {
    cfg.validate();
    const int K = model.num_classes();
    const int target = cfg.target_class;
    if (target < 0 || target >= K) throw std::invalid_argument("target_class out of range");
    if (K < 2) throw std::invalid_argument("train_lavan: classifier needs at least two classes");

    AttackResult result;
    result.source_class = model.predict(img);
    if (result.source_class == target) {
        throw std::invalid_argument("train_lavan: image is already classified as the target");
    }

    Image delta(img.height(), img.width(), img.channels(), 0.0);
    Image adv = apply_patch(img, delta, mask);
    const double sign = cfg.literal_sign ? -1.0 : 1.0;

    auto observe = [&](int iteration, const std::vector<double>& logits, int competitor) {
        const auto p = softmax(logits);
        result.trace.push_back({iteration, p[target], argmax(logits), logits[target] - logits[competitor]});
        return p[target];
    };
    auto strongest_other = [&](const std::vector<double>& logits) {
        if (cfg.pin_source) return result.source_class;
        int best = target == 0 ? 1 : 0;
        for (int k = 0; k < K; ++k) {
            if (k != target && logits[k] > logits[best]) best = k;
        }
        return best;
    };

    int i = 0;
    auto logits = model.predict_logits(adv);
    int competitor = strongest_other(logits);
    double prob = observe(i, logits, competitor);
    while (prob < cfg.target_prob && i < cfg.max_iters) {
        const Field grad_t = model.input_gradient(adv, target);
        const Field grad_m = model.input_gradient(adv, competitor);
        for (int r = 0; r < img.height(); ++r) {
            for (int c = 0; c < img.width(); ++c) {
                if (!mask.at(r, c)) continue;
                for (int ch = 0; ch < img.channels(); ++ch) {
                    const double g = grad_t.at(r, c, ch) - grad_m.at(r, c, ch);
                    delta.at(r, c, ch) = std::clamp(delta.at(r, c, ch) + sign * cfg.step * g, 0.0, 1.0);
                }
            }
        }
        adv = apply_patch(img, delta, mask);
        ++i;
        logits = model.predict_logits(adv);
        competitor = strongest_other(logits);
        prob = observe(i, logits, competitor);
    }

    result.success = prob >= cfg.target_prob;
    result.patch.side = side;
    result.patch.placements = placements;
    for (const PixelCoord p : placements) {
        Image content(side, side, img.channels());
        for (int r = 0; r < side; ++r) {
            for (int c = 0; c < side; ++c) {
                std::ranges::copy(delta.pixel(p.row + r, p.col + c), content.pixel(r, c).begin());
            }
        }
        result.patch.contents.push_back(std::move(content));
    }
    result.delta = std::move(delta);
    result.adversarial = std::move(adv);
    return result;
}

AttackResult train_lavan_corners(const Image& img, const Classifier& model, const AttackConfig& cfg) {
    cfg.validate();
    const int side = cfg.patch_side(img.height(), img.width());
    const auto placements = corner_placements(img.height(), img.width(), side, cfg.patches);
    const Mask mask = build_mask(img.height(), img.width(), side, placements);
    return train_lavan(img, model, cfg, mask, side, placements);
}

}  // namespace vmfguard
