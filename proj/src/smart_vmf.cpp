#include <omp.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "smart_vmf_detail.hpp"
#include "vmfguard/smart_vmf.hpp"

namespace vmfguard {

namespace {

struct ScalePlan {
    int side = 1;
    int half = 0;
    std::vector<double> spatial;  // side x side table indexed by offset

    double spatial_at(int dr, int dc) const { return spatial[(dr + half) * side + (dc + half)]; }
};

std::vector<ScalePlan> plan_scales(const FilterConfig& cfg) {
    std::vector<ScalePlan> plans;
    for (int side : cfg.scales) {
        ScalePlan plan;
        plan.side = side;
        plan.half = side / 2;
        plan.spatial.resize(std::size_t(side) * side);
        const double sigma_p = cfg.spatial_sigma(side);
        for (int dr = -plan.half; dr <= plan.half; ++dr) {
            for (int dc = -plan.half; dc <= plan.half; ++dc) {
                plan.spatial[(dr + plan.half) * side + (dc + plan.half)] = detail::spatial_factor(dr, dc, sigma_p);
            }
        }
        plans.push_back(std::move(plan));
    }
    return plans;
}

// Per-thread buffers, sized for the largest window.
struct Scratch {
    std::vector<double> pixels, weights, z, num, candidates, residuals, pi;

    Scratch(std::size_t max_window, std::size_t scales, int channels)
        : pixels(max_window * channels),
          weights(max_window),
          z(channels),
          num(channels),
          candidates(scales * channels),
          residuals(scales),
          pi(scales) {}
};

}  // namespace

Image smart_vmf(const Image& img, const AttentionMap* attention, const FilterConfig& cfg,
                FilterDiagnostics* diagnostics) {
    cfg.validate();
    if (attention && !attention->matches(img)) throw std::invalid_argument("smart_vmf: attention map size mismatch");

    const int height = img.height(), width = img.width(), channels = img.channels();
    const auto plans = plan_scales(cfg);
    const std::size_t scales = plans.size();
    int max_side = 1;
    for (const auto& p : plans) max_side = std::max(max_side, p.side);
    const std::size_t max_window = std::size_t(max_side) * max_side;
    const bool with_attention = cfg.use_attention && attention != nullptr;
    const double* src = img.data().data();

    Image out(height, width, channels);
    double* dst = out.data().data();
    double max_err = 0.0;

#pragma omp parallel reduction(max : max_err)
    {
        Scratch s(max_window, scales, channels);

#pragma omp for schedule(dynamic, 1)
        for (int r = 0; r < height; ++r) {
            for (int c = 0; c < width; ++c) {
                const double* center = src + (std::size_t(r) * width + c) * channels;

                for (std::size_t k = 0; k < scales; ++k) {
                    const ScalePlan& plan = plans[k];
                    const int r0 = std::max(0, r - plan.half), r1 = std::min(height - 1, r + plan.half);
                    const int c0 = std::max(0, c - plan.half), c1 = std::min(width - 1, c + plan.half);

                    std::size_t n = 0;
                    double total = 0.0;
                    for (int rr = r0; rr <= r1; ++rr) {
                        for (int cc = c0; cc <= c1; ++cc, ++n) {
                            const double* x = src + (std::size_t(rr) * width + cc) * channels;
                            std::copy(x, x + channels, s.pixels.data() + n * channels);
                            double w = 1.0;
                            if (cfg.use_content) w *= detail::content_factor(center, x, channels, cfg.sigma_c);
                            if (cfg.use_spatial) w *= plan.spatial_at(rr - r, cc - c);
                            if (with_attention) w *= 1.0 + cfg.lambda * attention->at(rr, cc);
                            s.weights[n] = w;
                            total += w;
                        }
                    }
                    for (std::size_t j = 0; j < n; ++j) s.weights[j] /= total;

                    std::copy(center, center + channels, s.z.data());
                    detail::weiszfeld(s.z.data(), s.num.data(), s.pixels.data(), s.weights.data(), n, channels,
                                      cfg.max_iters, cfg.epsilon, nullptr);
                    std::copy(s.z.begin(), s.z.end(), s.candidates.data() + k * channels);
                    s.residuals[k] = cfg.fusion == FusionMode::uniform
                                         ? 0.0
                                         : detail::residual(s.z.data(), s.pixels.data(), s.weights.data(), n,
                                                            channels);
                }

                const double err = cfg.fusion == FusionMode::reliability
                                       ? detail::reliability_weights(s.residuals.data(), s.pi.data(), scales, cfg.tau)
                                       : detail::uniform_weights(s.pi.data(), scales);
                max_err = std::max(max_err, std::abs(err));

                double* o = dst + (std::size_t(r) * width + c) * channels;
                detail::blend(s.pi.data(), s.candidates.data(), scales, channels, o);
                for (int ch = 0; ch < channels; ++ch) o[ch] = std::clamp(o[ch], 0.0, 1.0);
            }
        }
    }
    if (diagnostics) diagnostics->max_fusion_error = max_err;
    return out;
}

}  // namespace vmfguard
