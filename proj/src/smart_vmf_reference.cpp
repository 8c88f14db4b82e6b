#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "smart_vmf_detail.hpp"
#include "vmfguard/smart_vmf.hpp"

namespace vmfguard {

std::string to_string(FusionMode mode) {
    switch (mode) {
        case FusionMode::reliability: return "reliability";
        case FusionMode::mean: return "mean";
        case FusionMode::uniform: return "uniform";
    }
    return "reliability";
}

FusionMode parse_fusion_mode(const std::string& text) {
    if (text == "reliability") return FusionMode::reliability;
    if (text == "mean") return FusionMode::mean;
    if (text == "uniform") return FusionMode::uniform;
    throw std::invalid_argument("fusion mode must be reliability|mean|uniform, got '" + text + "'");
}

void FilterConfig::validate() const {
    if (scales.empty()) throw std::invalid_argument("scales: must not be empty");
    for (int s : scales) {
        if (s < 1 || s % 2 == 0) throw std::invalid_argument("scales: every side must be odd and >= 1");
    }
    auto positive = [](double v, const char* name) {
        if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument(std::string(name) + ": must be > 0");
    };
    positive(sigma_c, "sigma_c");
    if (sigma_p) positive(*sigma_p, "sigma_p");
    positive(tau, "tau");
    positive(epsilon, "epsilon");
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw std::invalid_argument("lambda: must be >= 0");
    if (max_iters < 1) throw std::invalid_argument("max_iters: must be >= 1");
}

WeightedNeighborhood adaptive_weights(const Neighborhood& nbhd, std::span<const double> center_pixel,
                                      PixelCoord center_coord, const AttentionMap* attention,
                                      const FilterConfig& cfg, int side) {
    if (nbhd.size() == 0) throw std::invalid_argument("adaptive_weights: empty neighborhood");
    if (center_pixel.size() != static_cast<std::size_t>(nbhd.channels)) {
        throw std::invalid_argument("adaptive_weights: center pixel has the wrong channel count");
    }
    const int channels = nbhd.channels;
    const double sigma_p = cfg.spatial_sigma(side);
    const bool with_attention = cfg.use_attention && attention != nullptr;

    WeightedNeighborhood out;
    out.center = center_coord;
    out.center_pixel.assign(center_pixel.begin(), center_pixel.end());
    out.points = nbhd;
    out.weights.resize(nbhd.size());

    double total = 0.0;
    for (std::size_t j = 0; j < nbhd.size(); ++j) {
        const PixelCoord p = nbhd.coords[j];
        double w = 1.0;
        if (cfg.use_content) w *= detail::content_factor(center_pixel.data(), nbhd.pixel(j).data(), channels, cfg.sigma_c);
        if (cfg.use_spatial) w *= detail::spatial_factor(p.row - center_coord.row, p.col - center_coord.col, sigma_p);
        if (with_attention) w *= 1.0 + cfg.lambda * attention->at(p);
        out.weights[j] = w;
        total += w;
    }
    if (!(total > 0.0)) throw std::invalid_argument("adaptive_weights: all weights vanished");
    for (double& w : out.weights) w /= total;
    return out;
}

std::vector<double> weiszfeld_median(const WeightedNeighborhood& nbhd, const FilterConfig& cfg,
                                     std::vector<double>* objective_trace) {
    const int channels = nbhd.points.channels;
    if (nbhd.size() == 0) throw std::invalid_argument("weiszfeld_median: empty neighborhood");
    if (nbhd.center_pixel.size() != static_cast<std::size_t>(channels)) {
        throw std::invalid_argument("weiszfeld_median: center pixel has the wrong channel count");
    }
    std::vector<double> z = nbhd.center_pixel;
    std::vector<double> num(channels);
    detail::weiszfeld(z.data(), num.data(), nbhd.points.pixels.data(), nbhd.weights.data(), nbhd.size(), channels,
                      cfg.max_iters, cfg.epsilon, objective_trace);
    return z;
}

double residual_energy(const WeightedNeighborhood& nbhd, std::span<const double> median) {
    return detail::residual(median.data(), nbhd.points.pixels.data(), nbhd.weights.data(), nbhd.size(),
                            nbhd.points.channels);
}

FusionResult fuse_scales(std::span<const ScaleCandidate> candidates, const FilterConfig& cfg) {
    if (candidates.empty()) throw std::invalid_argument("fuse_scales: no candidates");
    const std::size_t scales = candidates.size();
    const std::size_t channels = candidates.front().value.size();

    std::vector<double> residuals(scales), values;
    values.reserve(scales * channels);
    for (std::size_t s = 0; s < scales; ++s) {
        if (candidates[s].value.size() != channels) throw std::invalid_argument("fuse_scales: channel mismatch");
        residuals[s] = candidates[s].residual;
        values.insert(values.end(), candidates[s].value.begin(), candidates[s].value.end());
    }

    FusionResult out;
    out.pi.resize(scales);
    out.value.resize(channels);
    if (cfg.fusion == FusionMode::reliability) {
        detail::reliability_weights(residuals.data(), out.pi.data(), scales, cfg.tau);
    } else {
        detail::uniform_weights(out.pi.data(), scales);
    }
    detail::blend(out.pi.data(), values.data(), scales, static_cast<int>(channels), out.value.data());
    return out;
}

Image smart_vmf_reference(const Image& img, const AttentionMap* attention, const FilterConfig& cfg,
                          FilterDiagnostics* diagnostics) {
    cfg.validate();
    if (attention && !attention->matches(img)) throw std::invalid_argument("smart_vmf: attention map size mismatch");

    Image out(img.height(), img.width(), img.channels());
    double max_err = 0.0;
    std::vector<ScaleCandidate> candidates(cfg.scales.size());
    for (int r = 0; r < img.height(); ++r) {
        for (int c = 0; c < img.width(); ++c) {
            const PixelCoord p{r, c};
            for (std::size_t k = 0; k < cfg.scales.size(); ++k) {
                const int side = cfg.scales[k];
                const auto nbhd = adaptive_weights(window(img, p, side), img.pixel(r, c), p, attention, cfg, side);
                candidates[k].value = weiszfeld_median(nbhd, cfg);
                candidates[k].residual =
                    cfg.fusion == FusionMode::uniform ? 0.0 : residual_energy(nbhd, candidates[k].value);
            }
            const FusionResult fused = fuse_scales(candidates, cfg);
            double sum = 0.0;
            for (double pi : fused.pi) sum += pi;
            max_err = std::max(max_err, std::abs(sum - 1.0));
            auto dst = out.pixel(r, c);
            for (int ch = 0; ch < img.channels(); ++ch) dst[ch] = std::clamp(fused.value[ch], 0.0, 1.0);
        }
    }
    if (diagnostics) diagnostics->max_fusion_error = max_err;
    return out;
}

}  // namespace vmfguard
