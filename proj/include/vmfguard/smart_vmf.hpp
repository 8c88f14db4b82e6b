#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vmfguard/image.hpp"

namespace vmfguard {

enum class FusionMode {
    reliability,  // softmax(-e_s / tau)
    mean,         // 1/|S|, residuals ignored
    uniform,      // 1/|S| fixed up front, residuals never computed
};

std::string to_string(FusionMode mode);
FusionMode parse_fusion_mode(const std::string& text);

/// Hyperparameters of the adaptive multi-scale filter plus the component
/// toggles used for ablation runs.
struct FilterConfig {
    std::vector<int> scales{3, 5, 7};
    double sigma_c = 0.3;
    /// Spatial falloff in pixels. Absent means half the window side, per scale.
    std::optional<double> sigma_p;
    double lambda = 1.0;
    double tau = 0.1;
    int max_iters = 20;
    double epsilon = 1e-6;

    bool use_content = true;
    bool use_spatial = true;
    bool use_attention = true;
    FusionMode fusion = FusionMode::reliability;

    /// Throws std::invalid_argument naming the offending field.
    void validate() const;
    double spatial_sigma(int side) const { return sigma_p ? *sigma_p : 0.5 * side; }
};

/// A neighborhood with normalized, non-negative weights.
struct WeightedNeighborhood {
    PixelCoord center;
    std::vector<double> center_pixel;
    Neighborhood points;
    std::vector<double> weights;

    std::size_t size() const { return points.size(); }
};

/// Per-scale median and its residual energy.
struct ScaleCandidate {
    std::vector<double> value;
    double residual = 0.0;
};

struct FusionResult {
    std::vector<double> value;
    std::vector<double> pi;
};

/// w_j ∝ exp(-|x_i-x_j|²/σc²) · exp(-|p_i-p_j|²/σp²) · (1 + λ a_j), each
/// factor replaced by 1 when toggled off, then normalized to sum 1.
/// `side` resolves the automatic σp. A null `attention` means a_j = 0.
WeightedNeighborhood adaptive_weights(const Neighborhood& nbhd, std::span<const double> center_pixel,
                                      PixelCoord center_coord, const AttentionMap* attention,
                                      const FilterConfig& cfg, int side);

/// Runs exactly cfg.max_iters Weiszfeld updates from the center pixel, with
/// distances floored at cfg.epsilon. When `objective_trace` is given it
/// receives the floored objective Σ w_j max(|z-x_j|, ε) before the first
/// update and after every update.
std::vector<double> weiszfeld_median(const WeightedNeighborhood& nbhd, const FilterConfig& cfg,
                                     std::vector<double>* objective_trace = nullptr);

/// Σ w_j ‖median − x_j‖₂.
double residual_energy(const WeightedNeighborhood& nbhd, std::span<const double> median);

FusionResult fuse_scales(std::span<const ScaleCandidate> candidates, const FilterConfig& cfg);

struct FilterDiagnostics {
    /// max over pixels of |Σ_s π_s − 1|.
    double max_fusion_error = 0.0;
};

/// Adaptive multi-scale vector median filter, OpenMP-parallel over rows.
/// Output is bitwise independent of the thread count.
Image smart_vmf(const Image& img, const AttentionMap* attention, const FilterConfig& cfg,
                FilterDiagnostics* diagnostics = nullptr);

/// Serial reference: composes window / adaptive_weights / weiszfeld_median /
/// residual_energy / fuse_scales pixel by pixel. Kept for testing the kernel.
Image smart_vmf_reference(const Image& img, const AttentionMap* attention, const FilterConfig& cfg,
                          FilterDiagnostics* diagnostics = nullptr);

/// Classic vector median: each pixel becomes the window member minimizing
/// the summed distance to all members. Ties go to the first member in
/// row-major order.
Image classic_vmf(const Image& img, int side);
Image classic_vmf_reference(const Image& img, int side);

}  // namespace vmfguard
