#pragma once

// Inner numeric steps shared by the serial reference and the OpenMP kernel.
// Both paths must evaluate these in the same order so their outputs agree
// bit for bit.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace vmfguard::detail {

inline double distance(const double* a, const double* b, int channels) {
    double acc = 0.0;
    for (int c = 0; c < channels; ++c) {
        const double d = a[c] - b[c];
        acc += d * d;
    }
    return std::sqrt(acc);
}

inline double content_factor(const double* center, const double* other, int channels, double sigma_c) {
    double acc = 0.0;
    for (int c = 0; c < channels; ++c) {
        const double d = center[c] - other[c];
        acc += d * d;
    }
    return std::exp(-acc / (sigma_c * sigma_c));
}

inline double spatial_factor(int dr, int dc, double sigma_p) {
    const double d2 = static_cast<double>(dr) * dr + static_cast<double>(dc) * dc;
    return std::exp(-d2 / (sigma_p * sigma_p));
}

/// Σ w_j max(|z - x_j|, ε) in entry order.
inline double floored_objective(const double* z, const double* pixels, const double* weights, std::size_t n,
                                int channels, double eps) {
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        acc += weights[j] * std::max(distance(z, pixels + j * channels, channels), eps);
    }
    return acc;
}

/// In-place Weiszfeld iteration on `z`. `num` is scratch of size `channels`.
inline void weiszfeld(double* z, double* num, const double* pixels, const double* weights, std::size_t n,
                      int channels, int iters, double eps, std::vector<double>* trace) {
    if (trace) trace->push_back(floored_objective(z, pixels, weights, n, channels, eps));
    for (int t = 0; t < iters; ++t) {
        std::fill(num, num + channels, 0.0);
        double den = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const double* x = pixels + j * channels;
            const double coef = weights[j] / std::max(distance(z, x, channels), eps);
            for (int c = 0; c < channels; ++c) num[c] += coef * x[c];
            den += coef;
        }
        for (int c = 0; c < channels; ++c) z[c] = num[c] / den;
        if (trace) trace->push_back(floored_objective(z, pixels, weights, n, channels, eps));
    }
}

inline double residual(const double* median, const double* pixels, const double* weights, std::size_t n,
                       int channels) {
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) acc += weights[j] * distance(median, pixels + j * channels, channels);
    return acc;
}

/// Softmax(-e/τ) shifted by the minimum residual; returns Σπ - 1 before
/// any correction.
inline double reliability_weights(const double* residuals, double* pi, std::size_t scales, double tau) {
    const double e_min = *std::min_element(residuals, residuals + scales);
    double total = 0.0;
    for (std::size_t s = 0; s < scales; ++s) {
        pi[s] = std::exp(-(residuals[s] - e_min) / tau);
        total += pi[s];
    }
    double check = 0.0;
    for (std::size_t s = 0; s < scales; ++s) {
        pi[s] /= total;
        check += pi[s];
    }
    return check - 1.0;
}

inline double uniform_weights(double* pi, std::size_t scales) {
    double check = 0.0;
    for (std::size_t s = 0; s < scales; ++s) {
        pi[s] = 1.0 / static_cast<double>(scales);
        check += pi[s];
    }
    return check - 1.0;
}

/// out = Σ_s π_s x̂_s, candidates stored back to back.
inline void blend(const double* pi, const double* candidates, std::size_t scales, int channels, double* out) {
    for (int c = 0; c < channels; ++c) {
        double acc = 0.0;
        for (std::size_t s = 0; s < scales; ++s) acc += pi[s] * candidates[s * channels + c];
        out[c] = acc;
    }
}

}  // namespace vmfguard::detail
