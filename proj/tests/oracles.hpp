#pragma once

// Independent re-implementations used only by tests. Nothing here calls the
// library's filter, ablation or certification code.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "vmfguard/image.hpp"
#include "vmfguard/rng.hpp"
#include "vmfguard/smart_vmf.hpp"

namespace oracle {

using vmfguard::Image;

struct GridResult {
    double z = 0.0;
    double objective = 0.0;
};

inline double floored_objective_1d(const std::vector<double>& xs, const std::vector<double>& ws, double z,
                                   double eps) {
    double f = 0.0;
    for (std::size_t j = 0; j < xs.size(); ++j) f += ws[j] * std::max(std::fabs(z - xs[j]), eps);
    return f;
}

/// Dense scan of [0,1] for the weighted 1-D median under the floored objective.
inline GridResult grid_median_1d(const std::vector<double>& xs, const std::vector<double>& ws, double eps,
                                 double step = 1e-4) {
    GridResult best{0.0, std::numeric_limits<double>::infinity()};
    const long n = std::lround(1.0 / step);
    for (long k = 0; k <= n; ++k) {
        const double z = static_cast<double>(k) * step;
        const double f = floored_objective_1d(xs, ws, z, eps);
        if (f < best.objective) best = {z, f};
    }
    return best;
}

inline double dist(const double* a, const double* b, int c) {
    double s = 0.0;
    for (int k = 0; k < c; ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
    return std::sqrt(s);
}

/// Plain Weiszfeld over equally weighted points, from `start`.
inline std::vector<double> unweighted_weiszfeld(const std::vector<std::vector<double>>& pts,
                                                std::vector<double> start, int iters, double eps) {
    const int c = static_cast<int>(start.size());
    for (int it = 0; it < iters; ++it) {
        std::vector<double> num(c, 0.0);
        double den = 0.0;
        for (const auto& p : pts) {
            const double inv = 1.0 / std::max(dist(start.data(), p.data(), c), eps);
            for (int k = 0; k < c; ++k) num[k] += inv * p[k];
            den += inv;
        }
        for (int k = 0; k < c; ++k) start[k] = num[k] / den;
    }
    return start;
}

/// Per-pixel transcription of the adaptive multi-scale filter.
inline Image smart_vmf(const Image& img, const vmfguard::AttentionMap* attention, const vmfguard::FilterConfig& cfg) {
    const int H = img.height(), W = img.width(), C = img.channels();
    Image out(H, W, C, 0.0);
    for (int r = 0; r < H; ++r) {
        for (int c = 0; c < W; ++c) {
            const double* xi = &img.data()[(std::size_t(r) * W + c) * C];
            std::vector<std::vector<double>> medians;
            std::vector<double> residuals;
            for (int side : cfg.scales) {
                const int half = side / 2;
                const double sp = cfg.sigma_p ? *cfg.sigma_p : side / 2.0;
                std::vector<const double*> xs;
                std::vector<double> ws;
                for (int rr = std::max(0, r - half); rr <= std::min(H - 1, r + half); ++rr) {
                    for (int cc = std::max(0, c - half); cc <= std::min(W - 1, c + half); ++cc) {
                        const double* xj = &img.data()[(std::size_t(rr) * W + cc) * C];
                        double w = 1.0;
                        if (cfg.use_content) {
                            const double d = dist(xi, xj, C);
                            w *= std::exp(-d * d / (cfg.sigma_c * cfg.sigma_c));
                        }
                        if (cfg.use_spatial) {
                            const double d2 = double(rr - r) * (rr - r) + double(cc - c) * (cc - c);
                            w *= std::exp(-d2 / (sp * sp));
                        }
                        if (cfg.use_attention && attention) w *= 1.0 + cfg.lambda * attention->at(rr, cc);
                        xs.push_back(xj);
                        ws.push_back(w);
                    }
                }
                double total = 0.0;
                for (double w : ws) total += w;
                for (double& w : ws) w /= total;

                std::vector<double> z(xi, xi + C);
                for (int it = 0; it < cfg.max_iters; ++it) {
                    std::vector<double> num(C, 0.0);
                    double den = 0.0;
                    for (std::size_t j = 0; j < xs.size(); ++j) {
                        const double a = ws[j] / std::max(dist(z.data(), xs[j], C), cfg.epsilon);
                        for (int k = 0; k < C; ++k) num[k] += a * xs[j][k];
                        den += a;
                    }
                    for (int k = 0; k < C; ++k) z[k] = num[k] / den;
                }
                double e = 0.0;
                for (std::size_t j = 0; j < xs.size(); ++j) e += ws[j] * dist(z.data(), xs[j], C);
                medians.push_back(z);
                residuals.push_back(e);
            }
            const std::size_t S = medians.size();
            std::vector<double> pi(S, 1.0 / double(S));
            if (cfg.fusion == vmfguard::FusionMode::reliability) {
                const double lo = *std::min_element(residuals.begin(), residuals.end());
                double total = 0.0;
                for (std::size_t s = 0; s < S; ++s) total += pi[s] = std::exp(-(residuals[s] - lo) / cfg.tau);
                for (double& p : pi) p /= total;
            }
            for (int k = 0; k < C; ++k) {
                double v = 0.0;
                for (std::size_t s = 0; s < S; ++s) v += pi[s] * medians[s][k];
                out.data()[(std::size_t(r) * W + c) * C + k] = std::clamp(v, 0.0, 1.0);
            }
        }
    }
    return out;
}

/// Exhaustive vector median over clipped windows; first minimizer wins.
inline Image classic_vmf(const Image& img, int side) {
    const int H = img.height(), W = img.width(), C = img.channels(), half = side / 2;
    Image out = img;
    for (int r = 0; r < H; ++r) {
        for (int c = 0; c < W; ++c) {
            std::vector<const double*> members;
            for (int rr = r - half; rr <= r + half; ++rr) {
                for (int cc = c - half; cc <= c + half; ++cc) {
                    if (rr >= 0 && rr < H && cc >= 0 && cc < W) {
                        members.push_back(&img.data()[(std::size_t(rr) * W + cc) * C]);
                    }
                }
            }
            double best = std::numeric_limits<double>::infinity();
            const double* pick = nullptr;
            for (const double* a : members) {
                double total = 0.0;
                for (const double* b : members) total += dist(a, b, C);
                if (total < best) {
                    best = total;
                    pick = a;
                }
            }
            std::copy(pick, pick + C, &out.data()[(std::size_t(r) * W + c) * C]);
        }
    }
    return out;
}

/// Number of cyclic length-s intervals (starts 0..n-1) meeting [p, p+m-1].
inline long cyclic_hits(int n, int m, int s, int p) {
    long hits = 0;
    for (int start = 0; start < n; ++start) {
        bool meet = false;
        for (int k = 0; k < s && !meet; ++k) {
            const int x = (start + k) % n;
            meet = x >= p && x < p + m;
        }
        hits += meet ? 1 : 0;
    }
    return hits;
}

/// Worst-case fraction of cyclic column bands of width s meeting an m x m patch.
inline double band_fraction(int h, int w, int m, int s) {
    (void)h;
    long worst = 0;
    for (int pc = 0; pc + m <= w; ++pc) worst = std::max(worst, cyclic_hits(w, m, s, pc));
    return static_cast<double>(worst) / w;
}

/// Worst-case fraction of cyclic s x s blocks meeting an m x m patch. A block
/// meets the patch iff its row span and column span both do, so the count
/// factorizes into row hits times column hits.
inline double block_fraction(int h, int w, int m, int s) {
    long worst_rows = 0, worst_cols = 0;
    for (int pr = 0; pr + m <= h; ++pr) worst_rows = std::max(worst_rows, cyclic_hits(h, m, s, pr));
    for (int pc = 0; pc + m <= w; ++pc) worst_cols = std::max(worst_cols, cyclic_hits(w, m, s, pc));
    return static_cast<double>(worst_rows * worst_cols) / (double(h) * w);
}

/// Block fraction by visiting every (patch, block) pair and every pixel.
inline double block_fraction_bruteforce(int h, int w, int m, int s) {
    long worst = 0;
    for (int pr = 0; pr + m <= h; ++pr) {
        for (int pc = 0; pc + m <= w; ++pc) {
            long hits = 0;
            for (int br = 0; br < h; ++br) {
                for (int bc = 0; bc < w; ++bc) {
                    bool meet = false;
                    for (int i = 0; i < s && !meet; ++i) {
                        for (int j = 0; j < s && !meet; ++j) {
                            const int r = (br + i) % h, c = (bc + j) % w;
                            meet = r >= pr && r < pr + m && c >= pc && c < pc + m;
                        }
                    }
                    hits += meet ? 1 : 0;
                }
            }
            worst = std::max(worst, hits);
        }
    }
    return static_cast<double>(worst) / (double(h) * w);
}

/// count_c must beat every other count by more than 2·delta·n.
inline bool certified(const std::vector<int>& counts, int c, double delta) {
    int n = 0;
    for (int v : counts) n += v;
    for (std::size_t k = 0; k < counts.size(); ++k) {
        if (static_cast<int>(k) == c) continue;
        if (!(counts[c] - counts[k] > 2.0 * delta * n)) return false;
    }
    return true;
}

inline Image random_image(vmfguard::Rng& rng, int h, int w, int c) {
    std::vector<double> data(std::size_t(h) * w * c);
    for (double& v : data) v = rng.uniform();
    return Image(h, w, c, std::move(data));
}

}  // namespace oracle
