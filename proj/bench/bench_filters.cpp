// Times the serial reference filters against the OpenMP kernels and checks
// that both produce identical output.
//
// usage: bench_filters [size] [repeats]

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <vector>

#include "vmfguard/rng.hpp"
#include "vmfguard/smart_vmf.hpp"

using namespace vmfguard;

namespace {

Image noisy_image(int size, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> data(std::size_t(size) * size * 3);
    for (double& v : data) v = rng.uniform();
    return Image(size, size, 3, std::move(data));
}

template <typename Fn>
double best_seconds(int repeats, Fn&& fn) {
    double best = 1e300;
    for (int i = 0; i < repeats; ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        fn();
        const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
        if (dt.count() < best) best = dt.count();
    }
    return best;
}

}  // namespace

int main(int argc, char** argv) {
    const int size = argc > 1 ? std::atoi(argv[1]) : 64;
    const int repeats = argc > 2 ? std::atoi(argv[2]) : 3;
    if (size < 1 || repeats < 1) {
        std::fprintf(stderr, "usage: bench_filters [size] [repeats]\n");
        return 1;
    }
    const Image img = noisy_image(size, 7);
    const FilterConfig cfg;
    std::printf("image %dx%dx3, %d threads, best of %d\n", size, size, omp_get_max_threads(), repeats);

    Image ref, par;
    const double t_ref = best_seconds(repeats, [&] { ref = smart_vmf_reference(img, nullptr, cfg); });
    const double t_par = best_seconds(repeats, [&] { par = smart_vmf(img, nullptr, cfg); });
    std::printf("%-12s serial %8.4f s  parallel %8.4f s  speedup %5.2fx  identical %s\n", "smart_vmf", t_ref, t_par,
                t_ref / t_par, ref == par ? "yes" : "NO");
    bool ok = ref == par;

    const double c_ref = best_seconds(repeats, [&] { ref = classic_vmf_reference(img, 5); });
    const double c_par = best_seconds(repeats, [&] { par = classic_vmf(img, 5); });
    std::printf("%-12s serial %8.4f s  parallel %8.4f s  speedup %5.2fx  identical %s\n", "classic_vmf", c_ref, c_par,
                c_ref / c_par, ref == par ? "yes" : "NO");
    ok = ok && ref == par;
    return ok ? 0 : 1;
}
