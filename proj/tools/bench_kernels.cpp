// Micro-benchmark comparing the serial reference kernels with the OpenMP
// variants. Usage: gf-bench [--size N] [--iters K] [--threads T]
#include <chrono>
#include <cstdio>
#include <cstring>
#include <functional>
#include <string>
#include <vector>

#include "glyphforge/kernels.hpp"
#include "glyphforge/rng.hpp"

using namespace gf;
using Clock = std::chrono::steady_clock;

namespace {

double time_ms(const std::function<void()>& fn, int iters) {
    fn();  // warm up
    const auto t0 = Clock::now();
    for (int i = 0; i < iters; ++i) fn();
    const auto t1 = Clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count() / iters;
}

}  // namespace

int main(int argc, char** argv) {
    int size = 256, iters = 10, threads = 0;
    for (int i = 1; i < argc; ++i) {
        if (!std::strcmp(argv[i], "--size") && i + 1 < argc) size = std::atoi(argv[++i]);
        else if (!std::strcmp(argv[i], "--iters") && i + 1 < argc) iters = std::atoi(argv[++i]);
        else if (!std::strcmp(argv[i], "--threads") && i + 1 < argc) threads = std::atoi(argv[++i]);
    }
    if (threads > 0) kernels::set_threads(threads);

    Rng rng(42);
    const int m = size, k = size, n = size;
    std::vector<double> a(size_t(m) * k), b(size_t(k) * n), c(size_t(m) * n);
    for (auto& x : a) x = rng.normal();
    for (auto& x : b) x = rng.normal();

    std::printf("kernel benchmark, size=%d, iters=%d, threads=%d\n", size, iters,
                kernels::threads());
    std::printf("%-14s %12s %12s %8s\n", "kernel", "serial(ms)", "openmp(ms)", "speedup");

    struct Case {
        const char* name;
        std::function<void()> run;
    };
    std::vector<Case> cases = {
        {"matmul_nn", [&] { kernels::matmul_nn(a.data(), b.data(), c.data(), m, k, n); }},
        {"matmul_nt", [&] { kernels::matmul_nt(a.data(), b.data(), c.data(), m, k, n); }},
        {"matmul_tn", [&] { kernels::matmul_tn(a.data(), b.data(), c.data(), m, k, n); }},
    };
    const int img = size;
    std::vector<double> blur_src(size_t(img) * img), blur_dst(blur_src.size());
    for (auto& x : blur_src) x = rng.uniform();
    cases.push_back({"gauss_blur",
                     [&] { kernels::gaussian_blur(blur_src.data(), blur_dst.data(), img, img, 2.0); }});

    const int ch = 16, hw = 64, ks = 3;
    std::vector<double> conv_img(size_t(ch) * hw * hw);
    for (auto& x : conv_img) x = rng.normal();
    std::vector<double> cols(size_t(hw) * hw * ch * ks * ks);
    cases.push_back({"im2col", [&] {
                         kernels::im2col(conv_img.data(), ch, hw, hw, ks, 1, 1, cols.data());
                     }});

    for (auto& cse : cases) {
        kernels::set_backend(kernels::Backend::Serial);
        const double ts = time_ms(cse.run, iters);
        kernels::set_backend(kernels::Backend::Parallel);
        const double tp = time_ms(cse.run, iters);
        std::printf("%-14s %12.3f %12.3f %7.2fx\n", cse.name, ts, tp, ts / tp);
    }

    const double flops = 2.0 * double(m) * k * n;
    kernels::set_backend(kernels::Backend::Parallel);
    const double tmm = time_ms(cases[0].run, iters);
    std::printf("\nmatmul_nn throughput: %.2f GFLOP/s (openmp)\n", flops / (tmm * 1e6));
    return 0;
}
