#include "glyphforge/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace gf::kernels {

namespace {
Backend g_backend =
#ifdef _OPENMP
    Backend::Parallel;
#else
    Backend::Serial;
#endif
int g_threads = 0;

inline bool parallel() { return g_backend == Backend::Parallel; }
}  // namespace

Backend backend() { return g_backend; }

void set_backend(Backend b) {
#ifndef _OPENMP
    b = Backend::Serial;
#endif
    g_backend = b;
}

void set_threads(int n) {
    g_threads = n;
#ifdef _OPENMP
    if (n > 0) omp_set_num_threads(n);
#endif
}

int threads() {
#ifdef _OPENMP
    return g_threads > 0 ? g_threads : omp_get_max_threads();
#else
    return 1;
#endif
}

// Row-blocked matmul. Each output row is produced by one serial pass, so the
// parallel loop over rows is bitwise-identical to the serial version.
namespace {

inline void mm_nn_row(const double* a, const double* b, double* c, int i, int k, int n) {
    double* ci = c + size_t(i) * n;
    std::memset(ci, 0, sizeof(double) * n);
    const double* ai = a + size_t(i) * k;
    for (int p = 0; p < k; ++p) {
        const double av = ai[p];
        if (av == 0.0) continue;
        const double* bp = b + size_t(p) * n;
        for (int j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
}

inline void mm_nt_row(const double* a, const double* b, double* c, int i, int k, int n) {
    const double* ai = a + size_t(i) * k;
    double* ci = c + size_t(i) * n;
    for (int j = 0; j < n; ++j) {
        const double* bj = b + size_t(j) * k;
        double acc = 0.0;
        for (int p = 0; p < k; ++p) acc += ai[p] * bj[p];
        ci[j] = acc;
    }
}

}  // namespace

void matmul_nn(const double* a, const double* b, double* c, int m, int k, int n) {
    if (parallel()) {
#pragma omp parallel for schedule(static)
        for (int i = 0; i < m; ++i) mm_nn_row(a, b, c, i, k, n);
    } else {
        for (int i = 0; i < m; ++i) mm_nn_row(a, b, c, i, k, n);
    }
}

void matmul_nt(const double* a, const double* b, double* c, int m, int k, int n) {
    if (parallel()) {
#pragma omp parallel for schedule(static)
        for (int i = 0; i < m; ++i) mm_nt_row(a, b, c, i, k, n);
    } else {
        for (int i = 0; i < m; ++i) mm_nt_row(a, b, c, i, k, n);
    }
}

void matmul_tn(const double* a, const double* b, double* c, int m, int k, int n) {
    // a is [k, m], b is [k, n]; c[i,j] = sum_p a[p,i] * b[p,j].
    auto row = [&](int i) {
        double* ci = c + size_t(i) * n;
        std::memset(ci, 0, sizeof(double) * n);
        for (int p = 0; p < k; ++p) {
            const double av = a[size_t(p) * m + i];
            if (av == 0.0) continue;
            const double* bp = b + size_t(p) * n;
            for (int j = 0; j < n; ++j) ci[j] += av * bp[j];
        }
    };
    if (parallel()) {
#pragma omp parallel for schedule(static)
        for (int i = 0; i < m; ++i) row(i);
    } else {
        for (int i = 0; i < m; ++i) row(i);
    }
}

void im2col(const double* img, int channels, int height, int width, int ksize,
            int stride, int pad, double* cols) {
    const int oh = conv_out_dim(height, ksize, stride, pad);
    const int ow = conv_out_dim(width, ksize, stride, pad);
    const int patch = channels * ksize * ksize;
    auto fill_row = [&](int idx) {
        const int oy = idx / ow;
        const int ox = idx % ow;
        double* row = cols + size_t(idx) * patch;
        int col = 0;
        for (int ch = 0; ch < channels; ++ch) {
            const double* plane = img + size_t(ch) * height * width;
            for (int ky = 0; ky < ksize; ++ky) {
                const int iy = oy * stride + ky - pad;
                for (int kx = 0; kx < ksize; ++kx) {
                    const int ix = ox * stride + kx - pad;
                    row[col++] = (iy >= 0 && iy < height && ix >= 0 && ix < width)
                                     ? plane[size_t(iy) * width + ix]
                                     : 0.0;
                }
            }
        }
    };
    const int total = oh * ow;
    if (parallel()) {
#pragma omp parallel for schedule(static)
        for (int idx = 0; idx < total; ++idx) fill_row(idx);
    } else {
        for (int idx = 0; idx < total; ++idx) fill_row(idx);
    }
}

void col2im(const double* cols, int channels, int height, int width, int ksize,
            int stride, int pad, double* img_grad) {
    const int oh = conv_out_dim(height, ksize, stride, pad);
    const int ow = conv_out_dim(width, ksize, stride, pad);
    const int patch = channels * ksize * ksize;
    // Parallel across channels: a channel owns a disjoint slice of img_grad
    // and of every patch row, so scatter order per element matches serial.
    auto scatter_channel = [&](int ch) {
        double* plane = img_grad + size_t(ch) * height * width;
        const int base = ch * ksize * ksize;
        for (int oy = 0; oy < oh; ++oy) {
            for (int ox = 0; ox < ow; ++ox) {
                const double* row = cols + (size_t(oy) * ow + ox) * patch + base;
                int col = 0;
                for (int ky = 0; ky < ksize; ++ky) {
                    const int iy = oy * stride + ky - pad;
                    for (int kx = 0; kx < ksize; ++kx, ++col) {
                        const int ix = ox * stride + kx - pad;
                        if (iy >= 0 && iy < height && ix >= 0 && ix < width)
                            plane[size_t(iy) * width + ix] += row[col];
                    }
                }
            }
        }
    };
    if (parallel()) {
#pragma omp parallel for schedule(static)
        for (int ch = 0; ch < channels; ++ch) scatter_channel(ch);
    } else {
        for (int ch = 0; ch < channels; ++ch) scatter_channel(ch);
    }
}

namespace {
std::vector<double> gaussian_taps(double sigma) {
    const int radius = std::max(1, int(std::ceil(3.0 * sigma)));
    std::vector<double> taps(size_t(2 * radius + 1));
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        const double v = std::exp(-0.5 * (i * i) / (sigma * sigma));
        taps[size_t(i + radius)] = v;
        sum += v;
    }
    for (auto& t : taps) t /= sum;
    return taps;
}

inline int reflect101(int i, int n) {
    if (n == 1) return 0;
    while (i < 0 || i >= n) {
        if (i < 0) i = -i;
        if (i >= n) i = 2 * (n - 1) - i;
    }
    return i;
}
}  // namespace

void gaussian_blur(const double* src, double* dst, int h, int w, double sigma) {
    if (sigma <= 0.0) {
        std::memcpy(dst, src, sizeof(double) * size_t(h) * w);
        return;
    }
    const auto taps = gaussian_taps(sigma);
    const int radius = int(taps.size() / 2);
    std::vector<double> tmp(size_t(h) * w);

    auto blur_row = [&](int y) {
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int t = -radius; t <= radius; ++t)
                acc += taps[size_t(t + radius)] * src[size_t(y) * w + reflect101(x + t, w)];
            tmp[size_t(y) * w + x] = acc;
        }
    };
    auto blur_col = [&](int y) {
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int t = -radius; t <= radius; ++t)
                acc += taps[size_t(t + radius)] * tmp[size_t(reflect101(y + t, h)) * w + x];
            dst[size_t(y) * w + x] = acc;
        }
    };
    if (parallel()) {
#pragma omp parallel for schedule(static)
        for (int y = 0; y < h; ++y) blur_row(y);
#pragma omp parallel for schedule(static)
        for (int y = 0; y < h; ++y) blur_col(y);
    } else {
        for (int y = 0; y < h; ++y) blur_row(y);
        for (int y = 0; y < h; ++y) blur_col(y);
    }
}

void axpy(int n, double alpha, const double* x, double* y) {
    if (parallel() && n >= 4096) {
#pragma omp parallel for schedule(static)
        for (int i = 0; i < n; ++i) y[i] += alpha * x[i];
    } else {
        for (int i = 0; i < n; ++i) y[i] += alpha * x[i];
    }
}

}  // namespace gf::kernels
