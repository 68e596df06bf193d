#ifndef GLYPHFORGE_KERNELS_HPP
#define GLYPHFORGE_KERNELS_HPP

#include <cstdint>

// Compute kernels behind the tensor ops. Every kernel has a serial reference
// implementation and an OpenMP variant; both produce bitwise-identical output
// because parallelism is always across independent output elements. The
// active backend is a process-wide switch (see set_backend), which the tests
// use to cross-check the two implementations and the benchmark tool uses to
// compare throughput.
namespace gf::kernels {

enum class Backend { Serial, Parallel };

Backend backend();
void set_backend(Backend b);
// Thread count for the parallel backend (clamped to hardware). 0 = default.
void set_threads(int n);
int threads();

// c[m,n] = a[m,k] * b[k,n]
void matmul_nn(const double* a, const double* b, double* c, int m, int k, int n);
// c[m,n] = a[m,k] * b[n,k]^T
void matmul_nt(const double* a, const double* b, double* c, int m, int k, int n);
// c[m,n] = a[k,m]^T * b[k,n]
void matmul_tn(const double* a, const double* b, double* c, int m, int k, int n);

// im2col for NCHW conv with square kernel. cols has shape
// [out_h*out_w, channels*ksize*ksize] (row-major), one image at a time.
void im2col(const double* img, int channels, int height, int width, int ksize,
            int stride, int pad, double* cols);
// Transposed scatter of col gradients back to image gradients (accumulates).
void col2im(const double* cols, int channels, int height, int width, int ksize,
            int stride, int pad, double* img_grad);

// Separable gaussian blur on one channel plane (reflect-101 border).
void gaussian_blur(const double* src, double* dst, int h, int w, double sigma);

// y[i] = alpha*x[i] + y[i]
void axpy(int n, double alpha, const double* x, double* y);

inline int conv_out_dim(int in, int ksize, int stride, int pad) {
    return (in + 2 * pad - ksize) / stride + 1;
}

}  // namespace gf::kernels

#endif
