#ifndef GLYPHFORGE_OPS_HPP
#define GLYPHFORGE_OPS_HPP

#include <array>
#include <vector>

#include "glyphforge/tensor.hpp"

// Differentiable tensor operations. Binary elementwise ops support
// right-aligned broadcasting (each trailing dim of b equals a's or is 1).
namespace gf::ops {

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);
Tensor neg(const Tensor& a);

Tensor tanh(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor silu(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor sqrt(const Tensor& a);
Tensor square(const Tensor& a);
// log(1 + e^x), numerically stable; -log(sigmoid(x)) == softplus(-x).
Tensor softplus(const Tensor& a);
// x^p elementwise; requires x > 0 when p is not a nonnegative integer.
Tensor pow_scalar(const Tensor& a, double p);
// Gradient passes only where lo <= x <= hi.
Tensor clamp(const Tensor& a, double lo, double hi);

// 2D matmul with optional transposes: op(a) [m,k] * op(b) [k,n].
Tensor matmul(const Tensor& a, const Tensor& b, bool trans_a = false, bool trans_b = false);
// Batched matmul on rank-3 tensors; b may be rank-2 (broadcast over batch).
Tensor bmm(const Tensor& a, const Tensor& b, bool trans_a = false, bool trans_b = false);
// x [..., in] * w[out, in]^T + bias[out]; bias optional (undefined Tensor).
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor sum_lastdim(const Tensor& a, bool keepdim = false);
Tensor mean_lastdim(const Tensor& a, bool keepdim = false);

Tensor softmax_lastdim(const Tensor& a);
Tensor rmsnorm_lastdim(const Tensor& a, double eps = 1e-6);
Tensor l2normalize_lastdim(const Tensor& a, double eps = 1e-12);

Tensor reshape(const Tensor& a, const Shape& shape);
Tensor permute(const Tensor& a, const std::vector<int>& perm);
Tensor concat(const std::vector<Tensor>& parts, int axis);
Tensor slice(const Tensor& a, int axis, int start, int len);

// NCHW conv with square kernel. x [B,C,H,W], w [O,C,k,k], bias [O] optional.
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, int stride, int pad);
Tensor upsample_nearest2x(const Tensor& x);

// Multi-axis rotary embedding. x [B,K,H,hd], coords[k] = (axis0,axis1,axis2),
// split = even per-axis widths summing to hd. Adjacent-pair rotation within
// each axis segment, frequency base 10000.
Tensor rope3d(const Tensor& x, const std::vector<std::array<int, 3>>& coords,
              const std::array<int, 3>& split);

// Mean squared error over all elements.
Tensor mse(const Tensor& a, const Tensor& b);

}  // namespace gf::ops

#endif
