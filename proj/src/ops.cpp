#include "glyphforge/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "glyphforge/kernels.hpp"

namespace gf::ops {

using Node = Tensor::Node;

// ---------------------------------------------------------------------------
// broadcast helpers

namespace {

// Right-aligned broadcast of b onto a. Returns per-dim strides for b in a's
// index space (0 where broadcast), or throws.
struct Broadcast {
    Shape a_shape;
    std::vector<int64_t> b_strides;  // in a's rank
};

Broadcast make_broadcast(const Shape& a, const Shape& b) {
    if (b.size() > a.size())
        throw ArgumentError("broadcast: rhs rank exceeds lhs: " + shape_str(a) + " vs " +
                            shape_str(b));
    Broadcast bc;
    bc.a_shape = a;
    bc.b_strides.assign(a.size(), 0);
    int64_t stride = 1;
    int off = int(a.size() - b.size());
    // compute row-major strides of b, right-aligned into a
    std::vector<int64_t> raw(b.size());
    for (int i = int(b.size()) - 1; i >= 0; --i) {
        raw[size_t(i)] = stride;
        stride *= b[size_t(i)];
    }
    for (int i = 0; i < int(a.size()); ++i) {
        if (i < off) {
            bc.b_strides[size_t(i)] = 0;
        } else {
            int bd = b[size_t(i - off)];
            if (bd == a[size_t(i)])
                bc.b_strides[size_t(i)] = raw[size_t(i - off)];
            else if (bd == 1)
                bc.b_strides[size_t(i)] = 0;
            else
                throw ArgumentError("broadcast: incompatible shapes " + shape_str(a) + " vs " +
                                    shape_str(b));
        }
    }
    return bc;
}

// Iterates a's index space; f(ai, bi) gets flat indices into a and b.
template <class F>
void for_broadcast(const Broadcast& bc, F&& f) {
    const auto& sh = bc.a_shape;
    const int rank = int(sh.size());
    std::vector<int> idx(size_t(rank), 0);
    const int64_t total = shape_numel(sh);
    int64_t bi = 0;
    for (int64_t ai = 0; ai < total; ++ai) {
        f(ai, bi);
        for (int d = rank - 1; d >= 0; --d) {
            idx[size_t(d)]++;
            bi += bc.b_strides[size_t(d)];
            if (idx[size_t(d)] < sh[size_t(d)]) break;
            bi -= int64_t(sh[size_t(d)]) * bc.b_strides[size_t(d)];
            idx[size_t(d)] = 0;
        }
    }
}

enum class BinOp { Add, Sub, Mul, Div };

Tensor binary(const Tensor& a, const Tensor& b, BinOp op) {
    const Broadcast bc = make_broadcast(a.shape(), b.shape());
    std::vector<double> out(size_t(a.numel()), 0.0);
    const double* av = a.data();
    const double* bv = b.data();
    switch (op) {
        case BinOp::Add:
            for_broadcast(bc, [&](int64_t ai, int64_t bi) { out[size_t(ai)] = av[ai] + bv[bi]; });
            break;
        case BinOp::Sub:
            for_broadcast(bc, [&](int64_t ai, int64_t bi) { out[size_t(ai)] = av[ai] - bv[bi]; });
            break;
        case BinOp::Mul:
            for_broadcast(bc, [&](int64_t ai, int64_t bi) { out[size_t(ai)] = av[ai] * bv[bi]; });
            break;
        case BinOp::Div:
            for_broadcast(bc, [&](int64_t ai, int64_t bi) { out[size_t(ai)] = av[ai] / bv[bi]; });
            break;
    }
    auto an = a.node();
    auto bn = b.node();
    return Tensor::make(
        a.shape(), std::move(out), {a, b}, [an, bn, bc, op](Node& self) {
            Node* pa = an.get();
            Node* pb = bn.get();
            const double* g = self.grad.data();
            if (pa->requires_grad) {
                pa->ensure_grad();
                double* ga = pa->grad.data();
                const double* bv2 = pb->value.data();
                const double* av2 = pa->value.data();
                switch (op) {
                    case BinOp::Add:
                    case BinOp::Sub:
                        for (int64_t i = 0; i < int64_t(self.value.size()); ++i) ga[i] += g[i];
                        break;
                    case BinOp::Mul:
                        for_broadcast(bc, [&](int64_t ai, int64_t bi) { ga[ai] += g[ai] * bv2[bi]; });
                        break;
                    case BinOp::Div:
                        for_broadcast(bc, [&](int64_t ai, int64_t bi) { ga[ai] += g[ai] / bv2[bi]; });
                        break;
                }
                (void)av2;
            }
            if (pb->requires_grad) {
                pb->ensure_grad();
                double* gb = pb->grad.data();
                const double* av2 = pa->value.data();
                const double* bv2 = pb->value.data();
                switch (op) {
                    case BinOp::Add:
                        for_broadcast(bc, [&](int64_t ai, int64_t bi) { gb[bi] += g[ai]; });
                        break;
                    case BinOp::Sub:
                        for_broadcast(bc, [&](int64_t ai, int64_t bi) { gb[bi] -= g[ai]; });
                        break;
                    case BinOp::Mul:
                        for_broadcast(bc, [&](int64_t ai, int64_t bi) { gb[bi] += g[ai] * av2[ai]; });
                        break;
                    case BinOp::Div:
                        for_broadcast(bc, [&](int64_t ai, int64_t bi) {
                            gb[bi] -= g[ai] * av2[ai] / (bv2[bi] * bv2[bi]);
                        });
                        break;
                }
            }
        });
}

template <class Fwd, class Bwd>
Tensor unary(const Tensor& a, Fwd fwd, Bwd bwd_from_in_out) {
    std::vector<double> out(size_t(a.numel()), 0.0);
    const double* av = a.data();
    for (int64_t i = 0; i < a.numel(); ++i) out[size_t(i)] = fwd(av[i]);
    auto an = a.node();
    return Tensor::make(a.shape(), std::move(out), {a},
                        [an, bwd_from_in_out](Node& self) {
                            Node* pa = an.get();
                            if (!pa->requires_grad) return;
                            pa->ensure_grad();
                            double* ga = pa->grad.data();
                            const double* g = self.grad.data();
                            const double* x = pa->value.data();
                            const double* y = self.value.data();
                            for (int64_t i = 0; i < int64_t(self.value.size()); ++i)
                                ga[i] += g[i] * bwd_from_in_out(x[i], y[i]);
                        });
}

}  // namespace

// ---------------------------------------------------------------------------
// elementwise

Tensor add(const Tensor& a, const Tensor& b) { return binary(a, b, BinOp::Add); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary(a, b, BinOp::Sub); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary(a, b, BinOp::Mul); }
Tensor div(const Tensor& a, const Tensor& b) { return binary(a, b, BinOp::Div); }

Tensor scale(const Tensor& a, double s) {
    return unary(a, [s](double x) { return x * s; }, [s](double, double) { return s; });
}

Tensor add_scalar(const Tensor& a, double s) {
    return unary(a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Tensor neg(const Tensor& a) { return scale(a, -1.0); }

Tensor tanh(const Tensor& a) {
    return unary(a, [](double x) { return std::tanh(x); },
                 [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& a) {
    return unary(a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
                 [](double, double y) { return y * (1.0 - y); });
}

Tensor silu(const Tensor& a) {
    return unary(a,
                 [](double x) { return x / (1.0 + std::exp(-x)); },
                 [](double x, double) {
                     const double s = 1.0 / (1.0 + std::exp(-x));
                     return s * (1.0 + x * (1.0 - s));
                 });
}

Tensor relu(const Tensor& a) {
    return unary(a, [](double x) { return x > 0.0 ? x : 0.0; },
                 [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor exp(const Tensor& a) {
    return unary(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
    return unary(a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor sqrt(const Tensor& a) {
    return unary(a, [](double x) { return std::sqrt(x); },
                 [](double, double y) { return 0.5 / y; });
}

Tensor square(const Tensor& a) {
    return unary(a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Tensor softplus(const Tensor& a) {
    return unary(a,
                 [](double x) { return x > 30.0 ? x : std::log1p(std::exp(std::min(x, 30.0))); },
                 [](double x, double) { return 1.0 / (1.0 + std::exp(-x)); });
}

Tensor pow_scalar(const Tensor& a, double p) {
    return unary(a, [p](double x) { return std::pow(x, p); },
                 [p](double x, double) { return p * std::pow(x, p - 1.0); });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
    return unary(a, [lo, hi](double x) { return std::min(std::max(x, lo), hi); },
                 [lo, hi](double x, double) { return (x >= lo && x <= hi) ? 1.0 : 0.0; });
}

// ---------------------------------------------------------------------------
// matmul family

namespace {
void mm_dispatch(const double* a, const double* b, double* c, int m, int k, int n, bool ta,
                 bool tb) {
    if (!ta && !tb)
        kernels::matmul_nn(a, b, c, m, k, n);
    else if (!ta && tb)
        kernels::matmul_nt(a, b, c, m, k, n);
    else if (ta && !tb)
        kernels::matmul_tn(a, b, c, m, k, n);
    else
        throw ArgumentError("matmul: double transpose unsupported");
}
}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b, bool trans_a, bool trans_b) {
    if (a.rank() != 2 || b.rank() != 2) throw ArgumentError("matmul expects rank-2 tensors");
    const int m = trans_a ? a.dim(1) : a.dim(0);
    const int k = trans_a ? a.dim(0) : a.dim(1);
    const int kb = trans_b ? b.dim(1) : b.dim(0);
    const int n = trans_b ? b.dim(0) : b.dim(1);
    if (k != kb)
        throw ArgumentError("matmul inner dim mismatch: " + shape_str(a.shape()) + " x " +
                            shape_str(b.shape()));
    std::vector<double> out(size_t(m) * n);
    mm_dispatch(a.data(), b.data(), out.data(), m, k, n, trans_a, trans_b);
    auto an = a.node();
    auto bn = b.node();
    return Tensor::make(
        {m, n}, std::move(out), {a, b}, [an, bn, m, k, n, trans_a, trans_b](Node& self) {
            Node* pa = an.get();
            Node* pb = bn.get();
            const double* g = self.grad.data();
            // dC [m,n]; accumulate through a temp then axpy to keep += semantics.
            if (pa->requires_grad) {
                pa->ensure_grad();
                std::vector<double> tmp(pa->value.size());
                if (!trans_a) {
                    // A [m,k]: dA = dC * op(B)^T
                    if (!trans_b)
                        kernels::matmul_nt(g, pb->value.data(), tmp.data(), m, n, k);
                    else
                        kernels::matmul_nn(g, pb->value.data(), tmp.data(), m, n, k);
                } else {
                    // A [k,m]: dA = op(B) * dC^T -> [k,m]
                    if (!trans_b)
                        kernels::matmul_nt(pb->value.data(), g, tmp.data(), k, n, m);
                    else
                        kernels::matmul_nn(pb->value.data(), g, tmp.data(), k, n, m);
                }
                kernels::axpy(int(tmp.size()), 1.0, tmp.data(), pa->grad.data());
            }
            if (pb->requires_grad) {
                pb->ensure_grad();
                std::vector<double> tmp(pb->value.size());
                if (!trans_b) {
                    // B [k,n]: dB = op(A)^T * dC
                    if (!trans_a)
                        kernels::matmul_tn(pa->value.data(), g, tmp.data(), k, m, n);
                    else
                        kernels::matmul_nn(pa->value.data(), g, tmp.data(), k, m, n);
                } else {
                    // B [n,k]: dB = dC^T * op(A)
                    if (!trans_a)
                        kernels::matmul_tn(g, pa->value.data(), tmp.data(), n, m, k);
                    else
                        throw ContractError("matmul backward: ta&&tb unreachable");
                }
                kernels::axpy(int(tmp.size()), 1.0, tmp.data(), pb->grad.data());
            }
        });
}

Tensor bmm(const Tensor& a, const Tensor& b, bool trans_a, bool trans_b) {
    if (a.rank() != 3) throw ArgumentError("bmm expects rank-3 lhs");
    const bool b_batched = b.rank() == 3;
    if (!b_batched && b.rank() != 2) throw ArgumentError("bmm rhs must be rank 2 or 3");
    const int B = a.dim(0);
    if (b_batched && b.dim(0) != B) throw ArgumentError("bmm batch mismatch");
    const int ar = a.dim(1), ac = a.dim(2);
    const int br = b_batched ? b.dim(1) : b.dim(0);
    const int bc = b_batched ? b.dim(2) : b.dim(1);
    const int m = trans_a ? ac : ar;
    const int k = trans_a ? ar : ac;
    const int kb = trans_b ? bc : br;
    const int n = trans_b ? br : bc;
    if (k != kb) throw ArgumentError("bmm inner dim mismatch");

    std::vector<double> out(size_t(B) * m * n);
    const int64_t a_sz = int64_t(ar) * ac, b_sz = int64_t(br) * bc, o_sz = int64_t(m) * n;
    for (int i = 0; i < B; ++i) {
        mm_dispatch(a.data() + i * a_sz, b.data() + (b_batched ? i * b_sz : 0),
                    out.data() + i * o_sz, m, k, n, trans_a, trans_b);
    }
    auto an = a.node();
    auto bn = b.node();
    return Tensor::make(
        {B, m, n}, std::move(out), {a, b},
        [an, bn, B, m, k, n, ar, ac, br, bc, a_sz, b_sz, o_sz, trans_a, trans_b,
         b_batched](Node& self) {
            Node* pa = an.get();
            Node* pb = bn.get();
            const double* g = self.grad.data();
            if (pa->requires_grad) {
                pa->ensure_grad();
                std::vector<double> tmp(size_t(a_sz), 0.0);
                for (int i = 0; i < B; ++i) {
                    const double* gi = g + i * o_sz;
                    const double* bv = pb->value.data() + (b_batched ? i * b_sz : 0);
                    if (!trans_a) {
                        if (!trans_b)
                            kernels::matmul_nt(gi, bv, tmp.data(), m, n, k);
                        else
                            kernels::matmul_nn(gi, bv, tmp.data(), m, n, k);
                    } else {
                        if (!trans_b)
                            kernels::matmul_nt(bv, gi, tmp.data(), k, n, m);
                        else
                            kernels::matmul_nn(bv, gi, tmp.data(), k, n, m);
                    }
                    kernels::axpy(int(a_sz), 1.0, tmp.data(), pa->grad.data() + i * a_sz);
                }
            }
            if (pb->requires_grad) {
                pb->ensure_grad();
                std::vector<double> tmp(size_t(b_sz), 0.0);
                for (int i = 0; i < B; ++i) {
                    const double* gi = g + i * o_sz;
                    const double* av = pa->value.data() + i * a_sz;
                    if (!trans_b) {
                        if (!trans_a)
                            kernels::matmul_tn(av, gi, tmp.data(), k, m, n);
                        else
                            kernels::matmul_nn(av, gi, tmp.data(), k, m, n);
                    } else {
                        if (!trans_a)
                            kernels::matmul_tn(gi, av, tmp.data(), n, m, k);
                        else
                            throw ContractError("bmm backward: ta&&tb unreachable");
                    }
                    kernels::axpy(int(b_sz), 1.0, tmp.data(),
                                  pb->grad.data() + (b_batched ? i * b_sz : 0));
                }
            }
            (void)ar; (void)ac; (void)br; (void)bc;
        });
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias) {
    if (w.rank() != 2) throw ArgumentError("linear weight must be rank 2 [out,in]");
    const int in = w.dim(1);
    const int out_dim = w.dim(0);
    if (x.dim(x.rank() - 1) != in)
        throw ArgumentError("linear: input last dim " + std::to_string(x.dim(x.rank() - 1)) +
                            " != weight in dim " + std::to_string(in));
    const int64_t rows = x.numel() / in;
    Tensor flat = reshape(x, {int(rows), in});
    Tensor y = matmul(flat, w, false, true);
    if (bias.defined()) y = add(y, bias);
    Shape out_shape = x.shape();
    out_shape.back() = out_dim;
    return reshape(y, out_shape);
}

// ---------------------------------------------------------------------------
// reductions

Tensor sum(const Tensor& a) {
    double acc = 0.0;
    const double* av = a.data();
    for (int64_t i = 0; i < a.numel(); ++i) acc += av[i];
    auto an = a.node();
    return Tensor::make({1}, {acc}, {a}, [an](Node& self) {
        Node* pa = an.get();
        if (!pa->requires_grad) return;
        pa->ensure_grad();
        const double g = self.grad[0];
        double* ga = pa->grad.data();
        for (size_t i = 0; i < pa->value.size(); ++i) ga[i] += g;
    });
}

Tensor mean(const Tensor& a) { return scale(sum(a), 1.0 / double(a.numel())); }

namespace {
Tensor lastdim_reduce(const Tensor& a, bool keepdim, bool take_mean) {
    const int last = a.dim(a.rank() - 1);
    const int64_t rows = a.numel() / last;
    std::vector<double> out(size_t(rows), 0.0);
    const double* av = a.data();
    const double inv = take_mean ? 1.0 / last : 1.0;
    for (int64_t r = 0; r < rows; ++r) {
        double acc = 0.0;
        for (int i = 0; i < last; ++i) acc += av[r * last + i];
        out[size_t(r)] = acc * inv;
    }
    Shape sh = a.shape();
    if (keepdim)
        sh.back() = 1;
    else
        sh.pop_back();
    if (sh.empty()) sh = {1};
    auto an = a.node();
    return Tensor::make(sh, std::move(out), {a}, [an, last, rows, inv](Node& self) {
        Node* pa = an.get();
        if (!pa->requires_grad) return;
        pa->ensure_grad();
        double* ga = pa->grad.data();
        const double* g = self.grad.data();
        for (int64_t r = 0; r < rows; ++r)
            for (int i = 0; i < last; ++i) ga[r * last + i] += g[r] * inv;
    });
}
}  // namespace

Tensor sum_lastdim(const Tensor& a, bool keepdim) { return lastdim_reduce(a, keepdim, false); }
Tensor mean_lastdim(const Tensor& a, bool keepdim) { return lastdim_reduce(a, keepdim, true); }

// ---------------------------------------------------------------------------
// row-wise normalizations (fused, analytic backward)

Tensor softmax_lastdim(const Tensor& a) {
    const int last = a.dim(a.rank() - 1);
    const int64_t rows = a.numel() / last;
    std::vector<double> out(size_t(a.numel()), 0.0);
    const double* av = a.data();
    for (int64_t r = 0; r < rows; ++r) {
        const double* x = av + r * last;
        double* y = out.data() + r * last;
        double mx = x[0];
        for (int i = 1; i < last; ++i) mx = std::max(mx, x[i]);
        double z = 0.0;
        for (int i = 0; i < last; ++i) {
            y[i] = std::exp(x[i] - mx);
            z += y[i];
        }
        const double invz = 1.0 / z;
        for (int i = 0; i < last; ++i) y[i] *= invz;
    }
    auto an = a.node();
    return Tensor::make(a.shape(), std::move(out), {a}, [an, last, rows](Node& self) {
        Node* pa = an.get();
        if (!pa->requires_grad) return;
        pa->ensure_grad();
        double* ga = pa->grad.data();
        const double* g = self.grad.data();
        const double* y = self.value.data();
        for (int64_t r = 0; r < rows; ++r) {
            const double* yr = y + r * last;
            const double* gr = g + r * last;
            double dot = 0.0;
            for (int i = 0; i < last; ++i) dot += gr[i] * yr[i];
            for (int i = 0; i < last; ++i) ga[r * last + i] += yr[i] * (gr[i] - dot);
        }
    });
}

Tensor rmsnorm_lastdim(const Tensor& a, double eps) {
    const int last = a.dim(a.rank() - 1);
    const int64_t rows = a.numel() / last;
    std::vector<double> out(size_t(a.numel()), 0.0);
    std::vector<double> inv_rms(size_t(rows), 0.0);
    const double* av = a.data();
    for (int64_t r = 0; r < rows; ++r) {
        const double* x = av + r * last;
        double ms = 0.0;
        for (int i = 0; i < last; ++i) ms += x[i] * x[i];
        const double inv = 1.0 / std::sqrt(ms / last + eps);
        inv_rms[size_t(r)] = inv;
        for (int i = 0; i < last; ++i) out[size_t(r * last + i)] = x[i] * inv;
    }
    auto an = a.node();
    return Tensor::make(
        a.shape(), std::move(out), {a}, [an, last, rows, inv_rms = std::move(inv_rms)](Node& self) {
            Node* pa = an.get();
            if (!pa->requires_grad) return;
            pa->ensure_grad();
            double* ga = pa->grad.data();
            const double* g = self.grad.data();
            const double* x = pa->value.data();
            for (int64_t r = 0; r < rows; ++r) {
                const double inv = inv_rms[size_t(r)];
                const double* xr = x + r * last;
                const double* gr = g + r * last;
                double dot = 0.0;
                for (int i = 0; i < last; ++i) dot += gr[i] * xr[i];
                const double c = inv * inv * inv * dot / last;
                for (int i = 0; i < last; ++i) ga[r * last + i] += inv * gr[i] - c * xr[i];
            }
        });
}

Tensor l2normalize_lastdim(const Tensor& a, double eps) {
    const int last = a.dim(a.rank() - 1);
    const int64_t rows = a.numel() / last;
    std::vector<double> out(size_t(a.numel()), 0.0);
    std::vector<double> inv_norm(size_t(rows), 0.0);
    const double* av = a.data();
    for (int64_t r = 0; r < rows; ++r) {
        const double* x = av + r * last;
        double ss = eps;
        for (int i = 0; i < last; ++i) ss += x[i] * x[i];
        const double inv = 1.0 / std::sqrt(ss);
        inv_norm[size_t(r)] = inv;
        for (int i = 0; i < last; ++i) out[size_t(r * last + i)] = x[i] * inv;
    }
    auto an = a.node();
    return Tensor::make(
        a.shape(), std::move(out), {a},
        [an, last, rows, inv_norm = std::move(inv_norm)](Node& self) {
            Node* pa = an.get();
            if (!pa->requires_grad) return;
            pa->ensure_grad();
            double* ga = pa->grad.data();
            const double* g = self.grad.data();
            const double* x = pa->value.data();
            for (int64_t r = 0; r < rows; ++r) {
                const double inv = inv_norm[size_t(r)];
                const double* xr = x + r * last;
                const double* gr = g + r * last;
                double dot = 0.0;
                for (int i = 0; i < last; ++i) dot += gr[i] * xr[i];
                const double c = inv * inv * inv * dot;
                for (int i = 0; i < last; ++i) ga[r * last + i] += inv * gr[i] - c * xr[i];
            }
        });
}

// ---------------------------------------------------------------------------
// shape ops

Tensor reshape(const Tensor& a, const Shape& shape) {
    if (shape_numel(shape) != a.numel())
        throw ArgumentError("reshape: numel mismatch " + shape_str(a.shape()) + " -> " +
                            shape_str(shape));
    auto an = a.node();
    return Tensor::make(shape, std::vector<double>(a.vec()), {a}, [an](Node& self) {
        Node* pa = an.get();
        if (!pa->requires_grad) return;
        pa->ensure_grad();
        kernels::axpy(int(self.grad.size()), 1.0, self.grad.data(), pa->grad.data());
    });
}

namespace {
std::vector<int64_t> row_major_strides(const Shape& s) {
    std::vector<int64_t> st(s.size());
    int64_t acc = 1;
    for (int i = int(s.size()) - 1; i >= 0; --i) {
        st[size_t(i)] = acc;
        acc *= s[size_t(i)];
    }
    return st;
}
}  // namespace

Tensor permute(const Tensor& a, const std::vector<int>& perm) {
    const int rank = a.rank();
    if (int(perm.size()) != rank) throw ArgumentError("permute: rank mismatch");
    Shape out_shape(size_t(rank), 0);
    for (int i = 0; i < rank; ++i) out_shape[size_t(i)] = a.dim(perm[size_t(i)]);
    const auto in_strides = row_major_strides(a.shape());
    std::vector<int64_t> gather(size_t(rank), 0);
    for (int i = 0; i < rank; ++i) gather[size_t(i)] = in_strides[size_t(perm[size_t(i)])];

    const int64_t total = a.numel();
    std::vector<double> out(size_t(total), 0.0);
    const double* av = a.data();
    std::vector<int> idx(size_t(rank), 0);
    int64_t src = 0;
    for (int64_t o = 0; o < total; ++o) {
        out[size_t(o)] = av[src];
        for (int d = rank - 1; d >= 0; --d) {
            idx[size_t(d)]++;
            src += gather[size_t(d)];
            if (idx[size_t(d)] < out_shape[size_t(d)]) break;
            src -= int64_t(out_shape[size_t(d)]) * gather[size_t(d)];
            idx[size_t(d)] = 0;
        }
    }
    auto an = a.node();
    return Tensor::make(out_shape, std::move(out), {a},
                        [an, out_shape, gather, rank](Node& self) {
                            Node* pa = an.get();
                            if (!pa->requires_grad) return;
                            pa->ensure_grad();
                            double* ga = pa->grad.data();
                            const double* g = self.grad.data();
                            std::vector<int> idx(size_t(rank), 0);
                            int64_t src = 0;
                            const int64_t total = int64_t(self.value.size());
                            for (int64_t o = 0; o < total; ++o) {
                                ga[src] += g[o];
                                for (int d = rank - 1; d >= 0; --d) {
                                    idx[size_t(d)]++;
                                    src += gather[size_t(d)];
                                    if (idx[size_t(d)] < out_shape[size_t(d)]) break;
                                    src -= int64_t(out_shape[size_t(d)]) * gather[size_t(d)];
                                    idx[size_t(d)] = 0;
                                }
                            }
                        });
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
    if (parts.empty()) throw ArgumentError("concat: empty list");
    const int rank = parts[0].rank();
    if (axis < 0) axis += rank;
    if (axis < 0 || axis >= rank) throw ArgumentError("concat: bad axis");
    Shape out_shape = parts[0].shape();
    int axis_total = 0;
    for (const auto& p : parts) {
        if (p.rank() != rank) throw ArgumentError("concat: rank mismatch");
        for (int d = 0; d < rank; ++d)
            if (d != axis && p.dim(d) != out_shape[size_t(d)])
                throw ArgumentError("concat: shape mismatch on non-axis dim");
        axis_total += p.dim(axis);
    }
    out_shape[size_t(axis)] = axis_total;

    int64_t outer = 1, inner = 1;
    for (int d = 0; d < axis; ++d) outer *= out_shape[size_t(d)];
    for (int d = axis + 1; d < rank; ++d) inner *= out_shape[size_t(d)];

    std::vector<double> out(size_t(shape_numel(out_shape)), 0.0);
    int64_t offset = 0;  // in axis units
    std::vector<int64_t> part_offsets;
    std::vector<int> part_axis;
    for (const auto& p : parts) {
        part_offsets.push_back(offset);
        part_axis.push_back(p.dim(axis));
        const double* pv = p.data();
        const int64_t pa = p.dim(axis);
        for (int64_t o = 0; o < outer; ++o)
            std::memcpy(out.data() + (o * axis_total + offset) * inner, pv + o * pa * inner,
                        size_t(pa * inner) * sizeof(double));
        offset += pa;
    }
    std::vector<std::shared_ptr<Node>> pnodes;
    for (const auto& p : parts) pnodes.push_back(p.node());
    return Tensor::make(out_shape, std::move(out), parts,
                        [pnodes, part_offsets, part_axis, outer, inner, axis_total](Node& self) {
                            const double* g = self.grad.data();
                            for (size_t pi = 0; pi < pnodes.size(); ++pi) {
                                Node* p = pnodes[pi].get();
                                if (!p->requires_grad) continue;
                                p->ensure_grad();
                                const int64_t pa = part_axis[pi];
                                const int64_t off = part_offsets[pi];
                                for (int64_t o = 0; o < outer; ++o) {
                                    const double* gs = g + (o * axis_total + off) * inner;
                                    double* pg = p->grad.data() + o * pa * inner;
                                    for (int64_t i = 0; i < pa * inner; ++i) pg[i] += gs[i];
                                }
                            }
                        });
}

Tensor slice(const Tensor& a, int axis, int start, int len) {
    const int rank = a.rank();
    if (axis < 0) axis += rank;
    if (axis < 0 || axis >= rank) throw ArgumentError("slice: bad axis");
    if (start < 0 || len < 0 || start + len > a.dim(axis))
        throw ArgumentError("slice: out of range");
    Shape out_shape = a.shape();
    out_shape[size_t(axis)] = len;
    int64_t outer = 1, inner = 1;
    for (int d = 0; d < axis; ++d) outer *= a.dim(d);
    for (int d = axis + 1; d < rank; ++d) inner *= a.dim(d);
    const int64_t in_axis = a.dim(axis);

    std::vector<double> out(size_t(shape_numel(out_shape)), 0.0);
    const double* av = a.data();
    for (int64_t o = 0; o < outer; ++o)
        std::memcpy(out.data() + o * len * inner, av + (o * in_axis + start) * inner,
                    size_t(len * inner) * sizeof(double));
    auto an = a.node();
    return Tensor::make(out_shape, std::move(out), {a},
                        [an, outer, inner, in_axis, start, len](Node& self) {
                            Node* pa = an.get();
                            if (!pa->requires_grad) return;
                            pa->ensure_grad();
                            const double* g = self.grad.data();
                            for (int64_t o = 0; o < outer; ++o) {
                                double* pg = pa->grad.data() + (o * in_axis + start) * inner;
                                const double* gs = g + o * len * inner;
                                for (int64_t i = 0; i < len * inner; ++i) pg[i] += gs[i];
                            }
                        });
}

// ---------------------------------------------------------------------------
// conv / upsample

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, int stride, int pad) {
    if (x.rank() != 4 || w.rank() != 4) throw ArgumentError("conv2d expects x[B,C,H,W], w[O,C,k,k]");
    const int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int O = w.dim(0), k = w.dim(2);
    if (w.dim(1) != C || w.dim(3) != k) throw ArgumentError("conv2d: weight shape mismatch");
    if (bias.defined() && bias.numel() != O) throw ArgumentError("conv2d: bias size mismatch");
    const int oh = kernels::conv_out_dim(H, k, stride, pad);
    const int ow = kernels::conv_out_dim(W, k, stride, pad);
    if (oh <= 0 || ow <= 0) throw ArgumentError("conv2d: empty output");
    const int P = oh * ow;
    const int patch = C * k * k;

    std::vector<double> out(size_t(B) * O * P);
    std::vector<double> cols(size_t(P) * patch);
    for (int i = 0; i < B; ++i) {
        kernels::im2col(x.data() + int64_t(i) * C * H * W, C, H, W, k, stride, pad, cols.data());
        // out_i [O, P] = w_flat [O, patch] * cols^T
        kernels::matmul_nt(w.data(), cols.data(), out.data() + int64_t(i) * O * P, O, patch, P);
        if (bias.defined()) {
            for (int o = 0; o < O; ++o) {
                const double bv = bias.at(o);
                double* dst = out.data() + int64_t(i) * O * P + int64_t(o) * P;
                for (int p = 0; p < P; ++p) dst[p] += bv;
            }
        }
    }
    auto xn = x.node();
    auto wn = w.node();
    auto bn = bias.defined() ? bias.node() : nullptr;
    std::vector<Tensor> parents = bias.defined() ? std::vector<Tensor>{x, w, bias}
                                                 : std::vector<Tensor>{x, w};
    return Tensor::make(
        {B, O, oh, ow}, std::move(out), parents,
        [xn, wn, bn, B, C, H, W, O, k, stride, pad, P, patch](Node& self) {
            Node* px = xn.get();
            Node* pw = wn.get();
            Node* pb = bn ? bn.get() : nullptr;
            const double* g = self.grad.data();
            std::vector<double> cols(size_t(P) * patch);
            std::vector<double> tmpw(pw->requires_grad ? pw->value.size() : 0);
            std::vector<double> dcols(px->requires_grad ? size_t(P) * patch : 0);
            if (px->requires_grad) px->ensure_grad();
            if (pw->requires_grad) pw->ensure_grad();
            if (pb && pb->requires_grad) pb->ensure_grad();
            for (int i = 0; i < B; ++i) {
                const double* gi = g + int64_t(i) * O * P;
                if (pw->requires_grad || px->requires_grad) {
                    if (pw->requires_grad) {
                        kernels::im2col(px->value.data() + int64_t(i) * C * H * W, C, H, W, k,
                                        stride, pad, cols.data());
                        // dW [O, patch] += dOut [O,P] * cols [P,patch]
                        kernels::matmul_nn(gi, cols.data(), tmpw.data(), O, P, patch);
                        kernels::axpy(int(tmpw.size()), 1.0, tmpw.data(), pw->grad.data());
                    }
                    if (px->requires_grad) {
                        // dcols [P, patch] = dOut^T [P,O] * w [O,patch]
                        kernels::matmul_tn(gi, pw->value.data(), dcols.data(), P, O, patch);
                        kernels::col2im(dcols.data(), C, H, W, k, stride, pad,
                                        px->grad.data() + int64_t(i) * C * H * W);
                    }
                }
                if (pb && pb->requires_grad) {
                    for (int o = 0; o < O; ++o) {
                        double acc = 0.0;
                        const double* go = gi + int64_t(o) * P;
                        for (int p = 0; p < P; ++p) acc += go[p];
                        pb->grad[size_t(o)] += acc;
                    }
                }
            }
        });
}

Tensor upsample_nearest2x(const Tensor& x) {
    if (x.rank() != 4) throw ArgumentError("upsample_nearest2x expects [B,C,H,W]");
    const int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int OH = H * 2, OW = W * 2;
    std::vector<double> out(size_t(B) * C * OH * OW);
    const double* xv = x.data();
    for (int64_t bc = 0; bc < int64_t(B) * C; ++bc) {
        const double* src = xv + bc * H * W;
        double* dst = out.data() + bc * OH * OW;
        for (int y = 0; y < OH; ++y)
            for (int xx = 0; xx < OW; ++xx) dst[int64_t(y) * OW + xx] = src[int64_t(y / 2) * W + xx / 2];
    }
    auto xn = x.node();
    return Tensor::make({B, C, OH, OW}, std::move(out), {x},
                        [xn, B, C, H, W, OH, OW](Node& self) {
                            Node* px = xn.get();
                            if (!px->requires_grad) return;
                            px->ensure_grad();
                            const double* g = self.grad.data();
                            for (int64_t bc = 0; bc < int64_t(B) * C; ++bc) {
                                double* dst = px->grad.data() + bc * H * W;
                                const double* gs = g + bc * OH * OW;
                                for (int y = 0; y < OH; ++y)
                                    for (int xx = 0; xx < OW; ++xx)
                                        dst[int64_t(y / 2) * W + xx / 2] += gs[int64_t(y) * OW + xx];
                            }
                        });
}

// ---------------------------------------------------------------------------
// rotary embedding

Tensor rope3d(const Tensor& x, const std::vector<std::array<int, 3>>& coords,
              const std::array<int, 3>& split) {
    if (x.rank() != 4) throw ArgumentError("rope3d expects [B,K,H,hd]");
    const int B = x.dim(0), K = x.dim(1), H = x.dim(2), hd = x.dim(3);
    if (int(coords.size()) != K) throw ArgumentError("rope3d: coords length != K");
    int total = 0;
    for (int s : split) {
        if (s < 0 || s % 2 != 0) throw ArgumentError("rope3d: split parts must be even and >= 0");
        total += s;
    }
    if (total != hd) throw ArgumentError("rope3d: split must sum to head dim");

    // Precompute cos/sin per (token, pair).
    const int pairs = hd / 2;
    std::vector<double> cs(size_t(K) * pairs), sn(size_t(K) * pairs);
    for (int t = 0; t < K; ++t) {
        int pair_idx = 0;
        for (int axis = 0; axis < 3; ++axis) {
            const int d = split[size_t(axis)];
            const double pos = double(coords[size_t(t)][size_t(axis)]);
            for (int j = 0; j < d / 2; ++j, ++pair_idx) {
                const double freq = std::pow(10000.0, -2.0 * j / double(d));
                const double ang = pos * freq;
                cs[size_t(t) * pairs + pair_idx] = std::cos(ang);
                sn[size_t(t) * pairs + pair_idx] = std::sin(ang);
            }
        }
    }

    std::vector<double> out(size_t(x.numel()), 0.0);
    const double* xv = x.data();
    for (int b = 0; b < B; ++b)
        for (int t = 0; t < K; ++t)
            for (int h = 0; h < H; ++h) {
                const int64_t base = ((int64_t(b) * K + t) * H + h) * hd;
                const double* cr = cs.data() + size_t(t) * pairs;
                const double* sr = sn.data() + size_t(t) * pairs;
                for (int j = 0; j < pairs; ++j) {
                    const double x0 = xv[base + 2 * j];
                    const double x1 = xv[base + 2 * j + 1];
                    out[size_t(base + 2 * j)] = x0 * cr[j] - x1 * sr[j];
                    out[size_t(base + 2 * j + 1)] = x0 * sr[j] + x1 * cr[j];
                }
            }
    auto xn = x.node();
    return Tensor::make(
        x.shape(), std::move(out), {x},
        [xn, B, K, H, hd, pairs, cs = std::move(cs), sn = std::move(sn)](Node& self) {
            Node* px = xn.get();
            if (!px->requires_grad) return;
            px->ensure_grad();
            const double* g = self.grad.data();
            double* gx = px->grad.data();
            for (int b = 0; b < B; ++b)
                for (int t = 0; t < K; ++t)
                    for (int h = 0; h < H; ++h) {
                        const int64_t base = ((int64_t(b) * K + t) * H + h) * hd;
                        const double* cr = cs.data() + size_t(t) * pairs;
                        const double* sr = sn.data() + size_t(t) * pairs;
                        for (int j = 0; j < pairs; ++j) {
                            const double g0 = g[base + 2 * j];
                            const double g1 = g[base + 2 * j + 1];
                            gx[base + 2 * j] += g0 * cr[j] + g1 * sr[j];
                            gx[base + 2 * j + 1] += -g0 * sr[j] + g1 * cr[j];
                        }
                    }
        });
}

Tensor mse(const Tensor& a, const Tensor& b) {
    if (!same_shape(a.shape(), b.shape()))
        throw ArgumentError("mse: shape mismatch " + shape_str(a.shape()) + " vs " +
                            shape_str(b.shape()));
    return mean(square(sub(a, b)));
}

}  // namespace gf::ops
