#ifndef GLYPHFORGE_NN_HPP
#define GLYPHFORGE_NN_HPP

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "glyphforge/ops.hpp"
#include "glyphforge/tensor.hpp"

namespace gf::nn {

using NamedParams = std::vector<std::pair<std::string, Tensor>>;

// FNV-1a over the raw bytes of every parameter, in declaration order.
// Used by the freeze contracts ("bitwise unchanged") in tests.
uint64_t checksum(const NamedParams& params);

void set_requires_grad(NamedParams& params, bool rg);

struct Linear {
    Tensor weight;  // [out, in]
    Tensor bias;    // [out] or undefined

    Linear() = default;
    Linear(int in, int out, Rng& rng, bool with_bias = true);
    static Linear zeros(int in, int out, bool with_bias = true);

    Tensor forward(const Tensor& x) const { return ops::linear(x, weight, bias); }
    void params(const std::string& prefix, NamedParams& out) const;
};

// RMSNorm with a learned gain, applied over the last dim.
struct RMSNorm {
    Tensor gain;  // [d]
    double eps = 1e-6;

    RMSNorm() = default;
    explicit RMSNorm(int d);

    Tensor forward(const Tensor& x) const {
        return ops::mul(ops::rmsnorm_lastdim(x, eps), gain);
    }
    void params(const std::string& prefix, NamedParams& out) const;
};

struct FeedForward {
    Linear fc1, fc2;

    FeedForward() = default;
    // fc2 is zero-initialized when zero_out is set (residual-stable start).
    FeedForward(int dim, int hidden, Rng& rng, bool zero_out);

    Tensor forward(const Tensor& x) const { return fc2.forward(ops::silu(fc1.forward(x))); }
    void params(const std::string& prefix, NamedParams& out) const;
};

// Multi-head attention with RMS-normalized queries/keys and optional rotary
// positions. Queries may come from a subset of the key/value sequence.
struct MultiheadAttention {
    int dim = 0, heads = 0, head_dim = 0;
    Linear wq, wk, wv, wo;  // wo zero-initialized
    RMSNorm q_norm, k_norm; // over head_dim

    MultiheadAttention() = default;
    MultiheadAttention(int dim, int heads, Rng& rng);

    // q_in [B,Kq,dim], kv_in [B,Kv,dim]. coords (length Kq / Kv) enable rope;
    // pass nullptr to skip rotary.
    Tensor forward(const Tensor& q_in, const Tensor& kv_in,
                   const std::vector<std::array<int, 3>>* coords_q,
                   const std::vector<std::array<int, 3>>* coords_kv,
                   const std::array<int, 3>& rope_split) const;
    void params(const std::string& prefix, NamedParams& out) const;
};

// Timestep conditioning: t embedding -> silu -> zero-init linear -> per-batch
// (shift, scale); modulate(x) = x * (1 + scale) + shift.
struct AdaModulation {
    Linear proj;  // [dim] -> [2*dim], zero-init
    AdaModulation() = default;
    explicit AdaModulation(int dim);

    // t_emb [B, dim], x [B, K, dim]
    Tensor modulate(const Tensor& x, const Tensor& t_emb) const;
    void params(const std::string& prefix, NamedParams& out) const;
};

// Sinusoidal features of t in [0,1] followed by a small MLP.
struct TimestepEmbedder {
    int feat_dim = 0;
    Linear fc1, fc2;

    TimestepEmbedder() = default;
    TimestepEmbedder(int feat_dim, int out_dim, Rng& rng);

    // t values, one per batch element -> [B, out_dim]
    Tensor forward(const std::vector<double>& t) const;
    void params(const std::string& prefix, NamedParams& out) const;
};

}  // namespace gf::nn

#endif
