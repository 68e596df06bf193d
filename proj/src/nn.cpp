#include "glyphforge/nn.hpp"

#include <cmath>
#include <cstring>

namespace gf::nn {

uint64_t checksum(const NamedParams& params) {
    uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](const void* data, size_t len) {
        const unsigned char* p = static_cast<const unsigned char*>(data);
        for (size_t i = 0; i < len; ++i) {
            h ^= p[i];
            h *= 0x100000001b3ULL;
        }
    };
    for (const auto& [name, t] : params) {
        mix(name.data(), name.size());
        mix(t.data(), size_t(t.numel()) * sizeof(double));
    }
    return h;
}

void set_requires_grad(NamedParams& params, bool rg) {
    for (auto& [name, t] : params) t.set_requires_grad(rg);
}

Linear::Linear(int in, int out, Rng& rng, bool with_bias) {
    const double std = 1.0 / std::sqrt(double(in));
    weight = Tensor::randn({out, in}, rng, std, true);
    if (with_bias) bias = Tensor::zeros({out}, true);
}

Linear Linear::zeros(int in, int out, bool with_bias) {
    Linear l;
    l.weight = Tensor::zeros({out, in}, true);
    if (with_bias) l.bias = Tensor::zeros({out}, true);
    return l;
}

void Linear::params(const std::string& prefix, NamedParams& out) const {
    out.emplace_back(prefix + ".weight", weight);
    if (bias.defined()) out.emplace_back(prefix + ".bias", bias);
}

RMSNorm::RMSNorm(int d) { gain = Tensor::full({d}, 1.0, true); }

void RMSNorm::params(const std::string& prefix, NamedParams& out) const {
    out.emplace_back(prefix + ".gain", gain);
}

FeedForward::FeedForward(int dim, int hidden, Rng& rng, bool zero_out) {
    fc1 = Linear(dim, hidden, rng);
    fc2 = zero_out ? Linear::zeros(hidden, dim) : Linear(hidden, dim, rng);
}

void FeedForward::params(const std::string& prefix, NamedParams& out) const {
    fc1.params(prefix + ".fc1", out);
    fc2.params(prefix + ".fc2", out);
}

MultiheadAttention::MultiheadAttention(int dim_, int heads_, Rng& rng)
    : dim(dim_), heads(heads_), head_dim(dim_ / heads_) {
    if (dim % heads != 0) throw ArgumentError("attention: dim must divide by heads");
    wq = Linear(dim, dim, rng);
    wk = Linear(dim, dim, rng);
    wv = Linear(dim, dim, rng);
    wo = Linear::zeros(dim, dim);
    q_norm = RMSNorm(head_dim);
    k_norm = RMSNorm(head_dim);
}

Tensor MultiheadAttention::forward(const Tensor& q_in, const Tensor& kv_in,
                                   const std::vector<std::array<int, 3>>* coords_q,
                                   const std::vector<std::array<int, 3>>* coords_kv,
                                   const std::array<int, 3>& rope_split) const {
    const int B = q_in.dim(0), Kq = q_in.dim(1), Kv = kv_in.dim(1);

    auto heads_view = [&](const Tensor& t, int K) {
        return ops::reshape(t, {B, K, heads, head_dim});
    };
    Tensor q = q_norm.forward(heads_view(wq.forward(q_in), Kq));
    Tensor k = k_norm.forward(heads_view(wk.forward(kv_in), Kv));
    Tensor v = heads_view(wv.forward(kv_in), Kv);

    if (coords_q) q = ops::rope3d(q, *coords_q, rope_split);
    if (coords_kv) k = ops::rope3d(k, *coords_kv, rope_split);

    auto flatten_heads = [&](const Tensor& t, int K) {
        // [B,K,H,hd] -> [B*H, K, hd]
        return ops::reshape(ops::permute(t, {0, 2, 1, 3}), {B * heads, K, head_dim});
    };
    q = flatten_heads(q, Kq);
    k = flatten_heads(k, Kv);
    v = flatten_heads(v, Kv);

    Tensor scores = ops::scale(ops::bmm(q, k, false, true), 1.0 / std::sqrt(double(head_dim)));
    Tensor probs = ops::softmax_lastdim(scores);
    Tensor ctx = ops::bmm(probs, v);  // [B*H, Kq, hd]
    ctx = ops::reshape(ctx, {B, heads, Kq, head_dim});
    ctx = ops::reshape(ops::permute(ctx, {0, 2, 1, 3}), {B, Kq, dim});
    return wo.forward(ctx);
}

void MultiheadAttention::params(const std::string& prefix, NamedParams& out) const {
    wq.params(prefix + ".wq", out);
    wk.params(prefix + ".wk", out);
    wv.params(prefix + ".wv", out);
    wo.params(prefix + ".wo", out);
    q_norm.params(prefix + ".q_norm", out);
    k_norm.params(prefix + ".k_norm", out);
}

AdaModulation::AdaModulation(int dim) { proj = Linear::zeros(dim, 2 * dim); }

Tensor AdaModulation::modulate(const Tensor& x, const Tensor& t_emb) const {
    const int B = x.dim(0);
    const int dim = x.dim(2);
    Tensor ss = proj.forward(ops::silu(t_emb));  // [B, 2*dim]
    Tensor shift = ops::reshape(ops::slice(ss, 1, 0, dim), {B, 1, dim});
    Tensor scale = ops::reshape(ops::slice(ss, 1, dim, dim), {B, 1, dim});
    return ops::add(ops::mul(x, ops::add_scalar(scale, 1.0)), shift);
}

void AdaModulation::params(const std::string& prefix, NamedParams& out) const {
    proj.params(prefix + ".proj", out);
}

TimestepEmbedder::TimestepEmbedder(int feat_dim_, int out_dim, Rng& rng) : feat_dim(feat_dim_) {
    if (feat_dim % 2 != 0) throw ArgumentError("timestep embedder: feat_dim must be even");
    fc1 = Linear(feat_dim, out_dim, rng);
    fc2 = Linear(out_dim, out_dim, rng);
}

Tensor TimestepEmbedder::forward(const std::vector<double>& t) const {
    const int B = int(t.size());
    const int half = feat_dim / 2;
    std::vector<double> feats(size_t(B) * feat_dim);
    for (int b = 0; b < B; ++b) {
        for (int j = 0; j < half; ++j) {
            const double freq = std::pow(10000.0, -double(j) / double(half));
            const double ang = t[size_t(b)] * 1000.0 * freq;
            feats[size_t(b) * feat_dim + 2 * j] = std::sin(ang);
            feats[size_t(b) * feat_dim + 2 * j + 1] = std::cos(ang);
        }
    }
    Tensor f = Tensor::from_vec({B, feat_dim}, std::move(feats));
    return fc2.forward(ops::silu(fc1.forward(f)));
}

void TimestepEmbedder::params(const std::string& prefix, NamedParams& out) const {
    fc1.params(prefix + ".fc1", out);
    fc2.params(prefix + ".fc2", out);
}

}  // namespace gf::nn
