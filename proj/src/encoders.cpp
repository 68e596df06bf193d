#include "glyphforge/encoders.hpp"

#include <cmath>

namespace gf::enc {

void EncoderConfig::validate() const {
    if (dim <= 0 || heads <= 0 || depth <= 0) throw ArgumentError("encoder: bad dims");
    if (dim % heads != 0) throw ArgumentError("encoder: dim must divide by heads");
    if (resolution % patch != 0) throw ArgumentError("encoder: patch must divide resolution");
    if (style_tokens < 1) throw ArgumentError("encoder: style_tokens must be >= 1");
}

Tensor glyphs_to_tensor(const std::vector<const Image*>& images) {
    if (images.empty()) throw ArgumentError("glyphs_to_tensor: empty list");
    const int h = images[0]->h, w = images[0]->w, c = images[0]->c;
    for (const Image* im : images)
        if (im->h != h || im->w != w || im->c != c)
            throw ArgumentError("glyphs_to_tensor: mixed resolutions");
    std::vector<double> data;
    data.reserve(size_t(images.size()) * c * h * w);
    for (const Image* im : images)
        for (int ch = 0; ch < c; ++ch)
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) data.push_back(im->at(y, x, ch));
    return Tensor::from_vec({int(images.size()), c, h, w}, std::move(data));
}

TrunkBlock::TrunkBlock(int dim, int heads, Rng& rng) {
    attn = nn::MultiheadAttention(dim, heads, rng);
    ffn = nn::FeedForward(dim, dim * 4, rng, /*zero_out=*/true);
}

Tensor TrunkBlock::forward(const Tensor& x) const {
    Tensor h = ops::rmsnorm_lastdim(x);
    Tensor y = ops::add(x, attn.forward(h, h, nullptr, nullptr, {0, 0, 0}));
    return ops::add(y, ffn.forward(ops::rmsnorm_lastdim(y)));
}

void TrunkBlock::params(const std::string& prefix, nn::NamedParams& out) const {
    attn.params(prefix + ".attn", out);
    ffn.params(prefix + ".ffn", out);
}

PatchTrunk::PatchTrunk(const EncoderConfig& cfg_in, Rng& rng) : cfg(cfg_in) {
    cfg.validate();
    const double std = 1.0 / std::sqrt(double(4 * cfg.patch * cfg.patch));
    patch_weight = Tensor::randn({cfg.dim, 4, cfg.patch, cfg.patch}, rng, std, true);
    patch_bias = Tensor::zeros({cfg.dim}, true);
    pos_emb = Tensor::randn({cfg.patch_tokens(), cfg.dim}, rng, 0.02, true);
    for (int i = 0; i < cfg.depth; ++i) blocks.emplace_back(cfg.dim, cfg.heads, rng);
}

Tensor PatchTrunk::forward(const Tensor& images) const {
    const int B = images.dim(0);
    Tensor x = ops::conv2d(images, patch_weight, patch_bias, cfg.patch, 0);  // [B,dim,g,g]
    x = ops::reshape(x, {B, cfg.dim, cfg.patch_tokens()});
    x = ops::permute(x, {0, 2, 1});  // [B,p,dim]
    x = ops::add(x, pos_emb);
    for (const auto& b : blocks) x = b.forward(x);
    return x;
}

void PatchTrunk::params(const std::string& prefix, nn::NamedParams& out) const {
    out.emplace_back(prefix + ".patch.weight", patch_weight);
    out.emplace_back(prefix + ".patch.bias", patch_bias);
    out.emplace_back(prefix + ".pos_emb", pos_emb);
    for (size_t i = 0; i < blocks.size(); ++i)
        blocks[i].params(prefix + ".block" + std::to_string(i), out);
}

Projector::Projector(int dim, int heads, Rng& rng) {
    block = TrunkBlock(dim, heads, rng);
    out_bias = Tensor::randn({dim}, rng, 1.0 / std::sqrt(double(dim)), true);
}

Tensor Projector::forward(const Tensor& tokens) const {
    Tensor h = block.forward(tokens);
    return ops::l2normalize_lastdim(ops::add(h, out_bias));
}

void Projector::params(const std::string& prefix, nn::NamedParams& out) const {
    block.params(prefix + ".block", out);
    out.emplace_back(prefix + ".out_bias", out_bias);
}

// ---------------------------------------------------------------------------
// content encoder

ContentEncoder::ContentEncoder(const EncoderConfig& cfg, Rng& rng)
    : cfg_(cfg), trunk_(cfg, rng), projector_(cfg.dim, cfg.heads, rng) {}

Tensor ContentEncoder::encode_batch(const Tensor& images, int batch, int n) const {
    Tensor tokens = trunk_.forward(images);            // [B*n, p, dim]
    tokens = projector_.forward(tokens);
    return ops::reshape(tokens, {batch, n, cfg_.patch_tokens(), cfg_.dim});
}

Tensor ContentEncoder::encode(const std::vector<std::vector<const Image*>>& glyphs) const {
    if (glyphs.empty() || glyphs[0].empty()) throw ArgumentError("encode_content: empty input");
    const int B = int(glyphs.size());
    const int n = int(glyphs[0].size());
    std::vector<const Image*> flat;
    for (const auto& sample : glyphs) {
        if (int(sample.size()) != n) throw ArgumentError("encode_content: ragged glyph lists");
        for (const Image* im : sample) flat.push_back(im);
    }
    return encode_batch(glyphs_to_tensor(flat), B, n);
}

void ContentEncoder::params(const std::string& prefix, nn::NamedParams& out) const {
    trunk_.params(prefix + ".trunk", out);
    projector_.params(prefix + ".projector", out);
}

// ---------------------------------------------------------------------------
// style encoder

StyleEncoder::StyleEncoder(const EncoderConfig& cfg, Rng& rng)
    : cfg_(cfg), trunk_(cfg, rng), projector_(cfg.dim, cfg.heads, rng) {
    pool_queries_ = Tensor::randn({cfg.style_tokens, cfg.dim}, rng, 0.5, true);
    pool_attn_ = nn::MultiheadAttention(cfg.dim, cfg.heads, rng);
}

Tensor StyleEncoder::encode_batch(const Tensor& images, int batch, int m) const {
    const int p = cfg_.patch_tokens();
    Tensor tokens = trunk_.forward(images);  // [B*m, p, dim]
    // mean over the m references: [B, m, p*dim] -> [B, p*dim, m] -> mean
    tokens = ops::reshape(tokens, {batch, m, p * cfg_.dim});
    tokens = ops::permute(tokens, {0, 2, 1});
    tokens = ops::mean_lastdim(tokens);                    // [B, p*dim]
    tokens = ops::reshape(tokens, {batch, p, cfg_.dim});   // [B, p, dim]

    // fixed-size pooling: learned queries cross-attend over the pooled tokens
    Tensor q = ops::reshape(pool_queries_, {1, cfg_.style_tokens, cfg_.dim});
    std::vector<Tensor> reps(size_t(batch), q);
    Tensor qb = batch == 1 ? q : ops::concat(reps, 0);     // [B, q, dim]
    Tensor pooled = ops::add(qb, pool_attn_.forward(qb, tokens, nullptr, nullptr, {0, 0, 0}));
    return projector_.forward(pooled);                     // [B, q, dim], unit tokens
}

Tensor StyleEncoder::encode(const std::vector<std::vector<const Image*>>& refs) const {
    if (refs.empty() || refs[0].empty()) throw ArgumentError("encode_style: empty reference list");
    const int B = int(refs.size());
    const int m = int(refs[0].size());
    std::vector<const Image*> flat;
    for (const auto& sample : refs) {
        if (int(sample.size()) != m) throw ArgumentError("encode_style: ragged reference lists");
        for (const Image* im : sample) flat.push_back(im);
    }
    return encode_batch(glyphs_to_tensor(flat), B, m);
}

void StyleEncoder::params(const std::string& prefix, nn::NamedParams& out) const {
    trunk_.params(prefix + ".trunk", out);
    out.emplace_back(prefix + ".pool_queries", pool_queries_);
    pool_attn_.params(prefix + ".pool_attn", out);
    projector_.params(prefix + ".projector", out);
}

// ---------------------------------------------------------------------------
// resampler

PerceiverResampler::PerceiverResampler(const ResamplerConfig& cfg, Rng& rng) : cfg_(cfg) {
    if (cfg.dim % cfg.heads != 0) throw ArgumentError("resampler: dim must divide by heads");
    queries_ = Tensor::randn({cfg.queries, cfg.dim}, rng, 0.5, true);
    input_proj_ = nn::Linear(cfg.mllm_dim, cfg.dim, rng);
    attn_ = nn::MultiheadAttention(cfg.dim, cfg.heads, rng);
    ffn_ = nn::FeedForward(cfg.dim, cfg.dim * 4, rng, /*zero_out=*/true);
}

Tensor PerceiverResampler::resample(const Tensor& mllm_tokens) const {
    Tensor q = ops::reshape(queries_, {1, cfg_.queries, cfg_.dim});
    Tensor kv = q;
    if (mllm_tokens.defined() && mllm_tokens.numel() > 0) {
        if (mllm_tokens.rank() != 2 || mllm_tokens.dim(1) != cfg_.mllm_dim)
            throw ArgumentError("resample: tokens must be [k, " + std::to_string(cfg_.mllm_dim) +
                                "]");
        Tensor m = input_proj_.forward(mllm_tokens);  // [k, dim]
        kv = ops::concat({q, ops::reshape(m, {1, m.dim(0), cfg_.dim})}, 1);
    }
    // keys carry no positional encoding
    Tensor attended = ops::add(attn_.forward(q, kv, nullptr, nullptr, {0, 0, 0}), q);
    Tensor out = ops::add(ffn_.forward(attended), attended);
    return ops::reshape(out, {cfg_.queries, cfg_.dim});
}

void PerceiverResampler::params(const std::string& prefix, nn::NamedParams& out) const {
    out.emplace_back(prefix + ".queries", queries_);
    input_proj_.params(prefix + ".input_proj", out);
    attn_.params(prefix + ".attn", out);
    ffn_.params(prefix + ".ffn", out);
}

// ---------------------------------------------------------------------------
// condition encoder

void ConditionInput::validate() const {
    bbox.validate();
    if (!background.empty()) {
        if (bbox.left < 0 || bbox.top < 0 || bbox.right > background.w ||
            bbox.bottom > background.h)
            throw ArgumentError("condition: bbox outside background bounds");
    }
}

std::string condition_prompt(const ConditionInput& input, const std::string& template_override) {
    std::string tpl = template_override.empty()
                          ? "Background design caption: {caption}. Render the text: {target_text}. "
                            "Target region: [{left}, {top}, {right}, {bottom}]."
                          : template_override;
    auto sub = [&tpl](const std::string& k, const std::string& v) {
        const auto pos = tpl.find(k);
        if (pos != std::string::npos) tpl.replace(pos, k.size(), v);
    };
    sub("{caption}", input.caption);
    sub("{target_text}", input.target_text);
    sub("{left}", std::to_string(input.bbox.left));
    sub("{top}", std::to_string(input.bbox.top));
    sub("{right}", std::to_string(input.bbox.right));
    sub("{bottom}", std::to_string(input.bbox.bottom));
    return tpl;
}

ConditionEncoder::ConditionEncoder(const ResamplerConfig& cfg, Rng& rng)
    : cfg_(cfg), resampler_(cfg, rng), out_proj_(cfg.dim, cfg.heads, rng) {}

Tensor ConditionEncoder::encode_tokens(const Tensor& mllm_tokens) const {
    Tensor resampled = resampler_.resample(mllm_tokens);  // [q, dim]
    Tensor tokens = ops::reshape(resampled, {1, cfg_.queries, cfg_.dim});
    return ops::reshape(out_proj_.forward(tokens), {cfg_.queries, cfg_.dim});
}

Tensor ConditionEncoder::encode(const ConditionInput& input, clients::MllmClient& client) const {
    input.validate();
    clients::MllmRequest req;
    req.image = input.background;
    req.prompt = condition_prompt(input);
    Tensor tokens = client.encode(req);
    return encode_tokens(tokens);
}

void ConditionEncoder::params(const std::string& prefix, nn::NamedParams& out) const {
    resampler_.params(prefix + ".resampler", out);
    out_proj_.params(prefix + ".out_proj", out);
}

}  // namespace gf::enc
