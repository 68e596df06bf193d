#ifndef GLYPHFORGE_ENCODERS_HPP
#define GLYPHFORGE_ENCODERS_HPP

#include <memory>
#include <string>
#include <vector>

#include "glyphforge/clients.hpp"
#include "glyphforge/image.hpp"
#include "glyphforge/layout.hpp"
#include "glyphforge/nn.hpp"

// Content/style encoders with normalized projectors, the multi-modal
// condition encoder, and the fixed-length resampler. Backbones are small
// trainable patch transformers behind this interface; pretrained trunks can
// be substituted without touching callers.
namespace gf::enc {

struct EncoderConfig {
    int dim = 128;        // output token width (matches the model width)
    int heads = 4;
    int depth = 1;        // trunk blocks
    int patch = 8;        // patch size in pixels
    int resolution = 32;  // input glyph resolution
    int style_tokens = 8; // q pooled style tokens

    int grid_side() const { return resolution / patch; }
    int patch_tokens() const { return grid_side() * grid_side(); }
    void validate() const;
};

// Converts RGBA glyph images to an NCHW tensor batch (no gradient).
Tensor glyphs_to_tensor(const std::vector<const Image*>& images);

// Pre-norm transformer block without positional structure (the patch
// embedding carries learned positions).
struct TrunkBlock {
    nn::MultiheadAttention attn;
    nn::FeedForward ffn;

    TrunkBlock() = default;
    TrunkBlock(int dim, int heads, Rng& rng);
    Tensor forward(const Tensor& x) const;  // [B,K,dim]
    void params(const std::string& prefix, nn::NamedParams& out) const;
};

// Patchify + learned positions + trunk blocks.
struct PatchTrunk {
    EncoderConfig cfg;
    Tensor patch_weight;  // [dim, 4, patch, patch]
    Tensor patch_bias;    // [dim]
    Tensor pos_emb;       // [p, dim]
    std::vector<TrunkBlock> blocks;

    PatchTrunk() = default;
    PatchTrunk(const EncoderConfig& cfg, Rng& rng);
    // images [B,4,R,R] -> [B,p,dim]
    Tensor forward(const Tensor& images) const;
    void params(const std::string& prefix, nn::NamedParams& out) const;
};

// Maps features into the shared normalized latent space: one transformer
// block, a learned token bias, then exact per-token L2 normalization.
struct Projector {
    TrunkBlock block;
    Tensor out_bias;  // [dim]

    Projector() = default;
    Projector(int dim, int heads, Rng& rng);
    Tensor forward(const Tensor& tokens) const;  // [..,K,dim] -> unit-norm tokens
    void params(const std::string& prefix, nn::NamedParams& out) const;
};

class ContentEncoder {
public:
    ContentEncoder() = default;
    ContentEncoder(const EncoderConfig& cfg, Rng& rng);

    // glyphs: per batch sample a list of n glyph images -> [B, n, p, dim]
    Tensor encode(const std::vector<std::vector<const Image*>>& glyphs) const;
    Tensor encode_batch(const Tensor& images, int batch, int n) const;  // [B*n,4,R,R]
    const EncoderConfig& config() const { return cfg_; }
    void params(const std::string& prefix, nn::NamedParams& out) const;

private:
    EncoderConfig cfg_;
    PatchTrunk trunk_;
    Projector projector_;
};

class StyleEncoder {
public:
    StyleEncoder() = default;
    StyleEncoder(const EncoderConfig& cfg, Rng& rng);

    // refs: per batch sample m reference images -> [B, q, dim], unit-norm
    Tensor encode(const std::vector<std::vector<const Image*>>& refs) const;
    Tensor encode_batch(const Tensor& images, int batch, int m) const;  // [B*m,4,R,R]
    const EncoderConfig& config() const { return cfg_; }
    void params(const std::string& prefix, nn::NamedParams& out) const;

private:
    EncoderConfig cfg_;
    PatchTrunk trunk_;
    Tensor pool_queries_;  // [q, dim]
    nn::MultiheadAttention pool_attn_;
    Projector projector_;
};

// ---------------------------------------------------------------------------
// perceiver resampler + condition encoder

struct ResamplerConfig {
    int queries = 8;     // l
    int dim = 128;       // model width
    int mllm_dim = 64;   // incoming token width
    int heads = 4;
};

class PerceiverResampler {
public:
    PerceiverResampler() = default;
    PerceiverResampler(const ResamplerConfig& cfg, Rng& rng);

    // mllm_tokens [k, mllm_dim], k >= 0 -> [l, dim]
    Tensor resample(const Tensor& mllm_tokens) const;
    const ResamplerConfig& config() const { return cfg_; }
    void params(const std::string& prefix, nn::NamedParams& out) const;

    const Tensor& queries() const { return queries_; }

private:
    ResamplerConfig cfg_;
    Tensor queries_;        // [l, dim]
    nn::Linear input_proj_; // mllm_dim -> dim
    nn::MultiheadAttention attn_;
    nn::FeedForward ffn_;
};

struct ConditionInput {
    Image background;
    std::string caption;
    std::string target_text;
    layout::BBox bbox;

    void validate() const;
};

// Instruction prompt with fields serialized in a fixed order.
std::string condition_prompt(const ConditionInput& input, const std::string& template_override = "");

// Resampler plus a normalized output head; output is StyleEmbedding-shaped
// [q, dim] so it can replace style tokens directly.
class ConditionEncoder {
public:
    ConditionEncoder() = default;
    ConditionEncoder(const ResamplerConfig& cfg, Rng& rng);

    Tensor encode(const ConditionInput& input, clients::MllmClient& client) const;
    Tensor encode_tokens(const Tensor& mllm_tokens) const;  // resample + normalize
    const PerceiverResampler& resampler() const { return resampler_; }
    void params(const std::string& prefix, nn::NamedParams& out) const;

private:
    ResamplerConfig cfg_;
    PerceiverResampler resampler_;
    Projector out_proj_;
};

}  // namespace gf::enc

#endif
