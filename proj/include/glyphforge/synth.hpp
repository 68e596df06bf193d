#ifndef GLYPHFORGE_SYNTH_HPP
#define GLYPHFORGE_SYNTH_HPP

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "glyphforge/image.hpp"
#include "glyphforge/rng.hpp"

// Synthetic stylized-glyph data: a procedural stroke rasterizer stands in for
// font files, so the content/style factorization is preserved without binary
// assets. The rasterizer sits behind GlyphRasterizer and can be swapped for a
// real font backend.
namespace gf::synth {

constexpr int kCharsetSize = 64;
constexpr int kMinResolution = 8;

// Maps a printable character to a glyph id, or -1 when unmapped.
int char_id_of(char c);
// The characters covered by char_id_of, in id order.
const std::string& charset_chars();

struct StyleSpec {
    int family = 0;
    double stroke_width = 0.08;  // in unit-square units
    double slant = 0.0;          // radians, [-0.5, 0.5]
    std::array<double, 3> fill_color = {0.0, 0.0, 0.0};
    int texture_id = -1;  // <0 disables texturing

    void validate() const;
};

// Stable small id derived from the quantized style parameters.
int style_spec_id(const StyleSpec& s);

// Neutral content-reference style: plain black, canonical family.
StyleSpec neutral_style();

// Procedurally sampled style; pure function of the seed.
StyleSpec procedural_style(uint64_t style_seed, bool with_texture = false);

class GlyphRasterizer {
public:
    virtual ~GlyphRasterizer() = default;
    virtual RGBAGlyph render(int char_id, const StyleSpec& style, int resolution) const = 0;
};

// Parametric strokes on a 3x3 anchor grid; families jitter the anchors.
class StrokeRasterizer : public GlyphRasterizer {
public:
    RGBAGlyph render(int char_id, const StyleSpec& style, int resolution) const override;
};

const GlyphRasterizer& default_rasterizer();

RGBAGlyph render_glyph(int char_id, const StyleSpec& style, int resolution);

struct GlyphTriplet {
    std::vector<RGBAGlyph> content_refs;
    std::vector<RGBAGlyph> style_refs;
    std::vector<RGBAGlyph> ground_truth;

    void validate() const;
};

GlyphTriplet compose_triplet(const std::vector<int>& content_chars, const StyleSpec& style,
                             int m, uint64_t rng_seed, int resolution);

struct PerturbationConfig {
    std::array<double, 2> blur_sigma_range = {0.5, 2.0};
    std::vector<int> downsample_factors = {2, 4};
    std::array<double, 2> noise_std_range = {0.02, 0.10};
    std::vector<std::array<double, 3>> background_palette = {
        {1.0, 1.0, 1.0}, {0.5, 0.5, 0.5}, {0.9, 0.8, 0.2}, {0.1, 0.3, 0.6}};
    double per_op_probability = 0.5;

    void validate() const;
};

std::vector<RGBAGlyph> perturb_style_refs(const std::vector<RGBAGlyph>& images,
                                          const PerturbationConfig& config, uint64_t rng_seed);

// ---------------------------------------------------------------------------
// dataset shards

struct TripletSample {
    int id = 0;
    std::vector<int> char_ids;
    int style_id = 0;
    std::string split;  // "train" | "val"
    GlyphTriplet triplet;
};

struct DatasetConfig {
    int count = 64;
    int resolution = 32;
    uint64_t seed = 0;
    int chars_per_sample = 1;
    int style_refs = 2;
    int num_styles = 8;
    bool perturb = true;
    bool textures = false;
    double val_fraction = 0.1;
    PerturbationConfig perturbation;
};

std::vector<TripletSample> generate_dataset(const DatasetConfig& config);

// Exhaustive grid (every style x char pair once), used by overfit experiments.
std::vector<TripletSample> generate_grid_dataset(int num_styles, int num_chars, int resolution,
                                                 uint64_t seed, int style_refs, bool perturb);

constexpr int kShardSchemaVersion = 1;
void write_shard(const std::string& dir, const std::vector<TripletSample>& samples,
                 int resolution);
std::vector<TripletSample> load_shard(const std::string& dir);

}  // namespace gf::synth

#endif
