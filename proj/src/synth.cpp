#include "glyphforge/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <mutex>

#include <json.hpp>

#include "glyphforge/kernels.hpp"

namespace fs = std::filesystem;

namespace gf::synth {

// ---------------------------------------------------------------------------
// character registry

const std::string& charset_chars() {
    static const std::string chars =
        "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789!?";
    return chars;
}

int char_id_of(char c) {
    const auto& s = charset_chars();
    const auto pos = s.find(c);
    return pos == std::string::npos ? -1 : int(pos);
}

namespace {

struct Segment {
    double x0, y0, x1, y1;
};

// 3x3 anchors, 20 candidate edges (rows, columns, cell diagonals).
constexpr int kAnchorCoords = 3;
constexpr int kCandidates = 20;

std::array<std::array<int, 2>, kCandidates> candidate_edges() {
    // anchors indexed (col, row) in {0,1,2}; id = row*3+col
    std::array<std::array<int, 2>, kCandidates> e{};
    int n = 0;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 2; ++c) e[size_t(n++)] = {r * 3 + c, r * 3 + c + 1};  // horizontal
    for (int c = 0; c < 3; ++c)
        for (int r = 0; r < 2; ++r) e[size_t(n++)] = {r * 3 + c, (r + 1) * 3 + c};  // vertical
    // diagonals of the four cells
    e[size_t(n++)] = {0, 4};
    e[size_t(n++)] = {1, 3};
    e[size_t(n++)] = {1, 5};
    e[size_t(n++)] = {2, 4};
    e[size_t(n++)] = {3, 7};
    e[size_t(n++)] = {4, 6};
    e[size_t(n++)] = {4, 8};
    e[size_t(n++)] = {5, 7};
    return e;
}

// Deterministic, collision-free stroke masks per character id.
const std::array<uint32_t, kCharsetSize>& char_masks() {
    static std::array<uint32_t, kCharsetSize> masks;
    static std::once_flag once;
    std::call_once(once, [] {
        for (int id = 0; id < kCharsetSize; ++id) {
            uint64_t salt = 0;
            uint32_t mask = 0;
            for (;;) {
                uint64_t h = hash_combine(0x914c5332u, hash_combine(uint64_t(id), salt));
                mask = uint32_t(h & ((1u << kCandidates) - 1));
                int bits = __builtin_popcount(mask);
                uint64_t extra = h >> kCandidates;
                while (bits < 4) {
                    mask |= 1u << (extra % kCandidates);
                    extra = hash64(extra);
                    bits = __builtin_popcount(mask);
                }
                bool clash = false;
                for (int prev = 0; prev < id; ++prev)
                    if (masks[size_t(prev)] == mask) { clash = true; break; }
                if (!clash) break;
                ++salt;
            }
            masks[size_t(id)] = mask;
        }
    });
    return masks;
}

double anchor_coord(int family, int anchor_id, int axis) {
    static const double base[kAnchorCoords] = {0.22, 0.5, 0.78};
    const int idx = axis == 0 ? anchor_id % 3 : anchor_id / 3;
    double v = base[idx];
    if (family != 0) {
        const uint64_t h = hash_combine(uint64_t(family) * 7919u,
                                        hash_combine(uint64_t(anchor_id), uint64_t(axis)));
        v += (double(h % 2048) / 2048.0 - 0.5) * 0.12;
    }
    return v;
}

double dist_to_segment(double px, double py, const Segment& s) {
    const double vx = s.x1 - s.x0, vy = s.y1 - s.y0;
    const double wx = px - s.x0, wy = py - s.y0;
    const double len2 = vx * vx + vy * vy;
    double t = len2 > 0 ? (wx * vx + wy * vy) / len2 : 0.0;
    t = std::min(1.0, std::max(0.0, t));
    const double dx = px - (s.x0 + t * vx), dy = py - (s.y0 + t * vy);
    return std::sqrt(dx * dx + dy * dy);
}

std::vector<Segment> char_segments(int char_id, int family) {
    const auto edges = candidate_edges();
    const uint32_t mask = char_masks()[size_t(char_id)];
    std::vector<Segment> segs;
    for (int i = 0; i < kCandidates; ++i) {
        if (!(mask & (1u << i))) continue;
        const int a = edges[size_t(i)][0], b = edges[size_t(i)][1];
        segs.push_back({anchor_coord(family, a, 0), anchor_coord(family, a, 1),
                        anchor_coord(family, b, 0), anchor_coord(family, b, 1)});
    }
    return segs;
}

}  // namespace

void StyleSpec::validate() const {
    if (!(stroke_width > 0.0)) throw ArgumentError("style: stroke_width must be > 0");
    if (slant < -0.5 || slant > 0.5) throw ArgumentError("style: slant outside [-0.5, 0.5]");
    for (double c : fill_color)
        if (c < 0.0 || c > 1.0) throw ArgumentError("style: fill_color outside [0,1]");
}

int style_spec_id(const StyleSpec& s) {
    uint64_t h = hash64(uint64_t(s.family));
    h = hash_combine(h, uint64_t(std::llround(s.stroke_width * 1e6)));
    h = hash_combine(h, uint64_t(std::llround((s.slant + 1.0) * 1e6)));
    for (double c : s.fill_color) h = hash_combine(h, uint64_t(std::llround(c * 1e6)));
    h = hash_combine(h, uint64_t(s.texture_id + 1));
    return int(h & 0x7fffffff);
}

StyleSpec neutral_style() { return StyleSpec{}; }

StyleSpec procedural_style(uint64_t style_seed, bool with_texture) {
    Rng rng(hash_combine(0x57151e5eULL, style_seed));
    StyleSpec s;
    s.family = int(rng.below(12));
    s.stroke_width = rng.uniform(0.05, 0.14);
    s.slant = rng.uniform(-0.35, 0.35);
    s.fill_color = {rng.uniform(0.1, 1.0), rng.uniform(0.1, 1.0), rng.uniform(0.1, 1.0)};
    s.texture_id = with_texture && rng.bernoulli(0.5) ? int(rng.below(16)) : -1;
    return s;
}

RGBAGlyph StrokeRasterizer::render(int char_id, const StyleSpec& style, int resolution) const {
    if (char_id < 0 || char_id >= kCharsetSize)
        throw DomainError("unknown char_id " + std::to_string(char_id));
    if (resolution < kMinResolution)
        throw ArgumentError("resolution below minimum " + std::to_string(kMinResolution));
    style.validate();

    const auto segs = char_segments(char_id, style.family);
    const double aa = 1.5 / resolution;  // antialias band, ~1.5px
    const double half_w = style.stroke_width / 2.0;

    RGBAGlyph out;
    out.char_id = char_id;
    out.style_id = style_spec_id(style);
    out.image = Image(resolution, resolution, 4);

    for (int y = 0; y < resolution; ++y) {
        const double py = (y + 0.5) / resolution;
        for (int x = 0; x < resolution; ++x) {
            double px = (x + 0.5) / resolution;
            // shear the sampling point for slant
            px += std::tan(style.slant) * (py - 0.5);
            double d = 1e9;
            for (const auto& s : segs) d = std::min(d, dist_to_segment(px, py, s));
            double alpha = std::min(1.0, std::max(0.0, 0.5 + (half_w - d) / aa));
            out.image.at(y, x, 3) = alpha;
            if (alpha > 0.0) {
                double fr = style.fill_color[0], fg = style.fill_color[1], fb = style.fill_color[2];
                if (style.texture_id >= 0) {
                    const uint64_t h = hash64(uint64_t(style.texture_id) + 17);
                    const double kx = 2.0 + double(h % 5);
                    const double ky = 2.0 + double((h >> 8) % 5);
                    const double phase = double((h >> 16) % 628) / 100.0;
                    const double mod =
                        0.75 + 0.25 * std::sin(6.2831853 * (kx * px + ky * py) + phase);
                    fr *= mod;
                    fg *= mod;
                    fb *= mod;
                }
                out.image.at(y, x, 0) = fr;
                out.image.at(y, x, 1) = fg;
                out.image.at(y, x, 2) = fb;
            }
        }
    }
    out.image.clamp01();
    return out;
}

const GlyphRasterizer& default_rasterizer() {
    static StrokeRasterizer r;
    return r;
}

RGBAGlyph render_glyph(int char_id, const StyleSpec& style, int resolution) {
    return default_rasterizer().render(char_id, style, resolution);
}

void GlyphTriplet::validate() const {
    if (content_refs.empty() || style_refs.empty() || ground_truth.empty())
        throw ArgumentError("triplet: empty component");
    if (content_refs.size() != ground_truth.size())
        throw ArgumentError("triplet: content/ground-truth length mismatch");
    const int sid = ground_truth.front().style_id;
    for (size_t i = 0; i < ground_truth.size(); ++i) {
        if (ground_truth[i].char_id != content_refs[i].char_id)
            throw ArgumentError("triplet: char_id mismatch at " + std::to_string(i));
        if (ground_truth[i].style_id != sid) throw ArgumentError("triplet: mixed gt styles");
    }
    for (const auto& s : style_refs)
        if (s.style_id != sid) throw ArgumentError("triplet: style ref style mismatch");
}

GlyphTriplet compose_triplet(const std::vector<int>& content_chars, const StyleSpec& style,
                             int m, uint64_t rng_seed, int resolution) {
    if (content_chars.empty()) throw ArgumentError("compose_triplet: empty content_chars");
    if (m < 1) throw ArgumentError("compose_triplet: m must be >= 1");
    style.validate();

    Rng rng(hash_combine(0x7219ab3cULL, rng_seed));
    GlyphTriplet t;
    const StyleSpec neutral = neutral_style();
    for (int c : content_chars) {
        t.content_refs.push_back(render_glyph(c, neutral, resolution));
        t.ground_truth.push_back(render_glyph(c, style, resolution));
    }

    // Style-reference characters sampled disjoint from the content set when
    // the charset permits.
    std::vector<int> pool;
    for (int c = 0; c < kCharsetSize; ++c)
        if (std::find(content_chars.begin(), content_chars.end(), c) == content_chars.end())
            pool.push_back(c);
    if (pool.empty())
        for (int c = 0; c < kCharsetSize; ++c) pool.push_back(c);
    for (int i = 0; i < m; ++i) {
        const int c = pool[size_t(rng.below(pool.size()))];
        t.style_refs.push_back(render_glyph(c, style, resolution));
    }
    t.validate();
    return t;
}

void PerturbationConfig::validate() const {
    if (blur_sigma_range[0] > blur_sigma_range[1] || noise_std_range[0] > noise_std_range[1])
        throw ArgumentError("perturbation: range lo > hi");
    if (downsample_factors.empty()) throw ArgumentError("perturbation: empty downsample factors");
    for (int f : downsample_factors)
        if (f < 1) throw ArgumentError("perturbation: downsample factor < 1");
    if (background_palette.empty()) throw ArgumentError("perturbation: empty palette");
    if (per_op_probability < 0.0 || per_op_probability > 1.0)
        throw ArgumentError("perturbation: probability outside [0,1]");
}

namespace {

void blur_rgba(Image& img, double sigma) {
    std::vector<double> plane(size_t(img.h) * img.w), blurred(plane.size());
    for (int ch = 0; ch < img.c; ++ch) {
        for (int y = 0; y < img.h; ++y)
            for (int x = 0; x < img.w; ++x) plane[size_t(y) * img.w + x] = img.at(y, x, ch);
        kernels::gaussian_blur(plane.data(), blurred.data(), img.h, img.w, sigma);
        for (int y = 0; y < img.h; ++y)
            for (int x = 0; x < img.w; ++x) img.at(y, x, ch) = blurred[size_t(y) * img.w + x];
    }
}

void downsample_up(Image& img, int factor) {
    if (factor <= 1) return;
    const int sh = std::max(1, img.h / factor), sw = std::max(1, img.w / factor);
    Image small(sh, sw, img.c);
    for (int y = 0; y < sh; ++y)
        for (int x = 0; x < sw; ++x)
            for (int ch = 0; ch < img.c; ++ch) {
                double acc = 0.0;
                int cnt = 0;
                for (int dy = 0; dy < factor; ++dy)
                    for (int dx = 0; dx < factor; ++dx) {
                        const int yy = y * factor + dy, xx = x * factor + dx;
                        if (yy < img.h && xx < img.w) { acc += img.at(yy, xx, ch); ++cnt; }
                    }
                small.at(y, x, ch) = acc / cnt;
            }
    img = resize_nearest(small, img.h, img.w);
}

}  // namespace

std::vector<RGBAGlyph> perturb_style_refs(const std::vector<RGBAGlyph>& images,
                                          const PerturbationConfig& config, uint64_t rng_seed) {
    if (images.empty()) throw ArgumentError("perturb_style_refs: empty input");
    config.validate();

    Rng rng(hash_combine(0x5eedba5eULL, rng_seed));
    std::vector<RGBAGlyph> out = images;
    for (auto& g : out) {
        Image& img = g.image;
        if (rng.bernoulli(config.per_op_probability)) {
            blur_rgba(img, rng.uniform(config.blur_sigma_range[0], config.blur_sigma_range[1]));
        }
        if (rng.bernoulli(config.per_op_probability)) {
            const int f = config.downsample_factors[size_t(
                rng.below(config.downsample_factors.size()))];
            downsample_up(img, f);
        }
        if (rng.bernoulli(config.per_op_probability)) {
            const double std = rng.uniform(config.noise_std_range[0], config.noise_std_range[1]);
            for (auto& v : img.pix) v += rng.normal(0.0, std);
        }
        if (rng.bernoulli(config.per_op_probability)) {
            const auto& bg =
                config.background_palette[size_t(rng.below(config.background_palette.size()))];
            for (int y = 0; y < img.h; ++y)
                for (int x = 0; x < img.w; ++x) {
                    const double a = std::min(1.0, std::max(0.0, img.at(y, x, 3)));
                    for (int ch = 0; ch < 3; ++ch)
                        img.at(y, x, ch) = a * img.at(y, x, ch) + (1.0 - a) * bg[size_t(ch)];
                    img.at(y, x, 3) = 1.0;
                }
        }
        img.clamp01();
    }
    return out;
}

// ---------------------------------------------------------------------------
// dataset generation and shard IO

std::vector<TripletSample> generate_dataset(const DatasetConfig& config) {
    if (config.count < 1) throw ArgumentError("dataset: count must be >= 1");
    std::vector<TripletSample> samples;
    samples.reserve(size_t(config.count));
    Rng top(hash_combine(0xda7a5e7ULL, config.seed));
    for (int i = 0; i < config.count; ++i) {
        Rng rng = top.fork(uint64_t(i));
        TripletSample s;
        s.id = i;
        const uint64_t style_seed = rng.below(uint64_t(config.num_styles));
        const StyleSpec style = procedural_style(style_seed, config.textures);
        for (int j = 0; j < config.chars_per_sample; ++j)
            s.char_ids.push_back(int(rng.below(kCharsetSize)));
        s.triplet = compose_triplet(s.char_ids, style, config.style_refs, rng.next_u64(),
                                    config.resolution);
        if (config.perturb)
            s.triplet.style_refs =
                perturb_style_refs(s.triplet.style_refs, config.perturbation, rng.next_u64());
        s.style_id = s.triplet.ground_truth.front().style_id;
        s.split = (double(i) < (1.0 - config.val_fraction) * config.count) ? "train" : "val";
        samples.push_back(std::move(s));
    }
    return samples;
}

std::vector<TripletSample> generate_grid_dataset(int num_styles, int num_chars, int resolution,
                                                 uint64_t seed, int style_refs, bool perturb) {
    std::vector<TripletSample> samples;
    Rng top(hash_combine(0x9129dULL, seed));
    PerturbationConfig pc;
    int id = 0;
    for (int si = 0; si < num_styles; ++si) {
        const StyleSpec style = procedural_style(uint64_t(si));
        for (int ci = 0; ci < num_chars; ++ci) {
            Rng rng = top.fork(uint64_t(id));
            TripletSample s;
            s.id = id++;
            s.char_ids = {ci};
            s.triplet = compose_triplet(s.char_ids, style, style_refs, rng.next_u64(), resolution);
            if (perturb)
                s.triplet.style_refs =
                    perturb_style_refs(s.triplet.style_refs, pc, rng.next_u64());
            s.style_id = s.triplet.ground_truth.front().style_id;
            s.split = "train";
            samples.push_back(std::move(s));
        }
    }
    return samples;
}

void write_shard(const std::string& dir, const std::vector<TripletSample>& samples,
                 int resolution) {
    fs::create_directories(dir);
    nlohmann::json manifest;
    manifest["schema_version"] = kShardSchemaVersion;
    manifest["resolution"] = resolution;
    manifest["count"] = samples.size();
    auto& list = manifest["samples"] = nlohmann::json::array();

    auto dump_set = [&](const std::vector<RGBAGlyph>& glyphs, const std::string& stem) {
        std::vector<std::string> paths;
        for (size_t j = 0; j < glyphs.size(); ++j) {
            const std::string rel = stem + "_" + std::to_string(j) + ".gfi";
            write_image_blob((fs::path(dir) / rel).string(), glyphs[j].image);
            paths.push_back(rel);
        }
        return paths;
    };

    for (const auto& s : samples) {
        const std::string stem = "s" + std::to_string(s.id);
        nlohmann::json e;
        e["id"] = s.id;
        e["char_ids"] = s.char_ids;
        e["style_id"] = s.style_id;
        e["split"] = s.split;
        e["paths"]["gt"] = dump_set(s.triplet.ground_truth, stem + "_gt");
        e["paths"]["content"] = dump_set(s.triplet.content_refs, stem + "_ct");
        e["paths"]["style"] = dump_set(s.triplet.style_refs, stem + "_st");
        list.push_back(std::move(e));
    }
    std::ofstream f(fs::path(dir) / "manifest.json");
    if (!f) throw IoError("cannot write manifest in " + dir);
    f << manifest.dump(2) << "\n";
}

std::vector<TripletSample> load_shard(const std::string& dir) {
    std::ifstream f(fs::path(dir) / "manifest.json");
    if (!f) throw IoError("missing manifest.json in " + dir);
    nlohmann::json manifest = nlohmann::json::parse(f);
    if (manifest.at("schema_version").get<int>() != kShardSchemaVersion)
        throw IoError("unsupported shard schema version in " + dir);

    std::vector<TripletSample> samples;
    for (const auto& e : manifest.at("samples")) {
        TripletSample s;
        s.id = e.at("id").get<int>();
        s.char_ids = e.at("char_ids").get<std::vector<int>>();
        s.style_id = e.at("style_id").get<int>();
        s.split = e.at("split").get<std::string>();
        auto read_set = [&](const char* key, std::vector<RGBAGlyph>& out, bool neutral) {
            size_t j = 0;
            for (const auto& rel : e.at("paths").at(key)) {
                RGBAGlyph g;
                g.image = read_image_blob((fs::path(dir) / rel.get<std::string>()).string());
                g.char_id = j < s.char_ids.size() ? s.char_ids[j] : -1;
                g.style_id = neutral ? style_spec_id(neutral_style()) : s.style_id;
                out.push_back(std::move(g));
                ++j;
            }
        };
        read_set("gt", s.triplet.ground_truth, false);
        read_set("content", s.triplet.content_refs, true);
        read_set("style", s.triplet.style_refs, false);
        samples.push_back(std::move(s));
    }
    return samples;
}

}  // namespace gf::synth
