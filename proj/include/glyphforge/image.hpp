#ifndef GLYPHFORGE_IMAGE_HPP
#define GLYPHFORGE_IMAGE_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "glyphforge/errors.hpp"

namespace gf {

// Dense HWC image, values in [0,1], 1/3/4 channels.
struct Image {
    int h = 0, w = 0, c = 0;
    std::vector<double> pix;  // h*w*c row-major

    Image() = default;
    Image(int h_, int w_, int c_, double fill = 0.0)
        : h(h_), w(w_), c(c_), pix(size_t(h_) * w_ * c_, fill) {}

    double& at(int y, int x, int ch) { return pix[(size_t(y) * w + x) * c + ch]; }
    double at(int y, int x, int ch) const { return pix[(size_t(y) * w + x) * c + ch]; }
    bool empty() const { return pix.empty(); }
    size_t numel() const { return pix.size(); }

    void clamp01();
};

// Four-channel glyph image with identity labels.
struct RGBAGlyph {
    Image image;  // c == 4, channels R,G,B,A
    int char_id = -1;
    int style_id = -1;

    int resolution() const { return image.h; }
};

void validate_rgba(const RGBAGlyph& g);

// background in [0,1]; returns H x W x 3 with each channel
// a*rgb + (1-a)*background. background == 0 is the strict multiply form.
Image blend_alpha(const RGBAGlyph& glyph, double background);

// Alpha-over: fg composited onto dst at (top,left). fg must be RGBA; dst RGB.
void composite_over(Image& dst, const Image& fg, int top, int left);

// Per-pixel helpers.
double image_mse(const Image& a, const Image& b);
double image_mae(const Image& a, const Image& b);
// Total variation (sum of absolute horizontal+vertical first differences).
double total_variation(const Image& img, int channel);

Image resize_nearest(const Image& src, int oh, int ow);
Image crop(const Image& src, int top, int left, int height, int width);

// PNG (8-bit, RGB or RGBA) via zlib; deterministic bytes for fixed input.
void write_png(const std::string& path, const Image& img);
std::vector<unsigned char> encode_png(const Image& img);

// Raw float image blob: magic + dims + doubles. Used for dataset shards.
void write_image_blob(const std::string& path, const Image& img);
Image read_image_blob(const std::string& path);

}  // namespace gf

#endif
