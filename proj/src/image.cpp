#include "glyphforge/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include <zlib.h>

namespace gf {

void Image::clamp01() {
    for (auto& v : pix) v = std::min(1.0, std::max(0.0, v));
}

void validate_rgba(const RGBAGlyph& g) {
    if (g.image.c != 4) throw ArgumentError("RGBA glyph must have 4 channels");
    for (double v : g.image.pix)
        if (!(v >= 0.0 && v <= 1.0)) throw ArgumentError("glyph pixel outside [0,1]");
}

Image blend_alpha(const RGBAGlyph& glyph, double background) {
    if (!(background >= 0.0 && background <= 1.0))
        throw ArgumentError("blend background must be in [0,1]");
    validate_rgba(glyph);
    const Image& g = glyph.image;
    Image out(g.h, g.w, 3);
    for (int y = 0; y < g.h; ++y)
        for (int x = 0; x < g.w; ++x) {
            const double a = g.at(y, x, 3);
            for (int ch = 0; ch < 3; ++ch)
                out.at(y, x, ch) = a * g.at(y, x, ch) + (1.0 - a) * background;
        }
    return out;
}

void composite_over(Image& dst, const Image& fg, int top, int left) {
    if (fg.c != 4) throw ArgumentError("composite_over foreground must be RGBA");
    if (dst.c != 3) throw ArgumentError("composite_over destination must be RGB");
    for (int y = 0; y < fg.h; ++y) {
        const int dy = top + y;
        if (dy < 0 || dy >= dst.h) continue;
        for (int x = 0; x < fg.w; ++x) {
            const int dx = left + x;
            if (dx < 0 || dx >= dst.w) continue;
            const double a = fg.at(y, x, 3);
            if (a == 0.0) continue;  // locality: untouched pixels stay bitwise equal
            for (int ch = 0; ch < 3; ++ch)
                dst.at(dy, dx, ch) = a * fg.at(y, x, ch) + (1.0 - a) * dst.at(dy, dx, ch);
        }
    }
}

double image_mse(const Image& a, const Image& b) {
    if (a.pix.size() != b.pix.size()) throw ArgumentError("image_mse: size mismatch");
    double acc = 0.0;
    for (size_t i = 0; i < a.pix.size(); ++i) {
        const double d = a.pix[i] - b.pix[i];
        acc += d * d;
    }
    return acc / double(a.pix.size());
}

double image_mae(const Image& a, const Image& b) {
    if (a.pix.size() != b.pix.size()) throw ArgumentError("image_mae: size mismatch");
    double acc = 0.0;
    for (size_t i = 0; i < a.pix.size(); ++i) acc += std::fabs(a.pix[i] - b.pix[i]);
    return acc / double(a.pix.size());
}

double total_variation(const Image& img, int channel) {
    double tv = 0.0;
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x) {
            if (x + 1 < img.w) tv += std::fabs(img.at(y, x + 1, channel) - img.at(y, x, channel));
            if (y + 1 < img.h) tv += std::fabs(img.at(y + 1, x, channel) - img.at(y, x, channel));
        }
    return tv;
}

Image resize_nearest(const Image& src, int oh, int ow) {
    Image out(oh, ow, src.c);
    for (int y = 0; y < oh; ++y) {
        const int sy = std::min(src.h - 1, y * src.h / oh);
        for (int x = 0; x < ow; ++x) {
            const int sx = std::min(src.w - 1, x * src.w / ow);
            for (int ch = 0; ch < src.c; ++ch) out.at(y, x, ch) = src.at(sy, sx, ch);
        }
    }
    return out;
}

Image crop(const Image& src, int top, int left, int height, int width) {
    if (top < 0 || left < 0 || top + height > src.h || left + width > src.w)
        throw ArgumentError("crop out of bounds");
    Image out(height, width, src.c);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x)
            for (int ch = 0; ch < src.c; ++ch) out.at(y, x, ch) = src.at(top + y, left + x, ch);
    return out;
}

// ---------------------------------------------------------------------------
// PNG encoding

namespace {

void put_u32(std::vector<unsigned char>& out, uint32_t v) {
    out.push_back((v >> 24) & 0xff);
    out.push_back((v >> 16) & 0xff);
    out.push_back((v >> 8) & 0xff);
    out.push_back(v & 0xff);
}

void put_chunk(std::vector<unsigned char>& out, const char type[4],
               const std::vector<unsigned char>& data) {
    put_u32(out, uint32_t(data.size()));
    const size_t start = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), data.begin(), data.end());
    const uint32_t crc = uint32_t(crc32(0, out.data() + start, uInt(out.size() - start)));
    put_u32(out, crc);
}

}  // namespace

std::vector<unsigned char> encode_png(const Image& img) {
    if (img.c != 3 && img.c != 4) throw ArgumentError("encode_png supports RGB/RGBA only");
    const int bpp = img.c;
    // filter byte 0 per row + 8-bit samples
    std::vector<unsigned char> raw;
    raw.reserve(size_t(img.h) * (1 + size_t(img.w) * bpp));
    for (int y = 0; y < img.h; ++y) {
        raw.push_back(0);
        for (int x = 0; x < img.w; ++x)
            for (int ch = 0; ch < bpp; ++ch) {
                const double v = std::min(1.0, std::max(0.0, img.at(y, x, ch)));
                raw.push_back(static_cast<unsigned char>(std::lround(v * 255.0)));
            }
    }
    uLongf zlen = compressBound(uLong(raw.size()));
    std::vector<unsigned char> zdata(zlen);
    if (compress2(zdata.data(), &zlen, raw.data(), uLong(raw.size()), 6) != Z_OK)
        throw IoError("png: deflate failed");
    zdata.resize(zlen);

    std::vector<unsigned char> out = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    std::vector<unsigned char> ihdr;
    put_u32(ihdr, uint32_t(img.w));
    put_u32(ihdr, uint32_t(img.h));
    ihdr.push_back(8);                            // bit depth
    ihdr.push_back(img.c == 3 ? 2 : 6);           // color type
    ihdr.push_back(0);
    ihdr.push_back(0);
    ihdr.push_back(0);
    put_chunk(out, "IHDR", ihdr);
    put_chunk(out, "IDAT", zdata);
    put_chunk(out, "IEND", {});
    return out;
}

void write_png(const std::string& path, const Image& img) {
    const auto bytes = encode_png(img);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + path);
    f.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
    if (!f) throw IoError("write failed: " + path);
}

// ---------------------------------------------------------------------------
// raw blobs

namespace {
constexpr char kBlobMagic[4] = {'G', 'F', 'I', 'M'};
}

void write_image_blob(const std::string& path, const Image& img) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + path);
    f.write(kBlobMagic, 4);
    const uint32_t dims[3] = {uint32_t(img.h), uint32_t(img.w), uint32_t(img.c)};
    f.write(reinterpret_cast<const char*>(dims), sizeof(dims));
    f.write(reinterpret_cast<const char*>(img.pix.data()),
            std::streamsize(img.pix.size() * sizeof(double)));
    if (!f) throw IoError("write failed: " + path);
}

Image read_image_blob(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open: " + path);
    char magic[4];
    f.read(magic, 4);
    if (!f || std::memcmp(magic, kBlobMagic, 4) != 0)
        throw IoError("not an image blob: " + path);
    uint32_t dims[3];
    f.read(reinterpret_cast<char*>(dims), sizeof(dims));
    Image img(static_cast<int>(dims[0]), static_cast<int>(dims[1]), static_cast<int>(dims[2]));
    f.read(reinterpret_cast<char*>(img.pix.data()),
           std::streamsize(img.pix.size() * sizeof(double)));
    if (!f) throw IoError("truncated image blob: " + path);
    return img;
}

}  // namespace gf
