#include "glyphforge/clients.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <httplib.h>
#include <json.hpp>

namespace gf::clients {

namespace {

uint64_t hash_image(const Image& img) {
    uint64_t h = hash64(uint64_t(img.h) * 31 + uint64_t(img.w) * 7 + uint64_t(img.c));
    // subsample for speed; enough to key on content
    const size_t stride = std::max<size_t>(1, img.pix.size() / 64);
    for (size_t i = 0; i < img.pix.size(); i += stride)
        h = hash_combine(h, uint64_t(std::llround(img.pix[i] * 4096.0)));
    return h;
}

uint64_t hash_string(const std::string& s) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace

Tensor StubMllmClient::encode(const MllmRequest& request) {
    uint64_t h = hash_combine(hash_string(request.prompt), seed_);
    if (!request.image.empty()) h = hash_combine(h, hash_image(request.image));
    const int k = 6 + int(request.prompt.size() % 21);  // variable token count
    Rng rng(h);
    return Tensor::randn({k, dim_}, rng, 1.0);
}

RemoteMllmClient::RemoteMllmClient(std::string host, int port, int dim, int timeout_sec,
                                   int retries)
    : host_(std::move(host)), port_(port), dim_(dim), timeout_sec_(timeout_sec),
      retries_(retries) {}

Tensor RemoteMllmClient::encode(const MllmRequest& request) {
    nlohmann::json body;
    body["prompt"] = request.prompt;
    if (!request.image.empty()) {
        body["image"] = {{"h", request.image.h}, {"w", request.image.w}, {"c", request.image.c}};
        // coarse 8-bit payload keeps requests small
        std::string bytes;
        bytes.reserve(request.image.pix.size());
        for (double v : request.image.pix)
            bytes.push_back(char(int(std::min(1.0, std::max(0.0, v)) * 255.0)));
        body["image"]["pixels_u8"] = nlohmann::json::binary(
            std::vector<uint8_t>(bytes.begin(), bytes.end()));
    }
    const std::string payload = body.dump();

    int attempts = 0;
    std::string last_error;
    while (attempts <= retries_) {
        ++attempts;
        httplib::Client cli(host_, port_);
        cli.set_connection_timeout(timeout_sec_);
        cli.set_read_timeout(timeout_sec_);
        auto res = cli.Post("/encode", payload, "application/json");
        if (!res) {
            last_error = "connection failed";
            continue;
        }
        if (res->status != 200) {
            last_error = "http status " + std::to_string(res->status);
            continue;
        }
        try {
            nlohmann::json reply = nlohmann::json::parse(res->body);
            const auto& rows = reply.at("tokens");
            const int k = int(rows.size());
            if (k == 0) throw std::runtime_error("empty token matrix");
            std::vector<double> data;
            data.reserve(size_t(k) * dim_);
            for (const auto& row : rows) {
                if (int(row.size()) != dim_) throw std::runtime_error("token dim mismatch");
                for (const auto& v : row) data.push_back(v.get<double>());
            }
            return Tensor::from_vec({k, dim_}, std::move(data));
        } catch (const std::exception& e) {
            last_error = std::string("bad reply: ") + e.what();
        }
    }
    throw TransportError("mllm client " + host_ + ":" + std::to_string(port_) + " failed: " +
                             last_error,
                         attempts);
}

std::string StubTextClient::complete(const std::string& prompt, const Image* background) {
    (void)background;
    if (mode_ == Mode::Malformed) return "sorry, here is my layout: [100 200 300]";
    // Recover the requested item labels from the prompt's JSON template so the
    // reply keeps labels and order intact.
    nlohmann::json items = nlohmann::json::array();
    const std::string marker = "defined as: ";
    auto tpl_pos = prompt.rfind(marker);
    if (tpl_pos != std::string::npos) tpl_pos += marker.size();
    else tpl_pos = prompt.find('[');
    if (tpl_pos != std::string::npos) {
        try {
            std::string tail = prompt.substr(tpl_pos);
            if (!tail.empty() && tail.back() == '.') tail.pop_back();
            nlohmann::json tpl = nlohmann::json::parse(tail);
            Rng rng(hash_combine(hash_string(prompt), seed_));
            const int n = int(tpl.size());
            int top = 10;
            for (const auto& it : tpl) {
                nlohmann::json o;
                o["label"] = it.value("label", "");
                const int h = 20 + int(rng.below(20));
                const int wdt = 60 + int(rng.below(60));
                o["bbox"] = {10, top, 10 + wdt, top + h};
                top += h + 8;
                items.push_back(o);
            }
            (void)n;
        } catch (...) {
            items = nlohmann::json::array();
        }
    }
    return items.dump();
}

Image StubT2IClient::generate(const std::string& prompt, int width, int height, uint64_t seed) {
    Rng rng(hash_combine(hash_string(prompt), seed));
    const double r0 = rng.uniform(0.1, 0.9), g0 = rng.uniform(0.1, 0.9), b0 = rng.uniform(0.1, 0.9);
    const double r1 = rng.uniform(0.1, 0.9), g1 = rng.uniform(0.1, 0.9), b1 = rng.uniform(0.1, 0.9);
    const double angle = rng.uniform(0.0, 6.2831853);
    const double cx = std::cos(angle), sy = std::sin(angle);
    Image img(height, width, 3);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            double t = (cx * x / std::max(1, width - 1) + sy * y / std::max(1, height - 1) + 1.0) / 2.0;
            t = std::min(1.0, std::max(0.0, t));
            img.at(y, x, 0) = r0 + (r1 - r0) * t;
            img.at(y, x, 1) = g0 + (g1 - g0) * t;
            img.at(y, x, 2) = b0 + (b1 - b0) * t;
        }
    return img;
}

Image StubInpainterClient::inpaint(const Image& image, const Region& region) {
    Image out = image;
    const int l = std::max(0, region.left), t = std::max(0, region.top);
    const int r = std::min(image.w, region.right), b = std::min(image.h, region.bottom);
    if (l >= r || t >= b) return out;
    for (int ch = 0; ch < image.c; ++ch) {
        std::vector<double> vals;
        vals.reserve(size_t(b - t) * (r - l));
        for (int y = t; y < b; ++y)
            for (int x = l; x < r; ++x) vals.push_back(image.at(y, x, ch));
        std::nth_element(vals.begin(), vals.begin() + vals.size() / 2, vals.end());
        const double med = vals[vals.size() / 2];
        for (int y = t; y < b; ++y)
            for (int x = l; x < r; ++x) out.at(y, x, ch) = med;
    }
    return out;
}

double StubScorerClient::score(const Image& candidate, const Image& reference) {
    return -image_mse(candidate, reference);
}

double StubExternalScorer::score_pair(const Image& a, const Image& b) {
    return 1.0 / (1.0 + image_mse(a, b));
}

}  // namespace gf::clients
