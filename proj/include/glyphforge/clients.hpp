#ifndef GLYPHFORGE_CLIENTS_HPP
#define GLYPHFORGE_CLIENTS_HPP

#include <memory>
#include <string>
#include <vector>

#include "glyphforge/image.hpp"
#include "glyphforge/rng.hpp"
#include "glyphforge/tensor.hpp"

// External-model client contracts. Every interface ships with a deterministic
// stub so pipelines and tests run closed-loop; remote implementations can be
// substituted via config.
namespace gf::clients {

// ---------------------------------------------------------------------------
// multi-modal encoder client: (image + instruction text) -> dense token matrix

struct MllmRequest {
    Image image;         // may be empty
    std::string prompt;  // instruction text
};

class MllmClient {
public:
    virtual ~MllmClient() = default;
    // Returns [k, d] token matrix (final hidden states). k may vary per input.
    virtual Tensor encode(const MllmRequest& request) = 0;
    virtual int dim() const = 0;
};

// Deterministic stub: tokens are seeded by a hash of the request content, the
// token count varies with the prompt length.
class StubMllmClient : public MllmClient {
public:
    explicit StubMllmClient(int dim, uint64_t seed = 0) : dim_(dim), seed_(seed) {}
    Tensor encode(const MllmRequest& request) override;
    int dim() const override { return dim_; }

private:
    int dim_;
    uint64_t seed_;
};

// Remote HTTP client (POST JSON {prompt, image_b64} -> {tokens: [[..]]}).
class RemoteMllmClient : public MllmClient {
public:
    RemoteMllmClient(std::string host, int port, int dim, int timeout_sec = 5, int retries = 2);
    Tensor encode(const MllmRequest& request) override;
    int dim() const override { return dim_; }

private:
    std::string host_;
    int port_, dim_, timeout_sec_, retries_;
};

// ---------------------------------------------------------------------------
// text-completion client used by the MLLM-backed layout planner

class TextClient {
public:
    virtual ~TextClient() = default;
    virtual std::string complete(const std::string& prompt, const Image* background) = 0;
};

// Stub responding with a syntactically valid layout JSON derived from the
// prompt (or configurable garbage, for protocol-error tests).
class StubTextClient : public TextClient {
public:
    enum class Mode { ValidLayout, Malformed };
    explicit StubTextClient(Mode mode = Mode::ValidLayout, uint64_t seed = 0)
        : mode_(mode), seed_(seed) {}
    std::string complete(const std::string& prompt, const Image* background) override;

private:
    Mode mode_;
    uint64_t seed_;
};

// ---------------------------------------------------------------------------
// text-to-image client

class T2IClient {
public:
    virtual ~T2IClient() = default;
    virtual Image generate(const std::string& prompt, int width, int height, uint64_t seed) = 0;
};

// Seeded procedural gradient background.
class StubT2IClient : public T2IClient {
public:
    Image generate(const std::string& prompt, int width, int height, uint64_t seed) override;
};

// ---------------------------------------------------------------------------
// inpainting client

struct Region {
    int left = 0, top = 0, right = 0, bottom = 0;
};

class InpainterClient {
public:
    virtual ~InpainterClient() = default;
    virtual Image inpaint(const Image& image, const Region& region) = 0;
};

// Median-color fill of the region.
class StubInpainterClient : public InpainterClient {
public:
    Image inpaint(const Image& image, const Region& region) override;
};

// ---------------------------------------------------------------------------
// candidate scorer (aesthetic reward stand-in)

class ScorerClient {
public:
    virtual ~ScorerClient() = default;
    // Higher is better.
    virtual double score(const Image& candidate, const Image& reference) = 0;
};

// Negative MSE against the reference.
class StubScorerClient : public ScorerClient {
public:
    double score(const Image& candidate, const Image& reference) override;
};

// Arbitrary image-list scorer interface for offline metrics backends.
class ExternalScorer {
public:
    virtual ~ExternalScorer() = default;
    virtual double score_pair(const Image& a, const Image& b) = 0;
};

class StubExternalScorer : public ExternalScorer {
public:
    double score_pair(const Image& a, const Image& b) override;
};

// One entry per client call, kept by pipelines for their run reports.
struct CallRecord {
    std::string client;
    std::string detail;
    double latency_ms = 0.0;
};

}  // namespace gf::clients

#endif
