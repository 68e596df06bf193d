#ifndef GLYPHFORGE_CHECKPOINT_HPP
#define GLYPHFORGE_CHECKPOINT_HPP

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "glyphforge/nn.hpp"
#include "glyphforge/tensor.hpp"

namespace gf {

// Versioned binary container of named double tensors plus a JSON metadata
// blob (model config, latent scaling, training provenance). Save/load is a
// bitwise round trip.
struct Checkpoint {
    static constexpr uint32_t kVersion = 1;

    nlohmann::json meta;
    std::vector<std::pair<std::string, Tensor>> tensors;

    void put(const std::string& name, const Tensor& t) { tensors.emplace_back(name, t); }
    void put_all(const nn::NamedParams& params) {
        for (const auto& [n, t] : params) tensors.emplace_back(n, t);
    }
    const Tensor* find(const std::string& name) const;

    // Copies stored values into the given parameter set; every parameter must
    // be present with a matching shape.
    void restore_into(nn::NamedParams& params) const;

    void save(const std::string& path) const;
    static Checkpoint load(const std::string& path);
};

}  // namespace gf

#endif
