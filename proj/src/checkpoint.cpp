#include "glyphforge/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace gf {

namespace {
constexpr char kMagic[8] = {'G', 'F', 'C', 'K', 'P', 'T', '0', '\n'};
}

const Tensor* Checkpoint::find(const std::string& name) const {
    for (const auto& [n, t] : tensors)
        if (n == name) return &t;
    return nullptr;
}

void Checkpoint::restore_into(nn::NamedParams& params) const {
    for (auto& [name, p] : params) {
        const Tensor* src = find(name);
        if (!src) throw IoError("checkpoint missing tensor: " + name);
        if (!same_shape(src->shape(), p.shape()))
            throw IoError("checkpoint shape mismatch for " + name + ": stored " +
                          shape_str(src->shape()) + " vs expected " + shape_str(p.shape()));
        std::memcpy(p.data(), src->data(), size_t(p.numel()) * sizeof(double));
    }
}

void Checkpoint::save(const std::string& path) const {
    nlohmann::json header;
    header["version"] = kVersion;
    header["meta"] = meta;
    auto& list = header["tensors"] = nlohmann::json::array();
    uint64_t offset = 0;
    for (const auto& [name, t] : tensors) {
        list.push_back({{"name", name}, {"shape", t.shape()}, {"offset", offset}});
        offset += uint64_t(t.numel());
    }
    const std::string htext = header.dump();

    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open checkpoint for writing: " + path);
    f.write(kMagic, sizeof(kMagic));
    const uint64_t hlen = htext.size();
    f.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
    f.write(htext.data(), std::streamsize(htext.size()));
    for (const auto& [name, t] : tensors)
        f.write(reinterpret_cast<const char*>(t.data()),
                std::streamsize(size_t(t.numel()) * sizeof(double)));
    if (!f) throw IoError("write failed: " + path);
}

Checkpoint Checkpoint::load(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open checkpoint: " + path);
    char magic[8];
    f.read(magic, sizeof(magic));
    if (!f || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw IoError("not a checkpoint file: " + path);
    uint64_t hlen = 0;
    f.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
    std::string htext(hlen, '\0');
    f.read(htext.data(), std::streamsize(hlen));
    if (!f) throw IoError("truncated checkpoint header: " + path);

    nlohmann::json header = nlohmann::json::parse(htext);
    if (header.at("version").get<uint32_t>() != kVersion)
        throw IoError("unsupported checkpoint version in " + path);

    Checkpoint ck;
    ck.meta = header.value("meta", nlohmann::json::object());
    for (const auto& entry : header.at("tensors")) {
        Shape shape = entry.at("shape").get<Shape>();
        std::vector<double> data(size_t(shape_numel(shape)));
        f.read(reinterpret_cast<char*>(data.data()),
               std::streamsize(data.size() * sizeof(double)));
        if (!f) throw IoError("truncated checkpoint payload: " + path);
        ck.tensors.emplace_back(entry.at("name").get<std::string>(),
                                Tensor::from_vec(shape, std::move(data)));
    }
    return ck;
}

}  // namespace gf
