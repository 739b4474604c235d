#include "graspkit/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "graspkit/error.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint payload is little-endian; big-endian hosts need byte swaps");

namespace gk {

namespace {
constexpr char kMagic[4] = {'G', 'K', 'C', 'P'};
}

void save_checkpoint(const std::string& path, const NamedParams& params,
                     const std::string& config_hash) {
    nlohmann::json header;
    header["format_version"] = kCheckpointVersion;
    header["config_hash"] = config_hash;
    auto& list = header["params"] = nlohmann::json::array();
    for (const auto& [name, t] : params) {
        list.push_back({{"name", name}, {"shape", t.shape()}});
    }
    const std::string hs = header.dump();

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open checkpoint for writing: " + path);
    out.write(kMagic, 4);
    const uint64_t hlen = hs.size();
    out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
    out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
    for (const auto& [name, t] : params) {
        out.write(reinterpret_cast<const char*>(t.data()),
                  static_cast<std::streamsize>(t.numel() * sizeof(double)));
    }
    if (!out) throw DataError("short write while saving checkpoint: " + path);
}

namespace {

nlohmann::json read_header(std::ifstream& in, const std::string& path) {
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw DataError("not a graspkit checkpoint: " + path);
    uint64_t hlen = 0;
    in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
    if (!in || hlen > (1ull << 30)) throw DataError("corrupt checkpoint header: " + path);
    std::string hs(hlen, '\0');
    in.read(hs.data(), static_cast<std::streamsize>(hlen));
    if (!in) throw DataError("truncated checkpoint header: " + path);
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(hs);
    } catch (const nlohmann::json::exception& e) {
        throw DataError("bad checkpoint header JSON in " + path + ": " + e.what());
    }
    if (header.value("format_version", -1) != kCheckpointVersion)
        throw DataError("unsupported checkpoint format_version in " + path);
    return header;
}

}  // namespace

NamedParams load_checkpoint(const std::string& path, std::string* out_config_hash) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint: " + path);
    const nlohmann::json header = read_header(in, path);
    if (out_config_hash) *out_config_hash = header.value("config_hash", "");
    NamedParams params;
    for (const auto& entry : header.at("params")) {
        const std::string name = entry.at("name").get<std::string>();
        const Shape shape = entry.at("shape").get<Shape>();
        Tensor t = Tensor::zeros(shape);
        in.read(reinterpret_cast<char*>(t.data()),
                static_cast<std::streamsize>(t.numel() * sizeof(double)));
        if (!in) throw DataError("truncated checkpoint payload at '" + name + "' in " + path);
        params.emplace_back(name, std::move(t));
    }
    return params;
}

void load_checkpoint_into(const std::string& path, NamedParams& params,
                          const std::string& expected_config_hash) {
    std::string stored_hash;
    NamedParams loaded = load_checkpoint(path, &stored_hash);
    if (!expected_config_hash.empty() && stored_hash != expected_config_hash)
        throw DataError("checkpoint " + path + " was produced by a different config (hash " +
                        stored_hash + ", expected " + expected_config_hash + ")");
    if (loaded.size() != params.size())
        throw DataError("checkpoint " + path + " has " + std::to_string(loaded.size()) +
                        " params, model wants " + std::to_string(params.size()));
    for (size_t i = 0; i < params.size(); ++i) {
        auto& [name, dst] = params[i];
        auto& [lname, src] = loaded[i];
        if (lname != name)
            throw DataError("checkpoint param order mismatch: '" + lname + "' vs model '" +
                            name + "'");
        if (src.shape() != dst.shape())
            throw DataError("checkpoint param '" + name + "' has shape " +
                            detail::shape_str(src.shape()) + ", model wants " +
                            detail::shape_str(dst.shape()));
        dst.values() = src.values();
    }
}

}  // namespace gk
