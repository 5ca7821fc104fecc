// Run manifest: config hash, seed, tool version, per-stage file digests and timings.
#pragma once

#include <openssl/evp.h>

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <string>

#include "core.hpp"

namespace muontag {

inline constexpr const char* kToolVersion = "1.0.0";
inline constexpr int kManifestVersion = 1;

namespace detail {
struct EvpDeleter
{
    void operator()(EVP_MD_CTX* c) const { EVP_MD_CTX_free(c); }
};

class Sha256
{
  public:
    Sha256() : ctx_(EVP_MD_CTX_new())
    {
        if (!ctx_ || EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr) != 1)
            throw Error("cannot initialise SHA-256");
    }
    void update(const void* data, std::size_t n)
    {
        if (EVP_DigestUpdate(ctx_.get(), data, n) != 1) throw Error("SHA-256 update failed");
    }
    std::string hex()
    {
        unsigned char md[EVP_MAX_MD_SIZE];
        unsigned int len = 0;
        if (EVP_DigestFinal_ex(ctx_.get(), md, &len) != 1) throw Error("SHA-256 final failed");
        static const char* digits = "0123456789abcdef";
        std::string out;
        for (unsigned i = 0; i < len; ++i)
        {
            out += digits[md[i] >> 4];
            out += digits[md[i] & 15];
        }
        return out;
    }

  private:
    std::unique_ptr<EVP_MD_CTX, EvpDeleter> ctx_;
};
}  // namespace detail

inline std::string sha256_hex(const std::string& data)
{
    detail::Sha256 h;
    h.update(data.data(), data.size());
    return h.hex();
}

inline std::string sha256_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path + " for hashing");
    detail::Sha256 h;
    std::vector<char> buf(1 << 20);
    while (in)
    {
        in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        h.update(buf.data(), static_cast<std::size_t>(in.gcount()));
    }
    return h.hex();
}

struct StageRecord
{
    std::map<std::string, std::string> inputs;   //!< path -> sha256
    std::map<std::string, std::string> outputs;  //!< path -> sha256
    double wall_s = 0.0;
};

/*!
 * Manifest of one output directory. Each stage replaces its own entry;
 * file paths are stored relative to the manifest directory when possible.
 */
class RunManifest
{
  public:
    std::string config_hash;
    std::uint64_t seed = 0;
    std::string tool_version = kToolVersion;
    std::map<std::string, StageRecord> stages;

    static RunManifest load_or_empty(const std::string& path)
    {
        RunManifest m;
        std::ifstream in(path);
        if (!in) return m;
        try
        {
            auto j = nlohmann::json::parse(in);
            if (j.at("manifest_version").get<int>() != kManifestVersion) return m;
            m.config_hash = j.at("config_hash").get<std::string>();
            m.seed = j.at("seed").get<std::uint64_t>();
            m.tool_version = j.at("tool_version").get<std::string>();
            for (const auto& [name, s] : j.at("stages").items())
            {
                StageRecord r;
                r.inputs = s.at("inputs").get<std::map<std::string, std::string>>();
                r.outputs = s.at("outputs").get<std::map<std::string, std::string>>();
                r.wall_s = s.at("wall_s").get<double>();
                m.stages[name] = r;
            }
        }
        catch (const nlohmann::json::exception& e)
        {
            throw FormatError("malformed manifest " + path + ": " + e.what());
        }
        return m;
    }

    nlohmann::json to_json() const
    {
        nlohmann::json j;
        j["manifest_version"] = kManifestVersion;
        j["config_hash"] = config_hash;
        j["seed"] = seed;
        j["tool_version"] = tool_version;
        nlohmann::json st = nlohmann::json::object();
        for (const auto& [name, s] : stages)
            st[name] = {{"inputs", s.inputs}, {"outputs", s.outputs}, {"wall_s", s.wall_s}};
        j["stages"] = st;
        return j;
    }

    void save(const std::string& path) const
    {
        std::ofstream out(path);
        if (!out) throw Error("cannot write manifest " + path);
        out << to_json().dump(2) << '\n';
    }
};

//! Record `files` with their digests, keyed by path relative to `base`.
inline std::map<std::string, std::string> digest_files(const std::vector<std::string>& files,
                                                       const std::string& base)
{
    std::map<std::string, std::string> out;
    for (const auto& f : files)
    {
        std::string key = f;
        std::error_code ec;
        auto rel = std::filesystem::relative(f, base, ec);
        if (!ec && !rel.empty() && rel.native().rfind("..", 0) != 0) key = rel.string();
        out[key] = sha256_file(f);
    }
    return out;
}

}  // namespace muontag
