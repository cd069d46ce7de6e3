#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "cellgraph/errors.hpp"

namespace cellgraph {

// FNV-1a over a file's bytes; the cache key and reproducibility checks
// only need a stable, cheap content fingerprint.
inline std::uint64_t fnv1a_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("hash: cannot open: " + path);
    std::uint64_t h = 0xCBF29CE484222325ULL;
    char buf[1 << 14];
    while (is.read(buf, sizeof(buf)) || is.gcount() > 0) {
        for (std::streamsize i = 0; i < is.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001B3ULL;
        }
        if (!is) break;
    }
    return h;
}

inline std::uint64_t fnv1a_string(const std::string& s) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001B3ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i) {
        s[i] = digits[v & 0xF];
        v >>= 4;
    }
    return s;
}

// Every CLI run writes one of these next to its artifacts. The run id is a
// hash of the command line, the resolved configuration and the input
// hashes, so identical runs share an id.
struct RunManifest {
    std::string run_id;
    std::string command_line;
    std::string resolved_config;
    std::map<std::string, std::string> input_hashes;    // path -> hex
    std::vector<std::string> artifacts;
    std::map<std::string, double> timings_sec;          // stage -> wall clock

    void add_input(const std::string& path) { input_hashes[path] = hex64(fnv1a_file(path)); }

    void finalize_run_id() {
        std::string all = command_line + "\n" + resolved_config;
        for (const auto& [path, hash] : input_hashes) all += "\n" + path + "=" + hash;
        run_id = hex64(fnv1a_string(all));
    }

    // Every artifact path must exist by the time the manifest is written.
    void save(const std::string& path) const {
        for (const auto& a : artifacts)
            if (!std::filesystem::exists(a))
                throw FormatError("manifest: artifact does not exist: " + a);
        nlohmann::json j;
        j["run_id"] = run_id;
        j["command_line"] = command_line;
        j["resolved_config"] = resolved_config;
        j["input_hashes"] = input_hashes;
        j["artifacts"] = artifacts;
        j["timings_sec"] = timings_sec;
        std::ofstream os(path);
        if (!os) throw FormatError("manifest: cannot open for writing: " + path);
        os << j.dump(2) << "\n";
        if (!os) throw FormatError("manifest: write failed: " + path);
    }
};

}  // namespace cellgraph
