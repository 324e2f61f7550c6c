#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace vecsketch::manifest {

/// FNV-1a over a file's bytes, hex-encoded.
std::string file_hash(const std::string& path);

/// Per-run record: resolved config (JSON text), its hash, the seed, input
/// file hashes, and output paths. Written next to the primary output.
struct RunManifest {
    std::string command;
    std::string config_json;  // full resolved configuration
    std::uint64_t seed = 0;
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;

    std::string config_hash() const;
    void write(const std::string& path) const;
};

}  // namespace vecsketch::manifest
