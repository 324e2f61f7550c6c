#include "vecsketch/manifest.hpp"

#include <fstream>

#include "json.hpp"
#include "vecsketch/error.hpp"
#include "vecsketch/params.hpp"

namespace vecsketch::manifest {

std::string file_hash(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCategory::Io, "cannot hash missing file " + path);
    std::string contents((std::istreambuf_iterator<char>(in)),
                         std::istreambuf_iterator<char>());
    return diff::fnv1a_hex(contents);
}

std::string RunManifest::config_hash() const { return diff::fnv1a_hex(config_json); }

void RunManifest::write(const std::string& path) const {
    nlohmann::json doc;
    doc["version"] = 1;
    doc["command"] = command;
    doc["config"] = nlohmann::json::parse(config_json);
    doc["config_hash"] = config_hash();
    doc["seed"] = seed;
    doc["inputs"] = nlohmann::json::array();
    for (const std::string& in : inputs)
        doc["inputs"].push_back({{"path", in}, {"hash", file_hash(in)}});
    doc["outputs"] = outputs;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCategory::Io, "cannot write manifest " + path);
    out << doc.dump(2) << "\n";
}

}  // namespace vecsketch::manifest
