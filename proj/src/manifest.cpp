#include "sclab/manifest.hpp"

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "sclab/common.hpp"
#include "sclab/sha256.hpp"

namespace sclab::manifest {

void write(const std::string& dir, const std::map<std::string, std::string>& resolved_config,
           const std::vector<std::string>& output_files) {
    nlohmann::json j;
    j["tool"] = "shortcutlab";
    j["version"] = kVersion;
    j["config"] = resolved_config;
    nlohmann::json outputs = nlohmann::json::object();
    for (const auto& f : output_files) {
        std::string full = dir + "/" + f;
        outputs[f] = Sha256::of_file(full);
    }
    j["outputs"] = outputs;
    std::string tmp = dir + "/manifest.json.tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out) throw DataError("cannot write " + tmp);
        out << j.dump(2) << '\n';
    }
    std::filesystem::rename(tmp, dir + "/manifest.json");
}

std::map<std::string, std::string> read_output_hashes(const std::string& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) throw DataError("cannot open " + manifest_path);
    nlohmann::json j;
    in >> j;
    std::map<std::string, std::string> out;
    for (auto& [k, v] : j.at("outputs").items()) out[k] = v.get<std::string>();
    return out;
}

}  // namespace sclab::manifest
