#pragma once

#include <map>
#include <string>
#include <vector>

namespace sclab::manifest {

// manifest.json written into every output directory: tool name/version, the
// fully resolved config, and sha256 of each produced file. Keys are sorted,
// so identical runs give identical manifests.
void write(const std::string& dir, const std::map<std::string, std::string>& resolved_config,
           const std::vector<std::string>& output_files);

// Reads back the "outputs" map (file -> sha256) for verification.
std::map<std::string, std::string> read_output_hashes(const std::string& manifest_path);

}  // namespace sclab::manifest
