#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "sclab/common.hpp"

namespace sclab::config {

// Flat key-value config with [section] headers; '#' and ';' start comments.
// Keys flatten to "section.key". Values keep inner whitespace, trimmed ends.
using KvMap = std::map<std::string, std::string>;

KvMap parse(const std::string& text);
KvMap parse_file(const std::string& path);
std::string serialize(const KvMap& kv);  // sections sorted, keys sorted

std::vector<std::string> split_list(const std::string& s);  // comma-separated
std::vector<double> parse_double_list(const std::string& s);
std::vector<uint64_t> parse_u64_list(const std::string& s);

// One sweep / experiment description.
struct ExperimentConfig {
    std::string dataset = "mnist";
    std::string shortcut_kind = "positional";
    KvMap shortcut_overrides;  // keys of shortcut::to_kv
    std::vector<std::string> architectures{"mlp", "cnn", "vit-pe", "vit-nope"};
    std::vector<double> learning_rates{1e-4};
    std::vector<uint64_t> seeds{0, 1, 2};
    int epochs = 5;
    int batch_size = 128;
    int train_per_class = 500;  // 0 = full split
    std::string out_dir = "runs/out";

    void validate() const;
    KvMap to_kv() const;                       // resolved, for manifests
    static ExperimentConfig from_kv(const KvMap& kv);
};

}  // namespace sclab::config
