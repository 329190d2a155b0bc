#include "sclab/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace sclab::config {

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

}  // namespace

KvMap parse(const std::string& text) {
    KvMap kv;
    std::istringstream is(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        auto hash = line.find_first_of("#;");
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw InvalidConfig("line " + std::to_string(lineno) + ": unterminated section");
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw InvalidConfig("line " + std::to_string(lineno) + ": expected key = value");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw InvalidConfig("line " + std::to_string(lineno) + ": empty key");
        kv[section.empty() ? key : section + "." + key] = value;
    }
    return kv;
}

KvMap parse_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot open config " + path);
    std::ostringstream os;
    os << f.rdbuf();
    return parse(os.str());
}

std::string serialize(const KvMap& kv) {
    // group by section; map iteration is already sorted
    std::ostringstream os;
    std::string current_section;
    bool first = true;
    for (const auto& [k, v] : kv) {
        auto dot = k.find('.');
        std::string section = dot == std::string::npos ? "" : k.substr(0, dot);
        std::string key = dot == std::string::npos ? k : k.substr(dot + 1);
        if (section != current_section || first) {
            if (!first) os << '\n';
            if (!section.empty()) os << '[' << section << "]\n";
            current_section = section;
            first = false;
        }
        os << key << " = " << v << '\n';
    }
    return os.str();
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == ',') {
            std::string t = trim(cur);
            if (!t.empty()) out.push_back(t);
            cur.clear();
        } else {
            cur += c;
        }
    }
    std::string t = trim(cur);
    if (!t.empty()) out.push_back(t);
    return out;
}

std::vector<double> parse_double_list(const std::string& s) {
    std::vector<double> out;
    for (const auto& item : split_list(s)) out.push_back(std::stod(item));
    return out;
}

std::vector<uint64_t> parse_u64_list(const std::string& s) {
    std::vector<uint64_t> out;
    for (const auto& item : split_list(s)) out.push_back(std::stoull(item));
    return out;
}

void ExperimentConfig::validate() const {
    if (architectures.empty()) throw InvalidConfig("architecture list is empty");
    if (learning_rates.empty()) throw InvalidConfig("learning-rate list is empty");
    if (seeds.empty()) throw InvalidConfig("seed list is empty");
    std::set<uint64_t> uniq(seeds.begin(), seeds.end());
    if (uniq.size() != seeds.size()) throw InvalidConfig("seeds must be distinct");
    for (double lr : learning_rates)
        if (!(lr > 0)) throw InvalidConfig("learning rates must be positive");
    if (epochs < 1 || batch_size < 1) throw InvalidConfig("epochs and batch size must be >= 1");
    if (train_per_class < 0) throw InvalidConfig("train_per_class must be >= 0");
}

KvMap ExperimentConfig::to_kv() const {
    KvMap kv;
    kv["experiment.dataset"] = dataset;
    kv["experiment.shortcut"] = shortcut_kind;
    std::string archs;
    for (size_t i = 0; i < architectures.size(); ++i) archs += (i ? "," : "") + architectures[i];
    kv["experiment.architectures"] = archs;
    std::ostringstream lrs;
    for (size_t i = 0; i < learning_rates.size(); ++i) lrs << (i ? "," : "") << learning_rates[i];
    kv["experiment.learning_rates"] = lrs.str();
    std::string sds;
    for (size_t i = 0; i < seeds.size(); ++i) sds += (i ? "," : "") + std::to_string(seeds[i]);
    kv["experiment.seeds"] = sds;
    kv["experiment.epochs"] = std::to_string(epochs);
    kv["experiment.batch_size"] = std::to_string(batch_size);
    kv["experiment.train_per_class"] = std::to_string(train_per_class);
    kv["experiment.out"] = out_dir;
    for (const auto& [k, v] : shortcut_overrides) kv["shortcut." + k] = v;
    return kv;
}

ExperimentConfig ExperimentConfig::from_kv(const KvMap& kv) {
    ExperimentConfig c;
    auto opt = [&](const std::string& key) -> const std::string* {
        auto it = kv.find(key);
        return it == kv.end() ? nullptr : &it->second;
    };
    if (auto* v = opt("experiment.dataset")) c.dataset = *v;
    if (auto* v = opt("experiment.shortcut")) c.shortcut_kind = *v;
    if (auto* v = opt("experiment.architectures")) c.architectures = split_list(*v);
    if (auto* v = opt("experiment.learning_rates")) c.learning_rates = parse_double_list(*v);
    if (auto* v = opt("experiment.seeds")) c.seeds = parse_u64_list(*v);
    if (auto* v = opt("experiment.epochs")) c.epochs = std::stoi(*v);
    if (auto* v = opt("experiment.batch_size")) c.batch_size = std::stoi(*v);
    if (auto* v = opt("experiment.train_per_class")) c.train_per_class = std::stoi(*v);
    if (auto* v = opt("experiment.out")) c.out_dir = *v;
    for (const auto& [k, v] : kv)
        if (k.rfind("shortcut.", 0) == 0) c.shortcut_overrides[k.substr(9)] = v;
    c.validate();
    return c;
}

}  // namespace sclab::config
