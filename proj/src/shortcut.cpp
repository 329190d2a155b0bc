#include "sclab/shortcut.hpp"

#include <cmath>
#include <set>
#include <sstream>

namespace sclab::shortcut {

std::string to_string(Kind k) {
    return k == Kind::Positional ? "positional" : "intensity";
}

Kind kind_from_string(const std::string& s) {
    if (s == "positional") return Kind::Positional;
    if (s == "intensity") return Kind::Intensity;
    throw InvalidConfig("unknown shortcut kind '" + s + "'");
}

Anchor ShortcutSpec::anchor_for(int class_id) const {
    if (kind == Kind::Intensity) return fixed_anchor;
    auto it = anchor_map.find(class_id);
    if (it == anchor_map.end()) throw UnknownClass("no anchor for class " + std::to_string(class_id));
    return it->second;
}

uint8_t ShortcutSpec::value_for(int class_id) const {
    if (kind == Kind::Positional) return fill_value;
    auto it = intensity_map.find(class_id);
    if (it == intensity_map.end())
        throw UnknownClass("no intensity for class " + std::to_string(class_id));
    return it->second;
}

void ShortcutSpec::check_bounds(int height, int width) const {
    auto check = [&](const Anchor& a) {
        if (a.row < 0 || a.col < 0 || a.row + patch_h > height || a.col + patch_w > width)
            throw AnchorOutOfBounds("anchor (" + std::to_string(a.row) + "," +
                                    std::to_string(a.col) + ") with patch " +
                                    std::to_string(patch_h) + "x" + std::to_string(patch_w) +
                                    " exceeds " + std::to_string(height) + "x" +
                                    std::to_string(width));
    };
    if (kind == Kind::Positional)
        for (const auto& [k, a] : anchor_map) check(a);
    else
        check(fixed_anchor);
}

ShortcutSpec default_positional_spec(int num_classes, int height, int width) {
    ShortcutSpec spec;
    spec.kind = Kind::Positional;
    const int ny = 2;
    const int nx = (num_classes + 1) / 2;
    if (num_classes > nx * ny) throw TooManyClasses("grid cannot hold " + std::to_string(num_classes));
    if (height < spec.patch_h || width < spec.patch_w)
        throw AnchorOutOfBounds("image smaller than patch");
    const int row_step = ny > 1 ? (height - spec.patch_h) / (ny - 1) : 0;
    const int col_step = nx > 1 ? (width - spec.patch_w) / (nx - 1) : 0;
    std::set<Anchor> seen;
    for (int k = 0; k < num_classes; ++k) {
        int col_idx = k % nx;
        int row_idx = k / nx;
        Anchor a{row_idx * row_step, col_idx * col_step};
        if (!seen.insert(a).second)
            throw TooManyClasses("anchor grid too dense for " + std::to_string(num_classes) +
                                 " classes on " + std::to_string(height) + "x" +
                                 std::to_string(width));
        spec.anchor_map[k] = a;
    }
    return spec;
}

ShortcutSpec default_intensity_spec(int num_classes) {
    if (num_classes < 2) throw TooManyClasses("intensity shortcut needs at least 2 classes");
    ShortcutSpec spec;
    spec.kind = Kind::Intensity;
    spec.fixed_anchor = {0, 0};
    for (int k = 0; k < num_classes; ++k) {
        double v = 255.0 * (k + 1) / num_classes;
        spec.intensity_map[k] = static_cast<uint8_t>(std::floor(v + 0.5));  // round half-up
    }
    std::set<uint8_t> seen;
    for (const auto& [k, v] : spec.intensity_map)
        if (!seen.insert(v).second)
            throw TooManyClasses("intensity schedule collides for K=" + std::to_string(num_classes));
    return spec;
}

data::Image inject(const data::Image& image, int class_id, const ShortcutSpec& spec) {
    Anchor a = spec.anchor_for(class_id);
    uint8_t value = spec.value_for(class_id);
    if (a.row + spec.patch_h > image.height || a.col + spec.patch_w > image.width)
        throw AnchorOutOfBounds("anchor (" + std::to_string(a.row) + "," + std::to_string(a.col) +
                                ") out of bounds for " + std::to_string(image.height) + "x" +
                                std::to_string(image.width));
    data::Image out = image;
    for (int dy = 0; dy < spec.patch_h; ++dy)
        for (int dx = 0; dx < spec.patch_w; ++dx)
            for (int c = 0; c < image.channels; ++c) out.at(a.row + dy, a.col + dx, c) = value;
    return out;
}

data::Split apply_split(const data::Split& split, const ShortcutSpec& spec) {
    data::validate(split);
    data::Split out;
    out.labels = split.labels;
    out.num_classes = split.num_classes;
    out.name = split.name;
    out.images.reserve(split.images.size());
    for (size_t i = 0; i < split.images.size(); ++i)
        out.images.push_back(inject(split.images[i], split.labels[i], spec));
    return out;
}

std::map<std::string, std::string> to_kv(const ShortcutSpec& spec) {
    std::map<std::string, std::string> kv;
    kv["kind"] = to_string(spec.kind);
    kv["patch_h"] = std::to_string(spec.patch_h);
    kv["patch_w"] = std::to_string(spec.patch_w);
    if (spec.kind == Kind::Positional) {
        kv["fill_value"] = std::to_string(static_cast<int>(spec.fill_value));
        std::ostringstream os;
        bool first = true;
        for (const auto& [k, a] : spec.anchor_map) {
            if (!first) os << ';';
            os << k << ':' << a.row << ',' << a.col;
            first = false;
        }
        kv["anchors"] = os.str();
    } else {
        kv["anchor"] = std::to_string(spec.fixed_anchor.row) + "," +
                       std::to_string(spec.fixed_anchor.col);
        std::ostringstream os;
        bool first = true;
        for (const auto& [k, v] : spec.intensity_map) {
            if (!first) os << ';';
            os << k << ':' << static_cast<int>(v);
            first = false;
        }
        kv["intensities"] = os.str();
    }
    return kv;
}

namespace {

std::vector<std::string> split_on(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

}  // namespace

ShortcutSpec from_kv(const std::map<std::string, std::string>& kv) {
    ShortcutSpec spec;
    auto get = [&](const std::string& key) -> const std::string& {
        auto it = kv.find(key);
        if (it == kv.end()) throw InvalidConfig("shortcut spec missing key '" + key + "'");
        return it->second;
    };
    spec.kind = kind_from_string(get("kind"));
    if (auto it = kv.find("patch_h"); it != kv.end()) spec.patch_h = std::stoi(it->second);
    if (auto it = kv.find("patch_w"); it != kv.end()) spec.patch_w = std::stoi(it->second);
    if (spec.kind == Kind::Positional) {
        if (auto it = kv.find("fill_value"); it != kv.end())
            spec.fill_value = static_cast<uint8_t>(std::stoi(it->second));
        for (const auto& entry : split_on(get("anchors"), ';')) {
            auto kc = split_on(entry, ':');
            auto rc = split_on(kc.at(1), ',');
            spec.anchor_map[std::stoi(kc.at(0))] = Anchor{std::stoi(rc.at(0)), std::stoi(rc.at(1))};
        }
    } else {
        auto rc = split_on(get("anchor"), ',');
        spec.fixed_anchor = Anchor{std::stoi(rc.at(0)), std::stoi(rc.at(1))};
        for (const auto& entry : split_on(get("intensities"), ';')) {
            auto kc = split_on(entry, ':');
            spec.intensity_map[std::stoi(kc.at(0))] = static_cast<uint8_t>(std::stoi(kc.at(1)));
        }
    }
    return spec;
}

}  // namespace sclab::shortcut
