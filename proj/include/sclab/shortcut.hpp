#pragma once

#include <map>
#include <string>
#include <utility>

#include "sclab/data.hpp"

namespace sclab::shortcut {

enum class Kind { Positional, Intensity };

std::string to_string(Kind k);
Kind kind_from_string(const std::string& s);

// Anchor = top-left (row, col) of the written patch.
struct Anchor {
    int row = 0;
    int col = 0;
    bool operator==(const Anchor&) const = default;
    auto operator<=>(const Anchor&) const = default;
};

// Full description of one shortcut family. Positional: every class gets its
// own anchor and the patch is filled with fill_value. Intensity: one shared
// anchor, the patch carries the class's intensity.
struct ShortcutSpec {
    Kind kind = Kind::Positional;
    int patch_h = 4;
    int patch_w = 4;
    std::map<int, Anchor> anchor_map;       // Positional
    Anchor fixed_anchor;                    // Intensity
    std::map<int, uint8_t> intensity_map;   // Intensity
    uint8_t fill_value = 255;               // Positional

    Anchor anchor_for(int class_id) const;
    uint8_t value_for(int class_id) const;
    void check_bounds(int height, int width) const;
};

// Anchors laid out on a 2-row spanning grid, one cell per class.
ShortcutSpec default_positional_spec(int num_classes, int height, int width);

// One corner patch for every class; gray level round(255*(k+1)/K), half-up.
ShortcutSpec default_intensity_spec(int num_classes);

// Copy of `image` with the class's patch written over all channels.
data::Image inject(const data::Image& image, int class_id, const ShortcutSpec& spec);

// Inject every image per its own label; labels and order unchanged.
data::Split apply_split(const data::Split& split, const ShortcutSpec& spec);

// Key-value serialization (used by the config format and manifests).
std::map<std::string, std::string> to_kv(const ShortcutSpec& spec);
ShortcutSpec from_kv(const std::map<std::string, std::string>& kv);

}  // namespace sclab::shortcut
