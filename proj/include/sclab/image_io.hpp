#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sclab/tensor.hpp"

namespace sclab::img {

// 8-bit PNG writer (zlib-compressed at a fixed level, so output bytes are
// deterministic). channels: 1 = grayscale, 3 = RGB. Pixels row-major.
void write_png(const std::string& path, int width, int height, int channels,
               const std::vector<uint8_t>& pixels);

// Quantize one compute-domain image (h, w, c) slice from a (n, h, w, c)
// tensor into 0..255 bytes.
template <class T>
std::vector<uint8_t> quantize(const Tensor<T>& images, int index) {
    int h = images.dim(1), w = images.dim(2), c = images.dim(3);
    long per = static_cast<long>(h) * w * c;
    std::vector<uint8_t> out(static_cast<size_t>(per));
    const T* src = images.data() + static_cast<long>(index) * per;
    for (long i = 0; i < per; ++i) {
        double v = static_cast<double>(src[i]) * 255.0;
        v = v < 0.0 ? 0.0 : (v > 255.0 ? 255.0 : v);
        out[static_cast<size_t>(i)] = static_cast<uint8_t>(v + 0.5);
    }
    return out;
}

// Tile grid assembled row-major with a 2px separator; each tile is an
// (h, w, c) byte image. Missing tiles stay at the background value.
struct TileGrid {
    int rows = 0, cols = 0;
    int tile_h = 0, tile_w = 0, channels = 1;
    int gap = 2;
    uint8_t background = 64;
    std::vector<std::vector<uint8_t>> tiles;  // rows*cols entries, may be empty

    void write(const std::string& path) const;
};

}  // namespace sclab::img
