#include "sclab/image_io.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>

#include "sclab/common.hpp"

namespace sclab::img {

namespace {

void put_u32_be(std::string& out, uint32_t v) {
    out.push_back(static_cast<char>(v >> 24));
    out.push_back(static_cast<char>(v >> 16));
    out.push_back(static_cast<char>(v >> 8));
    out.push_back(static_cast<char>(v));
}

void put_chunk(std::ofstream& f, const char type[4], const std::string& payload) {
    std::string head;
    put_u32_be(head, static_cast<uint32_t>(payload.size()));
    f.write(head.data(), 4);
    std::string body(type, 4);
    body += payload;
    f.write(body.data(), static_cast<std::streamsize>(body.size()));
    uint32_t crc = crc32(0L, reinterpret_cast<const Bytef*>(body.data()),
                         static_cast<uInt>(body.size()));
    std::string tail;
    put_u32_be(tail, crc);
    f.write(tail.data(), 4);
}

}  // namespace

void write_png(const std::string& path, int width, int height, int channels,
               const std::vector<uint8_t>& pixels) {
    if (channels != 1 && channels != 3) throw DataError("png: channels must be 1 or 3");
    if (pixels.size() != static_cast<size_t>(width) * height * channels)
        throw ShapeMismatch("png: pixel buffer size mismatch");
    // raw scanlines with filter byte 0
    std::vector<uint8_t> raw;
    raw.reserve(static_cast<size_t>(height) * (1 + static_cast<size_t>(width) * channels));
    for (int y = 0; y < height; ++y) {
        raw.push_back(0);
        const uint8_t* row = pixels.data() + static_cast<size_t>(y) * width * channels;
        raw.insert(raw.end(), row, row + static_cast<size_t>(width) * channels);
    }
    uLongf bound = compressBound(static_cast<uLong>(raw.size()));
    std::vector<uint8_t> compressed(bound);
    if (compress2(compressed.data(), &bound, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK)
        throw NumericError("png: deflate failed");
    compressed.resize(bound);

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot write " + path);
    static const unsigned char sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    f.write(reinterpret_cast<const char*>(sig), 8);
    std::string ihdr;
    put_u32_be(ihdr, static_cast<uint32_t>(width));
    put_u32_be(ihdr, static_cast<uint32_t>(height));
    ihdr.push_back(8);                                    // bit depth
    ihdr.push_back(channels == 1 ? char(0) : char(2));    // gray / truecolor
    ihdr.push_back(0);
    ihdr.push_back(0);
    ihdr.push_back(0);
    put_chunk(f, "IHDR", ihdr);
    put_chunk(f, "IDAT", std::string(compressed.begin(), compressed.end()));
    put_chunk(f, "IEND", "");
}

void TileGrid::write(const std::string& path) const {
    int out_h = rows * tile_h + (rows + 1) * gap;
    int out_w = cols * tile_w + (cols + 1) * gap;
    std::vector<uint8_t> canvas(static_cast<size_t>(out_h) * out_w * channels, background);
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            const auto& tile = tiles[static_cast<size_t>(r) * cols + c];
            if (tile.empty()) continue;
            if (tile.size() != static_cast<size_t>(tile_h) * tile_w * channels)
                throw ShapeMismatch("tile size mismatch at (" + std::to_string(r) + "," +
                                    std::to_string(c) + ")");
            int y0 = gap + r * (tile_h + gap);
            int x0 = gap + c * (tile_w + gap);
            for (int y = 0; y < tile_h; ++y) {
                uint8_t* dst =
                    canvas.data() + (static_cast<size_t>(y0 + y) * out_w + x0) * channels;
                const uint8_t* src = tile.data() + static_cast<size_t>(y) * tile_w * channels;
                std::memcpy(dst, src, static_cast<size_t>(tile_w) * channels);
            }
        }
    }
    write_png(path, out_w, out_h, channels, canvas);
}

}  // namespace sclab::img
