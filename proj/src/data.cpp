#include "sclab/data.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>

namespace sclab::data {

namespace {

uint32_t read_u32_be(std::istream& in, const std::string& what) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (in.gcount() != 4) throw TruncatedFile("short read in " + what);
    return (static_cast<uint32_t>(b[0]) << 24) | (static_cast<uint32_t>(b[1]) << 16) |
           (static_cast<uint32_t>(b[2]) << 8) | static_cast<uint32_t>(b[3]);
}

void write_u32_be(std::ostream& out, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

std::ifstream open_binary(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw TruncatedFile("cannot open " + path);
    return f;
}

}  // namespace

Split load_idx(const std::string& images_path, const std::string& labels_path) {
    auto imf = open_binary(images_path);
    uint32_t magic = read_u32_be(imf, images_path);
    int channels = 1;
    if (magic == 0x00000804u)
        channels = 0;  // read from the 4th dim below
    else if (magic != 0x00000803u)
        throw BadMagic("bad image magic in " + images_path);
    uint32_t count = read_u32_be(imf, images_path);
    uint32_t rows = read_u32_be(imf, images_path);
    uint32_t cols = read_u32_be(imf, images_path);
    if (channels == 0) channels = static_cast<int>(read_u32_be(imf, images_path));
    if (channels < 1 || channels > 4) throw BadMagic("unsupported channel count in " + images_path);

    auto lbf = open_binary(labels_path);
    uint32_t lmagic = read_u32_be(lbf, labels_path);
    if (lmagic != 0x00000801u) throw BadMagic("bad label magic in " + labels_path);
    uint32_t lcount = read_u32_be(lbf, labels_path);
    if (lcount != count)
        throw LengthMismatch(std::to_string(count) + " images vs " + std::to_string(lcount) +
                             " labels");

    Split split;
    split.name = std::filesystem::path(images_path).filename().string();
    split.images.resize(count);
    split.labels.resize(count);
    long per = static_cast<long>(rows) * cols * channels;
    for (uint32_t i = 0; i < count; ++i) {
        auto& im = split.images[i];
        im.height = static_cast<int>(rows);
        im.width = static_cast<int>(cols);
        im.channels = channels;
        im.values.resize(static_cast<size_t>(per));
        imf.read(reinterpret_cast<char*>(im.values.data()), per);
        if (imf.gcount() != per) throw TruncatedFile("truncated pixel data in " + images_path);
    }
    std::vector<uint8_t> raw(count);
    lbf.read(reinterpret_cast<char*>(raw.data()), count);
    if (lbf.gcount() != static_cast<std::streamsize>(count))
        throw TruncatedFile("truncated label data in " + labels_path);
    int max_label = 0;
    for (uint32_t i = 0; i < count; ++i) {
        split.labels[i] = raw[i];
        max_label = std::max(max_label, static_cast<int>(raw[i]));
    }
    split.num_classes = max_label + 1;
    return split;
}

void write_idx(const Split& split, const std::string& images_path,
               const std::string& labels_path) {
    validate(split);
    std::ofstream imf(images_path, std::ios::binary | std::ios::trunc);
    if (!imf) throw DataError("cannot write " + images_path);
    int h = split.images.empty() ? 0 : split.images[0].height;
    int w = split.images.empty() ? 0 : split.images[0].width;
    int c = split.images.empty() ? 1 : split.images[0].channels;
    if (c == 1) {
        write_u32_be(imf, 0x00000803u);
        write_u32_be(imf, static_cast<uint32_t>(split.size()));
        write_u32_be(imf, static_cast<uint32_t>(h));
        write_u32_be(imf, static_cast<uint32_t>(w));
    } else {
        write_u32_be(imf, 0x00000804u);
        write_u32_be(imf, static_cast<uint32_t>(split.size()));
        write_u32_be(imf, static_cast<uint32_t>(h));
        write_u32_be(imf, static_cast<uint32_t>(w));
        write_u32_be(imf, static_cast<uint32_t>(c));
    }
    for (const auto& im : split.images)
        imf.write(reinterpret_cast<const char*>(im.values.data()),
                  static_cast<std::streamsize>(im.values.size()));

    std::ofstream lbf(labels_path, std::ios::binary | std::ios::trunc);
    if (!lbf) throw DataError("cannot write " + labels_path);
    write_u32_be(lbf, 0x00000801u);
    write_u32_be(lbf, static_cast<uint32_t>(split.size()));
    for (int l : split.labels) {
        unsigned char b = static_cast<unsigned char>(l);
        lbf.write(reinterpret_cast<const char*>(&b), 1);
    }
}

Split load_cifar10(const std::vector<std::string>& batch_paths) {
    constexpr int kH = 32, kW = 32, kC = 3;
    constexpr long kRecord = 1 + kH * kW * kC;
    Split split;
    split.num_classes = 10;
    split.name = "cifar10";
    std::vector<uint8_t> rec(kRecord);
    for (const auto& path : batch_paths) {
        auto f = open_binary(path);
        f.seekg(0, std::ios::end);
        long bytes = static_cast<long>(f.tellg());
        f.seekg(0, std::ios::beg);
        if (bytes % kRecord != 0)
            throw TruncatedRecord(path + ": size " + std::to_string(bytes) +
                                  " is not a multiple of " + std::to_string(kRecord));
        long n = bytes / kRecord;
        for (long i = 0; i < n; ++i) {
            f.read(reinterpret_cast<char*>(rec.data()), kRecord);
            if (f.gcount() != kRecord) throw TruncatedRecord("short record in " + path);
            int label = rec[0];
            if (label > 9) throw LabelOutOfRange("cifar label " + std::to_string(label));
            Image im;
            im.height = kH;
            im.width = kW;
            im.channels = kC;
            im.values.resize(static_cast<size_t>(kH) * kW * kC);
            // channel planes -> interleaved HWC
            for (int ch = 0; ch < kC; ++ch) {
                const uint8_t* plane = rec.data() + 1 + static_cast<long>(ch) * kH * kW;
                for (int y = 0; y < kH; ++y)
                    for (int x = 0; x < kW; ++x) im.at(y, x, ch) = plane[y * kW + x];
            }
            split.images.push_back(std::move(im));
            split.labels.push_back(label);
        }
    }
    return split;
}

std::string dataset_root() {
    const char* env = std::getenv("SHORTCUTLAB_DATA");
    if (env && *env) return env;
    return "data";
}

DatasetPaths dataset_paths(const std::string& root, const std::string& dataset_id) {
    DatasetPaths p;
    std::string dir = root + "/" + dataset_id;
    if (dataset_id == "cifar10") {
        p.is_cifar = true;
        for (int i = 1; i <= 5; ++i)
            p.cifar_train_batches.push_back(dir + "/data_batch_" + std::to_string(i) + ".bin");
        p.cifar_test_batches.push_back(dir + "/test_batch.bin");
        return p;
    }
    p.train_images = dir + "/train-images-idx3-ubyte";
    p.train_labels = dir + "/train-labels-idx1-ubyte";
    p.test_images = dir + "/t10k-images-idx3-ubyte";
    p.test_labels = dir + "/t10k-labels-idx1-ubyte";
    return p;
}

Split load_dataset(const std::string& root, const std::string& dataset_id, bool train) {
    auto p = dataset_paths(root, dataset_id);
    Split s;
    if (p.is_cifar)
        s = load_cifar10(train ? p.cifar_train_batches : p.cifar_test_batches);
    else
        s = train ? load_idx(p.train_images, p.train_labels) : load_idx(p.test_images, p.test_labels);
    s.name = dataset_id + (train ? "-train" : "-test");
    validate(s);
    return s;
}

}  // namespace sclab::data
