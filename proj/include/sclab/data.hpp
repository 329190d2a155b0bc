#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sclab/common.hpp"
#include "sclab/tensor.hpp"

namespace sclab::data {

// One image, H x W x C row-major. P is uint8_t in the storage domain
// (raw 0..255 bytes) and float/double in the compute domain ([0,1]).
template <class P>
struct BasicImage {
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<P> values;

    long numel() const { return static_cast<long>(values.size()); }
    P& at(int y, int x, int c) {
        return values[(static_cast<size_t>(y) * width + x) * channels + c];
    }
    const P& at(int y, int x, int c) const {
        return values[(static_cast<size_t>(y) * width + x) * channels + c];
    }
    bool operator==(const BasicImage&) const = default;
};

template <class P>
struct BasicSplit {
    std::vector<BasicImage<P>> images;
    std::vector<int> labels;
    int num_classes = 0;
    std::string name;

    size_t size() const { return images.size(); }
    bool operator==(const BasicSplit&) const = default;
};

using Image = BasicImage<uint8_t>;
using Split = BasicSplit<uint8_t>;

// Throws if the split breaks its invariants (length mismatch, label range,
// inhomogeneous image dims).
template <class P>
void validate(const BasicSplit<P>& s) {
    if (s.images.size() != s.labels.size())
        throw LengthMismatch("split '" + s.name + "': " + std::to_string(s.images.size()) +
                             " images vs " + std::to_string(s.labels.size()) + " labels");
    for (int l : s.labels)
        if (l < 0 || l >= s.num_classes) throw LabelOutOfRange("label " + std::to_string(l));
    for (const auto& im : s.images) {
        if (im.height != s.images[0].height || im.width != s.images[0].width ||
            im.channels != s.images[0].channels)
            throw ShapeMismatch("split '" + s.name + "' has inhomogeneous image dims");
        if (im.numel() != static_cast<long>(im.height) * im.width * im.channels)
            throw ShapeMismatch("image value count does not match dims");
    }
}

// IDX codec. Accepts the classic 3-dim ubyte form (magic 0x00000803) and the
// 4-dim H x W x C extension (0x00000804) used for color datasets converted to
// IDX; labels use 0x00000801. All integers big-endian, pixels row-major.
Split load_idx(const std::string& images_path, const std::string& labels_path);
void write_idx(const Split& split, const std::string& images_path,
               const std::string& labels_path);

// CIFAR-10 binary batches: records of 1 label byte + 3072 pixel bytes stored
// as three 32x32 channel planes; planes are interleaved into H x W x C.
Split load_cifar10(const std::vector<std::string>& batch_paths);

template <class T>
BasicSplit<T> normalize(const Split& s) {
    BasicSplit<T> out;
    out.labels = s.labels;
    out.num_classes = s.num_classes;
    out.name = s.name;
    out.images.reserve(s.images.size());
    for (const auto& im : s.images) {
        BasicImage<T> o;
        o.height = im.height;
        o.width = im.width;
        o.channels = im.channels;
        o.values.resize(im.values.size());
        for (size_t i = 0; i < im.values.size(); ++i)
            o.values[i] = static_cast<T>(im.values[i]) / T(255);
        out.images.push_back(std::move(o));
    }
    return out;
}

// Deterministic class-balanced subset: exactly n_per_class samples of every
// class, chosen by a per-class shuffle seeded from (seed, class), emitted in
// original order.
template <class P>
BasicSplit<P> subsample(const BasicSplit<P>& s, int n_per_class, uint64_t seed) {
    validate(s);
    std::vector<std::vector<int>> by_class(static_cast<size_t>(s.num_classes));
    for (size_t i = 0; i < s.labels.size(); ++i)
        by_class[static_cast<size_t>(s.labels[i])].push_back(static_cast<int>(i));
    std::vector<int> chosen;
    for (int k = 0; k < s.num_classes; ++k) {
        auto& idx = by_class[static_cast<size_t>(k)];
        if (static_cast<int>(idx.size()) < n_per_class)
            throw InsufficientSamples("class " + std::to_string(k) + " has " +
                                      std::to_string(idx.size()) + " samples, need " +
                                      std::to_string(n_per_class));
        Rng rng(mix_seed(seed, static_cast<uint64_t>(k)));
        for (size_t i = idx.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(rng.below(i));
            std::swap(idx[i - 1], idx[j]);
        }
        chosen.insert(chosen.end(), idx.begin(), idx.begin() + n_per_class);
    }
    std::sort(chosen.begin(), chosen.end());
    BasicSplit<P> out;
    out.num_classes = s.num_classes;
    out.name = s.name;
    out.images.reserve(chosen.size());
    for (int i : chosen) {
        out.images.push_back(s.images[static_cast<size_t>(i)]);
        out.labels.push_back(s.labels[static_cast<size_t>(i)]);
    }
    return out;
}

// Stack split images row-major into one (n, h, w, c) tensor.
template <class T>
Tensor<T> stack_images(const BasicSplit<T>& s) {
    if (s.images.empty()) return Tensor<T>({0, 0, 0, 0});
    int h = s.images[0].height, w = s.images[0].width, c = s.images[0].channels;
    Tensor<T> out({static_cast<int>(s.images.size()), h, w, c});
    long per = static_cast<long>(h) * w * c;
    for (size_t i = 0; i < s.images.size(); ++i)
        std::copy(s.images[i].values.begin(), s.images[i].values.end(),
                  out.data() + static_cast<long>(i) * per);
    return out;
}

// Gather a batch (rows of `indices`) into one (n, h, w, c) tensor.
template <class T>
Tensor<T> gather_batch(const BasicSplit<T>& s, const std::vector<int>& indices) {
    int h = s.images[0].height, w = s.images[0].width, c = s.images[0].channels;
    Tensor<T> out({static_cast<int>(indices.size()), h, w, c});
    long per = static_cast<long>(h) * w * c;
    for (size_t i = 0; i < indices.size(); ++i) {
        const auto& im = s.images[static_cast<size_t>(indices[i])];
        std::copy(im.values.begin(), im.values.end(), out.data() + static_cast<long>(i) * per);
    }
    return out;
}

// Dataset root: SHORTCUTLAB_DATA or ./data.
std::string dataset_root();

struct DatasetPaths {
    std::string train_images, train_labels, test_images, test_labels;
    bool is_cifar = false;
    std::vector<std::string> cifar_train_batches, cifar_test_batches;
};

// Layout of known dataset ids under the data root. IDX datasets use the
// MNIST file names (train-images-idx3-ubyte, t10k-images-idx3-ubyte, ...).
DatasetPaths dataset_paths(const std::string& root, const std::string& dataset_id);

// Loads the train or test split of a dataset id from the root directory.
Split load_dataset(const std::string& root, const std::string& dataset_id, bool train);

}  // namespace sclab::data
