#pragma once

#include <string>
#include <utility>
#include <vector>

#include "sclab/nn.hpp"
#include "sclab/shortcut.hpp"
#include "sclab/train.hpp"

namespace sclab::invert {

struct GeneratorConfig {
    int latent_dim = 64;
    int class_embed = 16;
    int base_channels = 32;  // channels after the dense reshape
    int mid_channels = 16;   // channels after the first upsample block
    int steps = 1500;
    int batch = 60;
    double learning_rate = 1e-3;
    double lambda_cls = 1.0;
    double lambda_tv = 1e-3;
    double lambda_l2 = 1e-4;
    double lambda_div = 0.1;
    uint64_t seed = 0;

    void validate() const {
        if (latent_dim < 1 || class_embed < 1 || base_channels < 1 || mid_channels < 1)
            throw InvalidConfig("generator widths must be >= 1");
        if (steps < 1 || batch < 1) throw InvalidConfig("steps and batch must be >= 1");
        if (!(lambda_cls > 0)) throw InvalidConfig("lambda_cls must be > 0");
        if (lambda_tv < 0 || lambda_l2 < 0 || lambda_div < 0)
            throw InvalidConfig("loss weights must be >= 0");
    }
};

// Label-conditioned generator: [z | class-embedding] -> dense -> reshape to
// (h/4, w/4, base) -> two nearest-upsample + 3x3 conv blocks -> sigmoid,
// so outputs live in (0,1) for any latent input.
template <class T>
struct Generator {
    GeneratorConfig config;
    int height = 0, width = 0, channels = 0, num_classes = 0;
    std::vector<nn::NamedTensor<T>> params;

    long param_count() const {
        long n = 0;
        for (const auto& p : params) n += p.value.numel();
        return n;
    }
};

template <class T>
Generator<T> build_generator(const GeneratorConfig& cfg, int height, int width, int channels,
                             int num_classes) {
    cfg.validate();
    if (height % 4 || width % 4) throw InvalidConfig("generator needs dims divisible by 4");
    Generator<T> g;
    g.config = cfg;
    g.height = height;
    g.width = width;
    g.channels = channels;
    g.num_classes = num_classes;
    Rng rng(cfg.seed);
    auto& ps = g.params;
    const int h0 = height / 4, w0 = width / 4;
    const int in = cfg.latent_dim + cfg.class_embed;
    nn::detail::add_normal(ps, rng, "cemb", {num_classes, cfg.class_embed}, 0.02);
    nn::detail::add_uniform(ps, rng, "fc.w", {in, h0 * w0 * cfg.base_channels}, in);
    nn::detail::add_zeros(ps, "fc.b", {h0 * w0 * cfg.base_channels});
    nn::detail::add_uniform(ps, rng, "up0.w", {3, 3, cfg.base_channels, cfg.mid_channels},
                            9L * cfg.base_channels);
    nn::detail::add_zeros(ps, "up0.b", {cfg.mid_channels});
    nn::detail::add_uniform(ps, rng, "up1.w", {3, 3, cfg.mid_channels, channels},
                            9L * cfg.mid_channels);
    nn::detail::add_zeros(ps, "up1.b", {channels});
    return g;
}

// Generated images (n, h, w, c) for latent rows z (n, latent) and class ids.
template <class T>
ad::Var<T> generator_graph(ad::Tape<T>& tape, const Generator<T>& gen,
                           const std::vector<ad::Var<T>>& leaves, ad::Var<T> z,
                           const std::vector<int>& class_ids) {
    auto P = [&](const std::string& name) -> const ad::Var<T>& {
        for (size_t i = 0; i < gen.params.size(); ++i)
            if (gen.params[i].name == name) return leaves[i];
        throw InvalidConfig("no generator parameter named " + name);
    };
    const int n = z->value.dim(0);
    const int h0 = gen.height / 4, w0 = gen.width / 4;
    auto emb = ad::embedding_lookup(tape, P("cemb"), class_ids);
    auto zin = ad::concat_lastdim(tape, z, emb);
    auto d = ad::relu(tape, ad::add_bias(tape, ad::matmul(tape, zin, P("fc.w")), P("fc.b")));
    auto x = ad::reshape(tape, d, {n, h0, w0, gen.config.base_channels});
    x = ad::upsample_nearest2x(tape, x);
    x = ad::relu(tape, ad::conv2d_same(tape, x, P("up0.w"), P("up0.b")));
    x = ad::upsample_nearest2x(tape, x);
    x = ad::conv2d_same(tape, x, P("up1.w"), P("up1.b"));
    return ad::sigmoid(tape, x);
}

struct CompositeLossTerms {
    double classification = 0.0;  // mean cross-entropy to the target classes
    double total_variation = 0.0;
    double l2 = 0.0;
    double diversity = 0.0;  // mean same-class pairwise cosine similarity
    double total = 0.0;
};

// Reference (non-graph) computation of the composite loss terms.
template <class T>
CompositeLossTerms composite_loss(const Tensor<T>& logits, const std::vector<int>& targets,
                                  const Tensor<T>& images, const GeneratorConfig& cfg) {
    ad::Tape<T> tape;
    auto lg = tape.leaf(logits, false);
    auto im = tape.leaf(images, false);
    CompositeLossTerms t;
    t.classification = static_cast<double>(ad::softmax_cross_entropy(tape, lg, targets)->value[0]);
    t.total_variation = static_cast<double>(ad::tv_loss(tape, im)->value[0]);
    t.l2 = static_cast<double>(ad::mean_square(tape, im)->value[0]);
    auto flat = ad::reshape(tape, im, {images.dim(0), static_cast<int>(images.numel() / images.dim(0))});
    t.diversity = static_cast<double>(ad::class_cosine_diversity(tape, flat, targets)->value[0]);
    t.total = cfg.lambda_cls * t.classification + cfg.lambda_tv * t.total_variation +
              cfg.lambda_l2 * t.l2 + cfg.lambda_div * t.diversity;
    return t;
}

// Graph version used during generator training.
template <class T>
ad::Var<T> composite_loss_graph(ad::Tape<T>& tape, ad::Var<T> logits,
                                const std::vector<int>& targets, ad::Var<T> images,
                                const GeneratorConfig& cfg) {
    auto ce = ad::softmax_cross_entropy(tape, logits, targets);
    auto tv = ad::tv_loss(tape, images);
    auto l2 = ad::mean_square(tape, images);
    int n = images->value.dim(0);
    auto flat = ad::reshape(tape, images, {n, static_cast<int>(images->value.numel() / n)});
    auto div = ad::class_cosine_diversity(tape, flat, targets);
    return ad::weighted_sum<T>(tape, {{static_cast<T>(cfg.lambda_cls), ce},
                                      {static_cast<T>(cfg.lambda_tv), tv},
                                      {static_cast<T>(cfg.lambda_l2), l2},
                                      {static_cast<T>(cfg.lambda_div), div}});
}

template <class T>
struct GeneratorTraining {
    Generator<T> generator;
    std::vector<double> loss_history;  // composite loss per step
};

// Optimizes the generator against a frozen classifier: batches cycle the
// conditioning classes, latents are drawn from one seeded stream, Adam
// updates only the generator parameters.
template <class T>
GeneratorTraining<T> train_generator(const nn::TrainedModel<T>& classifier, GeneratorConfig cfg) {
    cfg.validate();
    const auto& mc = classifier.config;
    Generator<T> gen = build_generator<T>(cfg, mc.height, mc.width, mc.channels, mc.num_classes);
    Rng zrng(mix_seed(cfg.seed, 0x1A7E17ULL));
    train::Hyperparameters hp;
    hp.learning_rate = cfg.learning_rate;
    auto state = train::AdamState<T>::init(gen.params);
    GeneratorTraining<T> result;
    std::vector<int> classes(static_cast<size_t>(cfg.batch));
    for (int i = 0; i < cfg.batch; ++i) classes[static_cast<size_t>(i)] = i % mc.num_classes;
    for (int step = 0; step < cfg.steps; ++step) {
        Tensor<T> z({cfg.batch, cfg.latent_dim});
        for (long i = 0; i < z.numel(); ++i) z[i] = static_cast<T>(zrng.normal());
        ad::Tape<T> tape;
        auto gleaves = nn::make_leaves(tape, gen.params, true);
        auto cleaves = nn::make_leaves(tape, classifier, false);  // frozen
        auto zv = tape.leaf(std::move(z), false);
        auto images = generator_graph(tape, gen, gleaves, zv, classes);
        auto logits = nn::forward_graph(tape, classifier, cleaves, images);
        auto loss = composite_loss_graph(tape, logits, classes, images, cfg);
        double lval = static_cast<double>(loss->value[0]);
        if (!std::isfinite(lval))
            throw Divergence("non-finite generator loss at step " + std::to_string(step));
        result.loss_history.push_back(lval);
        tape.backward(loss);
        std::vector<Tensor<T>> grads;
        for (auto& leaf : gleaves) {
            if (leaf->grad.v.empty()) leaf->grad = Tensor<T>::zeros(leaf->value.shape);
            grads.push_back(std::move(leaf->grad));
        }
        train::adam_step(gen.params, grads, state, hp);
    }
    result.generator = std::move(gen);
    return result;
}

struct ClassReconstructions {
    int class_id = 0;
    // images: (n, h, w, c) compute-domain
    // confidence[i]: softmax probability of the conditioning class
    // predicted[i]: argmax class
    std::vector<double> confidence;
    std::vector<int> predicted;
};

template <class T>
struct ReconstructionSet {
    int num_classes = 0;
    std::vector<Tensor<T>> images;               // per class (n, h, w, c)
    std::vector<ClassReconstructions> per_class;
};

// n samples conditioned on class_id; deterministic in seed.
template <class T>
void reconstruct_into(ReconstructionSet<T>& out, const Generator<T>& gen,
                      const nn::TrainedModel<T>& classifier, int class_id, int n, uint64_t seed) {
    if (class_id < 0 || class_id >= gen.num_classes)
        throw UnknownClass("class " + std::to_string(class_id));
    ClassReconstructions rec;
    rec.class_id = class_id;
    Tensor<T> images({n, gen.height, gen.width, gen.channels});
    if (n > 0) {
        Rng rng(mix_seed(seed, 0xEC0DE5ULL + static_cast<uint64_t>(class_id)));
        Tensor<T> z({n, gen.config.latent_dim});
        for (long i = 0; i < z.numel(); ++i) z[i] = static_cast<T>(rng.normal());
        std::vector<int> ids(static_cast<size_t>(n), class_id);
        ad::Tape<T> tape;
        auto gleaves = nn::make_leaves(tape, gen.params, false);
        auto zv = tape.leaf(std::move(z), false);
        auto imv = generator_graph(tape, gen, gleaves, zv, ids);
        images = imv->value;
        Tensor<T> logits = nn::forward(classifier, images);
        const int K = classifier.config.num_classes;
        for (int i = 0; i < n; ++i) {
            const T* row = logits.data() + static_cast<long>(i) * K;
            rec.predicted.push_back(train::argmax_lowest_t(row, K));
            double m = static_cast<double>(row[0]);
            for (int j = 1; j < K; ++j) m = std::max(m, static_cast<double>(row[j]));
            double denom = 0.0;
            for (int j = 0; j < K; ++j) denom += std::exp(static_cast<double>(row[j]) - m);
            rec.confidence.push_back(std::exp(static_cast<double>(row[class_id]) - m) / denom);
        }
    }
    out.images.push_back(std::move(images));
    out.per_class.push_back(std::move(rec));
}

template <class T>
ReconstructionSet<T> reconstruct_all(const Generator<T>& gen,
                                     const nn::TrainedModel<T>& classifier, int per_class,
                                     uint64_t seed) {
    ReconstructionSet<T> out;
    out.num_classes = gen.num_classes;
    for (int k = 0; k < gen.num_classes; ++k)
        reconstruct_into(out, gen, classifier, k, per_class, seed);
    return out;
}

// Per-class (mean intensity inside the class's shortcut region) / (mean
// intensity over the whole image), averaged over that class's samples.
template <class T>
std::vector<double> artifact_score(const ReconstructionSet<T>& recs,
                                   const shortcut::ShortcutSpec& spec) {
    std::vector<double> scores;
    for (int k = 0; k < recs.num_classes; ++k) {
        const Tensor<T>& imgs = recs.images[static_cast<size_t>(k)];
        int n = imgs.dim(0), h = imgs.dim(1), w = imgs.dim(2), c = imgs.dim(3);
        shortcut::Anchor a = spec.anchor_for(k);
        if (a.row + spec.patch_h > h || a.col + spec.patch_w > w)
            throw AnchorOutOfBounds("artifact_score: anchor outside reconstruction");
        double acc = 0.0;
        for (int i = 0; i < n; ++i) {
            double region = 0.0, whole = 0.0;
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x)
                    for (int ch = 0; ch < c; ++ch) {
                        double v = static_cast<double>(imgs.at(i, y, x, ch));
                        whole += v;
                        if (y >= a.row && y < a.row + spec.patch_h && x >= a.col &&
                            x < a.col + spec.patch_w)
                            region += v;
                    }
            double region_mean = region / (static_cast<double>(spec.patch_h) * spec.patch_w * c);
            double whole_mean = whole / (static_cast<double>(h) * w * c);
            acc += whole_mean > 0.0 ? region_mean / whole_mean : 0.0;
        }
        scores.push_back(n > 0 ? acc / n : 0.0);
    }
    return scores;
}

}  // namespace sclab::invert
