#pragma once

#include <string>
#include <utility>
#include <vector>

#include "sclab/autodiff.hpp"
#include "sclab/common.hpp"
#include "sclab/tensor.hpp"

namespace sclab::nn {

enum class Arch { MLP, CNN, ViTPE, ViTNoPE };

inline std::string to_string(Arch a) {
    switch (a) {
        case Arch::MLP: return "mlp";
        case Arch::CNN: return "cnn";
        case Arch::ViTPE: return "vit-pe";
        case Arch::ViTNoPE: return "vit-nope";
    }
    return "?";
}

inline Arch arch_from_string(const std::string& s) {
    if (s == "mlp") return Arch::MLP;
    if (s == "cnn") return Arch::CNN;
    if (s == "vit-pe") return Arch::ViTPE;
    if (s == "vit-nope") return Arch::ViTNoPE;
    throw InvalidConfig("unknown architecture '" + s + "'");
}

struct ModelConfig {
    Arch arch = Arch::MLP;
    int height = 28, width = 28, channels = 1;
    int num_classes = 10;
    // MLP
    std::vector<int> mlp_hidden{512, 512};
    // CNN: 3x3 same-padded conv channels, each followed by ReLU + 2x2 maxpool
    std::vector<int> cnn_channels{32, 64};
    int cnn_dense = 128;
    // ViT
    int patch = 4, embed = 64, depth = 4, heads = 4, mlp_ratio = 2;
    uint64_t seed = 0;

    bool is_vit() const { return arch == Arch::ViTPE || arch == Arch::ViTNoPE; }
    int tokens() const { return (height / patch) * (width / patch); }

    void validate() const {
        if (height < 1 || width < 1 || (channels != 1 && channels != 3))
            throw InvalidConfig("bad input dims");
        if (num_classes < 2) throw InvalidConfig("need at least 2 classes");
        if (arch == Arch::MLP) {
            for (int h : mlp_hidden)
                if (h < 1) throw InvalidConfig("mlp hidden width < 1");
        } else if (arch == Arch::CNN) {
            for (int c : cnn_channels)
                if (c < 1) throw InvalidConfig("conv channels < 1");
            int h = height, w = width;
            for (size_t i = 0; i < cnn_channels.size(); ++i) {
                if (h % 2 || w % 2) throw InvalidConfig("cnn spatial dims must halve evenly");
                h /= 2;
                w /= 2;
            }
            if (cnn_dense < 1) throw InvalidConfig("cnn dense width < 1");
        } else {
            if (patch < 1 || embed < 1 || depth < 1 || heads < 1 || mlp_ratio < 1)
                throw InvalidConfig("vit hyperparameters must be >= 1");
            if (height % patch || width % patch)
                throw InvalidConfig("image dims must be divisible by patch size");
            if (embed % heads) throw InvalidConfig("embed dim must be divisible by heads");
        }
    }
};

template <class T>
struct NamedTensor {
    std::string name;
    Tensor<T> value;
};

template <class T>
struct TrainedModel {
    ModelConfig config;
    std::vector<NamedTensor<T>> params;

    long param_count() const {
        long n = 0;
        for (const auto& p : params) n += p.value.numel();
        return n;
    }

    const Tensor<T>* find(const std::string& name) const {
        for (const auto& p : params)
            if (p.name == name) return &p.value;
        return nullptr;
    }

    bool all_finite() const {
        for (const auto& p : params)
            if (!p.value.all_finite()) return false;
        return true;
    }
};

namespace detail {

template <class T>
void add_uniform(std::vector<NamedTensor<T>>& ps, Rng& rng, const std::string& name,
                 std::vector<int> shape, long fan_in) {
    Tensor<T> t(std::move(shape));
    double a = std::sqrt(1.0 / static_cast<double>(fan_in));
    for (long i = 0; i < t.numel(); ++i) t[i] = static_cast<T>(rng.uniform(-a, a));
    ps.push_back({name, std::move(t)});
}

template <class T>
void add_zeros(std::vector<NamedTensor<T>>& ps, const std::string& name, std::vector<int> shape) {
    ps.push_back({name, Tensor<T>::zeros(std::move(shape))});
}

template <class T>
void add_ones(std::vector<NamedTensor<T>>& ps, const std::string& name, std::vector<int> shape) {
    ps.push_back({name, Tensor<T>::full(std::move(shape), T(1))});
}

template <class T>
void add_normal(std::vector<NamedTensor<T>>& ps, Rng& rng, const std::string& name,
                std::vector<int> shape, double sigma) {
    Tensor<T> t(std::move(shape));
    for (long i = 0; i < t.numel(); ++i) t[i] = static_cast<T>(rng.normal(0.0, sigma));
    ps.push_back({name, std::move(t)});
}

}  // namespace detail

// Deterministic initialization: weights uniform(-a, a) with a = sqrt(1/fan_in),
// biases zero, class token and positional embeddings normal(0, 0.02). Random
// draws happen in declaration order from one seeded stream, so equal
// (config, seed) pairs produce bit-identical parameters.
template <class T>
TrainedModel<T> build(const ModelConfig& config) {
    config.validate();
    TrainedModel<T> m;
    m.config = config;
    Rng rng(config.seed);
    auto& ps = m.params;
    const int flat = config.height * config.width * config.channels;
    switch (config.arch) {
        case Arch::MLP: {
            int in = flat;
            for (size_t i = 0; i < config.mlp_hidden.size(); ++i) {
                int out = config.mlp_hidden[i];
                detail::add_uniform(ps, rng, "fc" + std::to_string(i) + ".w", {in, out}, in);
                detail::add_zeros(ps, "fc" + std::to_string(i) + ".b", {out});
                in = out;
            }
            size_t last = config.mlp_hidden.size();
            detail::add_uniform(ps, rng, "fc" + std::to_string(last) + ".w",
                                {in, config.num_classes}, in);
            detail::add_zeros(ps, "fc" + std::to_string(last) + ".b", {config.num_classes});
            break;
        }
        case Arch::CNN: {
            int in_c = config.channels;
            int h = config.height, w = config.width;
            for (size_t i = 0; i < config.cnn_channels.size(); ++i) {
                int oc = config.cnn_channels[i];
                detail::add_uniform(ps, rng, "conv" + std::to_string(i) + ".w", {3, 3, in_c, oc},
                                    9L * in_c);
                detail::add_zeros(ps, "conv" + std::to_string(i) + ".b", {oc});
                in_c = oc;
                h /= 2;
                w /= 2;
            }
            int flat_conv = h * w * in_c;
            detail::add_uniform(ps, rng, "fc0.w", {flat_conv, config.cnn_dense}, flat_conv);
            detail::add_zeros(ps, "fc0.b", {config.cnn_dense});
            detail::add_uniform(ps, rng, "fc1.w", {config.cnn_dense, config.num_classes},
                                config.cnn_dense);
            detail::add_zeros(ps, "fc1.b", {config.num_classes});
            break;
        }
        case Arch::ViTPE:
        case Arch::ViTNoPE: {
            const int pd = config.patch * config.patch * config.channels;
            const int e = config.embed;
            detail::add_uniform(ps, rng, "patch.w", {pd, e}, pd);
            detail::add_zeros(ps, "patch.b", {e});
            detail::add_normal(ps, rng, "cls", {e}, 0.02);
            if (config.arch == Arch::ViTPE)
                detail::add_normal(ps, rng, "pos", {config.tokens() + 1, e}, 0.02);
            for (int d = 0; d < config.depth; ++d) {
                std::string b = "blk" + std::to_string(d) + ".";
                detail::add_ones(ps, b + "ln1.g", {e});
                detail::add_zeros(ps, b + "ln1.b", {e});
                for (const char* nm : {"wq", "wk", "wv", "wo"}) {
                    detail::add_uniform(ps, rng, b + "attn." + nm, {e, e}, e);
                    detail::add_zeros(ps, b + "attn.b" + std::string(1, nm[1]), {e});
                }
                detail::add_ones(ps, b + "ln2.g", {e});
                detail::add_zeros(ps, b + "ln2.b", {e});
                detail::add_uniform(ps, rng, b + "mlp.w1", {e, config.mlp_ratio * e}, e);
                detail::add_zeros(ps, b + "mlp.b1", {config.mlp_ratio * e});
                detail::add_uniform(ps, rng, b + "mlp.w2", {config.mlp_ratio * e, e},
                                    config.mlp_ratio * e);
                detail::add_zeros(ps, b + "mlp.b2", {e});
            }
            detail::add_ones(ps, "ln_f.g", {e});
            detail::add_zeros(ps, "ln_f.b", {e});
            detail::add_uniform(ps, rng, "head.w", {e, config.num_classes}, e);
            detail::add_zeros(ps, "head.b", {config.num_classes});
            break;
        }
    }
    return m;
}

// Parameter leaves for one forward pass, in declaration order.
template <class T>
std::vector<ad::Var<T>> make_leaves(ad::Tape<T>& tape, const std::vector<NamedTensor<T>>& params,
                                    bool requires_grad) {
    std::vector<ad::Var<T>> vars;
    vars.reserve(params.size());
    for (const auto& p : params) vars.push_back(tape.leaf(p.value, requires_grad));
    return vars;
}

template <class T>
std::vector<ad::Var<T>> make_leaves(ad::Tape<T>& tape, const TrainedModel<T>& model,
                                    bool requires_grad) {
    return make_leaves(tape, model.params, requires_grad);
}

namespace detail {

template <class T>
class LeafLookup {
public:
    LeafLookup(const TrainedModel<T>& m, const std::vector<ad::Var<T>>& vars)
        : model_(m), vars_(vars) {}
    const ad::Var<T>& operator()(const std::string& name) const {
        for (size_t i = 0; i < model_.params.size(); ++i)
            if (model_.params[i].name == name) return vars_[i];
        throw InvalidConfig("no parameter named " + name);
    }

private:
    const TrainedModel<T>& model_;
    const std::vector<ad::Var<T>>& vars_;
};

template <class T>
ad::Var<T> linear(ad::Tape<T>& tape, ad::Var<T> x, ad::Var<T> w, ad::Var<T> b) {
    return ad::add_bias(tape, ad::matmul(tape, x, w), b);
}

template <class T>
ad::Var<T> vit_block(ad::Tape<T>& tape, ad::Var<T> x, const LeafLookup<T>& P, const std::string& b,
                     int n, int t, int e, int heads) {
    const int dh = e / heads;
    auto y = ad::layernorm(tape, x, P(b + "ln1.g"), P(b + "ln1.b"));
    auto y2 = ad::reshape(tape, y, {n * t, e});
    auto split_heads = [&](ad::Var<T> v) {
        auto r = ad::reshape(tape, v, {n, t, heads, dh});
        auto p = ad::permute(tape, r, {0, 2, 1, 3});
        return ad::reshape(tape, p, {n * heads, t, dh});
    };
    auto q = split_heads(linear(tape, y2, P(b + "attn.wq"), P(b + "attn.bq")));
    auto k = split_heads(linear(tape, y2, P(b + "attn.wk"), P(b + "attn.bk")));
    auto v = split_heads(linear(tape, y2, P(b + "attn.wv"), P(b + "attn.bv")));
    auto scores = ad::scale(tape, ad::bmm_nt(tape, q, k),
                            static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh))));
    auto att = ad::softmax_lastdim(tape, scores, /*invariant=*/true);
    auto ctx = ad::bmm_nn_invariant(tape, att, v);
    auto merged = ad::reshape(
        tape, ad::permute(tape, ad::reshape(tape, ctx, {n, heads, t, dh}), {0, 2, 1, 3}),
        {n * t, e});
    auto proj = linear(tape, merged, P(b + "attn.wo"), P(b + "attn.bo"));
    x = ad::add(tape, x, ad::reshape(tape, proj, {n, t, e}));

    auto z = ad::layernorm(tape, x, P(b + "ln2.g"), P(b + "ln2.b"));
    auto z2 = ad::reshape(tape, z, {n * t, e});
    auto h1 = ad::gelu(tape, linear(tape, z2, P(b + "mlp.w1"), P(b + "mlp.b1")));
    auto h2 = linear(tape, h1, P(b + "mlp.w2"), P(b + "mlp.b2"));
    return ad::add(tape, x, ad::reshape(tape, h2, {n, t, e}));
}

}  // namespace detail

// Builds the architecture's graph on `tape`. `batch` is (n, h, w, c) in the
// compute domain; returns the logits node (n, K).
template <class T>
ad::Var<T> forward_graph(ad::Tape<T>& tape, const TrainedModel<T>& model,
                         const std::vector<ad::Var<T>>& leaves, ad::Var<T> batch) {
    const ModelConfig& cfg = model.config;
    if (batch->value.ndim() != 4 || batch->value.dim(1) != cfg.height ||
        batch->value.dim(2) != cfg.width || batch->value.dim(3) != cfg.channels)
        throw ShapeMismatch("batch " + batch->value.shape_str() + " does not match model input");
    detail::LeafLookup<T> P(model, leaves);
    const int n = batch->value.dim(0);
    switch (cfg.arch) {
        case Arch::MLP: {
            auto x = ad::reshape(tape, batch, {n, cfg.height * cfg.width * cfg.channels});
            for (size_t i = 0; i < cfg.mlp_hidden.size(); ++i) {
                x = detail::linear(tape, x, P("fc" + std::to_string(i) + ".w"),
                                   P("fc" + std::to_string(i) + ".b"));
                x = ad::relu(tape, x);
            }
            size_t last = cfg.mlp_hidden.size();
            return detail::linear(tape, x, P("fc" + std::to_string(last) + ".w"),
                                  P("fc" + std::to_string(last) + ".b"));
        }
        case Arch::CNN: {
            auto x = batch;
            int h = cfg.height, w = cfg.width, c = cfg.channels;
            for (size_t i = 0; i < cfg.cnn_channels.size(); ++i) {
                x = ad::conv2d_same(tape, x, P("conv" + std::to_string(i) + ".w"),
                                    P("conv" + std::to_string(i) + ".b"));
                x = ad::relu(tape, x);
                x = ad::maxpool2x2(tape, x);
                h /= 2;
                w /= 2;
                c = cfg.cnn_channels[i];
            }
            auto flat = ad::reshape(tape, x, {n, h * w * c});
            auto d = ad::relu(tape, detail::linear(tape, flat, P("fc0.w"), P("fc0.b")));
            return detail::linear(tape, d, P("fc1.w"), P("fc1.b"));
        }
        case Arch::ViTPE:
        case Arch::ViTNoPE: {
            const int t = cfg.tokens();
            const int e = cfg.embed;
            const int pd = cfg.patch * cfg.patch * cfg.channels;
            auto patches = ad::patchify(tape, batch, cfg.patch);
            auto emb2 = detail::linear(tape, ad::reshape(tape, patches, {n * t, pd}), P("patch.w"),
                                       P("patch.b"));
            auto x = ad::prepend_token(tape, ad::reshape(tape, emb2, {n, t, e}), P("cls"));
            if (cfg.arch == Arch::ViTPE) x = ad::add_broadcast0(tape, x, P("pos"));
            for (int d = 0; d < cfg.depth; ++d)
                x = detail::vit_block(tape, x, P, "blk" + std::to_string(d) + ".", n, t + 1, e,
                                      cfg.heads);
            auto xf = ad::layernorm(tape, x, P("ln_f.g"), P("ln_f.b"));
            auto cls = ad::take_token0(tape, xf);
            return detail::linear(tape, cls, P("head.w"), P("head.b"));
        }
    }
    throw InvalidConfig("unknown architecture");
}

// Plain forward: logits for a compute-domain batch (n, h, w, c).
template <class T>
Tensor<T> forward(const TrainedModel<T>& model, const Tensor<T>& batch) {
    ad::Tape<T> tape;
    auto leaves = make_leaves(tape, model, /*requires_grad=*/false);
    auto x = tape.leaf(batch, false);
    return forward_graph(tape, model, leaves, x)->value;
}

// Mean softmax cross-entropy and exact parameter gradients, in params order.
template <class T>
std::pair<T, std::vector<Tensor<T>>> backward(const TrainedModel<T>& model, const Tensor<T>& batch,
                                              const std::vector<int>& labels) {
    ad::Tape<T> tape;
    auto leaves = make_leaves(tape, model, /*requires_grad=*/true);
    auto x = tape.leaf(batch, false);
    auto logits = forward_graph(tape, model, leaves, x);
    auto loss = ad::softmax_cross_entropy(tape, logits, labels);
    tape.backward(loss);
    std::vector<Tensor<T>> grads;
    grads.reserve(leaves.size());
    for (auto& leaf : leaves) {
        if (leaf->grad.v.empty()) leaf->grad = Tensor<T>::zeros(leaf->value.shape);
        grads.push_back(std::move(leaf->grad));
    }
    return {loss->value[0], std::move(grads)};
}

}  // namespace sclab::nn
