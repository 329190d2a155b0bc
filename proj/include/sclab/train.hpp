#pragma once

#include <utility>
#include <vector>

#include "sclab/data.hpp"
#include "sclab/nn.hpp"

namespace sclab::train {

enum class Optimizer { Adam, SGD };

struct Hyperparameters {
    double learning_rate = 1e-4;
    int epochs = 5;
    int batch_size = 128;
    Optimizer optimizer = Optimizer::Adam;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    uint64_t seed = 0;

    void validate() const {
        if (!(learning_rate >= 0)) throw InvalidConfig("learning rate must be >= 0");
        if (epochs < 1) throw InvalidConfig("epochs must be >= 1");
        if (batch_size < 1) throw InvalidConfig("batch size must be >= 1");
    }
};

struct TrainHistory {
    std::vector<double> loss;      // per-epoch mean training loss
    std::vector<double> accuracy;  // per-epoch training accuracy
};

template <class T>
struct AdamState {
    long step = 0;
    std::vector<Tensor<T>> m, v;

    static AdamState init(const std::vector<nn::NamedTensor<T>>& params) {
        AdamState s;
        s.m.reserve(params.size());
        s.v.reserve(params.size());
        for (const auto& p : params) {
            s.m.push_back(Tensor<T>::zeros(p.value.shape));
            s.v.push_back(Tensor<T>::zeros(p.value.shape));
        }
        return s;
    }
    static AdamState init(const nn::TrainedModel<T>& model) { return init(model.params); }
};

// Standard Adam update with bias correction; mutates params and state.
template <class T>
void adam_step(std::vector<nn::NamedTensor<T>>& params, const std::vector<Tensor<T>>& grads,
               AdamState<T>& state, const Hyperparameters& hp) {
    if (params.size() != grads.size() || params.size() != state.m.size())
        throw ShapeMismatch("adam_step: parameter/gradient count mismatch");
    state.step += 1;
    const double bc1 = 1.0 - std::pow(hp.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(hp.beta2, static_cast<double>(state.step));
    for (size_t i = 0; i < params.size(); ++i) {
        Tensor<T>& p = params[i].value;
        const Tensor<T>& g = grads[i];
        Tensor<T>& m = state.m[i];
        Tensor<T>& v = state.v[i];
        if (!p.same_shape(g)) throw ShapeMismatch("adam_step: grad shape mismatch");
        for (long j = 0; j < p.numel(); ++j) {
            double gj = static_cast<double>(g[j]);
            double mj = hp.beta1 * static_cast<double>(m[j]) + (1.0 - hp.beta1) * gj;
            double vj = hp.beta2 * static_cast<double>(v[j]) + (1.0 - hp.beta2) * gj * gj;
            m[j] = static_cast<T>(mj);
            v[j] = static_cast<T>(vj);
            double mhat = mj / bc1;
            double vhat = vj / bc2;
            p[j] = static_cast<T>(static_cast<double>(p[j]) -
                                  hp.learning_rate * mhat / (std::sqrt(vhat) + hp.epsilon));
        }
    }
}

template <class T>
void sgd_step(std::vector<nn::NamedTensor<T>>& params, const std::vector<Tensor<T>>& grads,
              const Hyperparameters& hp) {
    if (params.size() != grads.size()) throw ShapeMismatch("sgd_step: count mismatch");
    for (size_t i = 0; i < params.size(); ++i) {
        Tensor<T>& p = params[i].value;
        const Tensor<T>& g = grads[i];
        for (long j = 0; j < p.numel(); ++j)
            p[j] = static_cast<T>(static_cast<double>(p[j]) -
                                  hp.learning_rate * static_cast<double>(g[j]));
    }
}

// Fisher-Yates permutation of [0, n), deterministic in (seed, epoch).
inline std::vector<int> epoch_order(int n, uint64_t seed, int epoch) {
    std::vector<int> order(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;
    Rng rng(mix_seed(seed, 0x5B05E5ULL + static_cast<uint64_t>(epoch)));
    for (size_t i = order.size(); i > 1; --i) {
        size_t j = static_cast<size_t>(rng.below(i));
        std::swap(order[i - 1], order[j]);
    }
    return order;
}

inline int argmax_lowest(const float* row, int k) {
    int best = 0;
    for (int j = 1; j < k; ++j)
        if (row[j] > row[best]) best = j;
    return best;
}

template <class T>
int argmax_lowest_t(const T* row, int k) {
    int best = 0;
    for (int j = 1; j < k; ++j)
        if (row[j] > row[best]) best = j;
    return best;
}

// Mini-batch training. Shuffles once per epoch (deterministic in hp.seed),
// walks batches in order, and aborts on a non-finite loss.
template <class T>
std::pair<nn::TrainedModel<T>, TrainHistory> train(nn::TrainedModel<T> model,
                                                   const data::BasicSplit<T>& split,
                                                   const Hyperparameters& hp) {
    hp.validate();
    data::validate(split);
    if (split.images.empty()) throw InsufficientSamples("training split is empty");
    const int n = static_cast<int>(split.size());
    const int K = model.config.num_classes;
    AdamState<T> state = AdamState<T>::init(model);
    TrainHistory history;
    for (int epoch = 0; epoch < hp.epochs; ++epoch) {
        auto order = epoch_order(n, hp.seed, epoch);
        double loss_sum = 0.0;
        long correct = 0;
        for (int start = 0; start < n; start += hp.batch_size) {
            int bs = std::min(hp.batch_size, n - start);
            std::vector<int> idx(order.begin() + start, order.begin() + start + bs);
            Tensor<T> batch = data::gather_batch(split, idx);
            std::vector<int> labels(static_cast<size_t>(bs));
            for (int i = 0; i < bs; ++i)
                labels[static_cast<size_t>(i)] = split.labels[static_cast<size_t>(idx[static_cast<size_t>(i)])];

            ad::Tape<T> tape;
            auto leaves = nn::make_leaves(tape, model, true);
            auto x = tape.leaf(std::move(batch), false);
            auto logits = nn::forward_graph(tape, model, leaves, x);
            auto loss = ad::softmax_cross_entropy(tape, logits, labels);
            double lval = static_cast<double>(loss->value[0]);
            if (!std::isfinite(lval))
                throw Divergence("non-finite training loss at epoch " + std::to_string(epoch));
            tape.backward(loss);
            for (int i = 0; i < bs; ++i) {
                const T* row = logits->value.data() + static_cast<long>(i) * K;
                if (argmax_lowest_t(row, K) == labels[static_cast<size_t>(i)]) ++correct;
            }
            loss_sum += lval * bs;

            std::vector<Tensor<T>> grads;
            grads.reserve(leaves.size());
            for (auto& leaf : leaves) {
                if (leaf->grad.v.empty()) leaf->grad = Tensor<T>::zeros(leaf->value.shape);
                grads.push_back(std::move(leaf->grad));
            }
            if (hp.optimizer == Optimizer::Adam)
                adam_step(model.params, grads, state, hp);
            else
                sgd_step(model.params, grads, hp);
        }
        history.loss.push_back(loss_sum / n);
        history.accuracy.push_back(static_cast<double>(correct) / n);
    }
    if (!model.all_finite()) throw Divergence("non-finite parameters after training");
    return {std::move(model), std::move(history)};
}

}  // namespace sclab::train
