#pragma once

#include <Eigen/Core>
#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <memory>
#include <utility>
#include <vector>

#include "sclab/tensor.hpp"

// Reverse-mode autodiff over Tensor<T>. A Tape owns the nodes of one forward
// pass in construction order; backward() walks that order in reverse. All ops
// are single-threaded and iterate in fixed order, so repeated runs are
// bit-identical. Token-axis reductions in attention use
// permutation_invariant_sum so that reordering tokens cannot change results.
namespace sclab::ad {

template <class T>
struct Node {
    Tensor<T> value;
    Tensor<T> grad;  // allocated on first accumulation
    bool needs_grad = false;
    std::vector<std::shared_ptr<Node<T>>> parents;
    std::function<void(Node<T>&)> backward;
};

template <class T>
using Var = std::shared_ptr<Node<T>>;

template <class T>
void accum_init(const Var<T>& n) {
    if (n->grad.v.empty()) n->grad = Tensor<T>::zeros(n->value.shape);
}

template <class T>
class Tape {
public:
    Var<T> leaf(Tensor<T> val, bool requires_grad) {
        auto n = std::make_shared<Node<T>>();
        n->value = std::move(val);
        n->needs_grad = requires_grad;
        nodes_.push_back(n);
        return n;
    }

    Var<T> make(Tensor<T> val, std::vector<Var<T>> parents, std::function<void(Node<T>&)> bw) {
        auto n = std::make_shared<Node<T>>();
        n->value = std::move(val);
        n->parents = std::move(parents);
        for (const auto& p : n->parents) n->needs_grad = n->needs_grad || p->needs_grad;
        if (n->needs_grad) n->backward = std::move(bw);
        nodes_.push_back(n);
        return n;
    }

    void backward(const Var<T>& root) {
        if (root->value.numel() != 1) throw ShapeMismatch("backward root must be scalar");
        accum_init(root);
        root->grad[0] = T(1);
        for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
            Node<T>& n = **it;
            if (!n.needs_grad || !n.backward || n.grad.v.empty()) continue;
            n.backward(n);
        }
    }

    size_t size() const { return nodes_.size(); }
    void clear() { nodes_.clear(); }

private:
    std::vector<Var<T>> nodes_;
};

namespace detail {

template <class T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MapM = Eigen::Map<Mat<T>>;
template <class T>
using CMapM = Eigen::Map<const Mat<T>>;

template <class T>
CMapM<T> as_mat(const Tensor<T>& t, long rows, long cols) {
    return CMapM<T>(t.data(), rows, cols);
}
template <class T>
MapM<T> as_mat(Tensor<T>& t, long rows, long cols) {
    return MapM<T>(t.data(), rows, cols);
}

}  // namespace detail

// ---- elementwise ----

template <class T>
Var<T> add(Tape<T>& tape, Var<T> a, Var<T> b) {
    if (!a->value.same_shape(b->value))
        throw ShapeMismatch("add: " + a->value.shape_str() + " vs " + b->value.shape_str());
    Tensor<T> out = a->value + b->value;
    return tape.make(std::move(out), {a, b}, [a, b](Node<T>& self) {
        if (a->needs_grad) {
            accum_init(a);
            for (long i = 0; i < self.grad.numel(); ++i) a->grad[i] += self.grad[i];
        }
        if (b->needs_grad) {
            accum_init(b);
            for (long i = 0; i < self.grad.numel(); ++i) b->grad[i] += self.grad[i];
        }
    });
}

template <class T>
Var<T> mul(Tape<T>& tape, Var<T> a, Var<T> b) {
    if (!a->value.same_shape(b->value)) throw ShapeMismatch("mul: shape mismatch");
    Tensor<T> out = a->value;
    for (long i = 0; i < out.numel(); ++i) out[i] *= b->value[i];
    return tape.make(std::move(out), {a, b}, [a, b](Node<T>& self) {
        if (a->needs_grad) {
            accum_init(a);
            for (long i = 0; i < self.grad.numel(); ++i) a->grad[i] += self.grad[i] * b->value[i];
        }
        if (b->needs_grad) {
            accum_init(b);
            for (long i = 0; i < self.grad.numel(); ++i) b->grad[i] += self.grad[i] * a->value[i];
        }
    });
}

template <class T>
Var<T> scale(Tape<T>& tape, Var<T> a, T c) {
    Tensor<T> out = a->value;
    for (long i = 0; i < out.numel(); ++i) out[i] *= c;
    return tape.make(std::move(out), {a}, [a, c](Node<T>& self) {
        if (!a->needs_grad) return;
        accum_init(a);
        for (long i = 0; i < self.grad.numel(); ++i) a->grad[i] += c * self.grad[i];
    });
}

template <class T>
Var<T> relu(Tape<T>& tape, Var<T> a) {
    Tensor<T> out = a->value;
    for (long i = 0; i < out.numel(); ++i) out[i] = out[i] > T(0) ? out[i] : T(0);
    return tape.make(std::move(out), {a}, [a](Node<T>& self) {
        if (!a->needs_grad) return;
        accum_init(a);
        for (long i = 0; i < self.grad.numel(); ++i)
            if (a->value[i] > T(0)) a->grad[i] += self.grad[i];
    });
}

template <class T>
Var<T> gelu(Tape<T>& tape, Var<T> a) {
    static constexpr double inv_sqrt2 = 0.70710678118654752440;
    static constexpr double inv_sqrt2pi = 0.39894228040143267794;
    Tensor<T> out = a->value;
    for (long i = 0; i < out.numel(); ++i) {
        double x = static_cast<double>(out[i]);
        out[i] = static_cast<T>(0.5 * x * (1.0 + std::erf(x * inv_sqrt2)));
    }
    return tape.make(std::move(out), {a}, [a](Node<T>& self) {
        if (!a->needs_grad) return;
        accum_init(a);
        for (long i = 0; i < self.grad.numel(); ++i) {
            double x = static_cast<double>(a->value[i]);
            double cdf = 0.5 * (1.0 + std::erf(x * inv_sqrt2));
            double pdf = inv_sqrt2pi * std::exp(-0.5 * x * x);
            a->grad[i] += static_cast<T>(static_cast<double>(self.grad[i]) * (cdf + x * pdf));
        }
    });
}

template <class T>
Var<T> sigmoid(Tape<T>& tape, Var<T> a) {
    Tensor<T> out = a->value;
    for (long i = 0; i < out.numel(); ++i) {
        double x = static_cast<double>(out[i]);
        out[i] = static_cast<T>(1.0 / (1.0 + std::exp(-x)));
    }
    return tape.make(std::move(out), {a}, [a](Node<T>& self) {
        if (!a->needs_grad) return;
        accum_init(a);
        for (long i = 0; i < self.grad.numel(); ++i) {
            T y = self.value[i];
            a->grad[i] += self.grad[i] * y * (T(1) - y);
        }
    });
}

// ---- shape ----

template <class T>
Var<T> reshape(Tape<T>& tape, Var<T> a, std::vector<int> shape) {
    Tensor<T> out = a->value.reshaped(std::move(shape));
    return tape.make(std::move(out), {a}, [a](Node<T>& self) {
        if (!a->needs_grad) return;
        accum_init(a);
        for (long i = 0; i < self.grad.numel(); ++i) a->grad[i] += self.grad[i];
    });
}

namespace detail {

inline std::vector<long> row_major_strides(const std::vector<int>& shape) {
    std::vector<long> st(shape.size(), 1);
    for (int i = static_cast<int>(shape.size()) - 2; i >= 0; --i)
        st[i] = st[i + 1] * shape[i + 1];
    return st;
}

template <class T>
Tensor<T> permute_values(const Tensor<T>& in, const std::vector<int>& axes) {
    std::vector<int> oshape(axes.size());
    for (size_t i = 0; i < axes.size(); ++i) oshape[i] = in.shape[static_cast<size_t>(axes[i])];
    Tensor<T> out(oshape);
    auto ist = row_major_strides(in.shape);
    auto ost = row_major_strides(oshape);
    long n = in.numel();
    int nd = in.ndim();
    std::vector<int> idx(static_cast<size_t>(nd), 0);
    for (long lin = 0; lin < n; ++lin) {
        long rem = lin;
        long off = 0;
        for (int d = 0; d < nd; ++d) {
            long c = rem / ost[d];
            rem %= ost[d];
            off += c * ist[axes[static_cast<size_t>(d)]];
        }
        out[lin] = in[off];
    }
    return out;
}

}  // namespace detail

template <class T>
Var<T> permute(Tape<T>& tape, Var<T> a, std::vector<int> axes) {
    if (static_cast<int>(axes.size()) != a->value.ndim())
        throw ShapeMismatch("permute: axes rank mismatch");
    Tensor<T> out = detail::permute_values(a->value, axes);
    std::vector<int> inv(axes.size());
    for (size_t i = 0; i < axes.size(); ++i) inv[static_cast<size_t>(axes[i])] = static_cast<int>(i);
    return tape.make(std::move(out), {a}, [a, inv](Node<T>& self) {
        if (!a->needs_grad) return;
        accum_init(a);
        Tensor<T> g = detail::permute_values(self.grad, inv);
        for (long i = 0; i < g.numel(); ++i) a->grad[i] += g[i];
    });
}

// ---- linear algebra ----

template <class T>
Var<T> matmul(Tape<T>& tape, Var<T> a, Var<T> b) {
    if (a->value.ndim() != 2 || b->value.ndim() != 2 || a->value.dim(1) != b->value.dim(0))
        throw ShapeMismatch("matmul: " + a->value.shape_str() + " x " + b->value.shape_str());
    long m = a->value.dim(0), k = a->value.dim(1), n = b->value.dim(1);
    Tensor<T> out({static_cast<int>(m), static_cast<int>(n)});
    detail::as_mat(out, m, n).noalias() =
        detail::as_mat(a->value, m, k) * detail::as_mat(b->value, k, n);
    return tape.make(std::move(out), {a, b}, [a, b, m, k, n](Node<T>& self) {
        auto g = detail::as_mat(self.grad, m, n);
        if (a->needs_grad) {
            accum_init(a);
            detail::as_mat(a->grad, m, k).noalias() +=
                g * detail::as_mat(b->value, k, n).transpose();
        }
        if (b->needs_grad) {
            accum_init(b);
            detail::as_mat(b->grad, k, n).noalias() +=
                detail::as_mat(a->value, m, k).transpose() * g;
        }
    });
}

// bias add over the last dimension of a 2-d or 3-d tensor
template <class T>
Var<T> add_bias(Tape<T>& tape, Var<T> x, Var<T> b) {
    long d = b->value.numel();
    if (x->value.dim(x->value.ndim() - 1) != d) throw ShapeMismatch("add_bias: width mismatch");
    long rows = x->value.numel() / d;
    Tensor<T> out = x->value;
    for (long r = 0; r < rows; ++r)
        for (long j = 0; j < d; ++j) out[r * d + j] += b->value[j];
    return tape.make(std::move(out), {x, b}, [x, b, rows, d](Node<T>& self) {
        if (x->needs_grad) {
            accum_init(x);
            for (long i = 0; i < self.grad.numel(); ++i) x->grad[i] += self.grad[i];
        }
        if (b->needs_grad) {
            accum_init(b);
            for (long r = 0; r < rows; ++r)
                for (long j = 0; j < d; ++j) b->grad[j] += self.grad[r * d + j];
        }
    });
}

// x: (n, rest...), p: (rest...) added to every slice along axis 0
template <class T>
Var<T> add_broadcast0(Tape<T>& tape, Var<T> x, Var<T> p) {
    long per = p->value.numel();
    if (x->value.numel() % per != 0 || x->value.numel() / per != x->value.dim(0))
        throw ShapeMismatch("add_broadcast0: slice size mismatch");
    long n = x->value.dim(0);
    Tensor<T> out = x->value;
    for (long i = 0; i < n; ++i)
        for (long j = 0; j < per; ++j) out[i * per + j] += p->value[j];
    return tape.make(std::move(out), {x, p}, [x, p, n, per](Node<T>& self) {
        if (x->needs_grad) {
            accum_init(x);
            for (long i = 0; i < self.grad.numel(); ++i) x->grad[i] += self.grad[i];
        }
        if (p->needs_grad) {
            accum_init(p);
            for (long i = 0; i < n; ++i)
                for (long j = 0; j < per; ++j) p->grad[j] += self.grad[i * per + j];
        }
    });
}

// x: (n, t, e), tok: (e) -> (n, t+1, e) with tok at position 0 of every sample
template <class T>
Var<T> prepend_token(Tape<T>& tape, Var<T> x, Var<T> tok) {
    int n = x->value.dim(0), t = x->value.dim(1), e = x->value.dim(2);
    if (tok->value.numel() != e) throw ShapeMismatch("prepend_token: embed width mismatch");
    Tensor<T> out({n, t + 1, e});
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < e; ++j) out.at(i, 0, j) = tok->value[j];
        for (int r = 0; r < t; ++r)
            for (int j = 0; j < e; ++j) out.at(i, r + 1, j) = x->value.at(i, r, j);
    }
    return tape.make(std::move(out), {x, tok}, [x, tok, n, t, e](Node<T>& self) {
        if (tok->needs_grad) {
            accum_init(tok);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < e; ++j) tok->grad[j] += self.grad.at(i, 0, j);
        }
        if (x->needs_grad) {
            accum_init(x);
            for (int i = 0; i < n; ++i)
                for (int r = 0; r < t; ++r)
                    for (int j = 0; j < e; ++j) x->grad.at(i, r, j) += self.grad.at(i, r + 1, j);
        }
    });
}

// (n, t, e) -> (n, e), keeping token 0
template <class T>
Var<T> take_token0(Tape<T>& tape, Var<T> x) {
    int n = x->value.dim(0), t = x->value.dim(1), e = x->value.dim(2);
    Tensor<T> out({n, e});
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < e; ++j) out.at(i, j) = x->value.at(i, 0, j);
    return tape.make(std::move(out), {x}, [x, n, t, e](Node<T>& self) {
        (void)t;
        if (!x->needs_grad) return;
        accum_init(x);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < e; ++j) x->grad.at(i, 0, j) += self.grad.at(i, j);
    });
}

// softmax over the last dimension. With invariant=true the normalizer is a
// permutation-invariant sum, so permuting entries of a row permutes outputs
// bit-exactly.
template <class T>
Var<T> softmax_lastdim(Tape<T>& tape, Var<T> x, bool invariant = false) {
    long d = x->value.dim(x->value.ndim() - 1);
    long rows = x->value.numel() / d;
    Tensor<T> out = x->value;
    std::vector<T> buf(static_cast<size_t>(d));
    for (long r = 0; r < rows; ++r) {
        T* row = out.data() + r * d;
        T m = row[0];
        for (long j = 1; j < d; ++j) m = std::max(m, row[j]);
        for (long j = 0; j < d; ++j) row[j] = std::exp(row[j] - m);
        T denom;
        if (invariant) {
            std::copy(row, row + d, buf.data());
            denom = permutation_invariant_sum(buf.data(), static_cast<int>(d));
        } else {
            denom = T(0);
            for (long j = 0; j < d; ++j) denom += row[j];
        }
        for (long j = 0; j < d; ++j) row[j] /= denom;
    }
    return tape.make(std::move(out), {x}, [x, rows, d](Node<T>& self) {
        if (!x->needs_grad) return;
        accum_init(x);
        for (long r = 0; r < rows; ++r) {
            const T* y = self.value.data() + r * d;
            const T* g = self.grad.data() + r * d;
            T dot = T(0);
            for (long j = 0; j < d; ++j) dot += g[j] * y[j];
            T* gx = x->grad.data() + r * d;
            for (long j = 0; j < d; ++j) gx[j] += y[j] * (g[j] - dot);
        }
    });
}

// batched a (B, m, k) x b^T with b (B, n, k) -> (B, m, n)
template <class T>
Var<T> bmm_nt(Tape<T>& tape, Var<T> a, Var<T> b) {
    int B = a->value.dim(0), m = a->value.dim(1), k = a->value.dim(2), n = b->value.dim(1);
    if (b->value.dim(0) != B || b->value.dim(2) != k) throw ShapeMismatch("bmm_nt: shape mismatch");
    Tensor<T> out({B, m, n});
    for (int i = 0; i < B; ++i) {
        detail::MapM<T> c(out.data() + static_cast<long>(i) * m * n, m, n);
        detail::CMapM<T> am(a->value.data() + static_cast<long>(i) * m * k, m, k);
        detail::CMapM<T> bm(b->value.data() + static_cast<long>(i) * n * k, n, k);
        c.noalias() = am * bm.transpose();
    }
    return tape.make(std::move(out), {a, b}, [a, b, B, m, k, n](Node<T>& self) {
        for (int i = 0; i < B; ++i) {
            detail::CMapM<T> g(self.grad.data() + static_cast<long>(i) * m * n, m, n);
            if (a->needs_grad) {
                accum_init(a);
                detail::MapM<T> ga(a->grad.data() + static_cast<long>(i) * m * k, m, k);
                detail::CMapM<T> bm(b->value.data() + static_cast<long>(i) * n * k, n, k);
                ga.noalias() += g * bm;
            }
            if (b->needs_grad) {
                accum_init(b);
                detail::MapM<T> gb(b->grad.data() + static_cast<long>(i) * n * k, n, k);
                detail::CMapM<T> am(a->value.data() + static_cast<long>(i) * m * k, m, k);
                gb.noalias() += g.transpose() * am;
            }
        }
    });
}

// batched a (B, m, k) x b (B, k, n) -> (B, m, n) where the reduction over k is
// permutation-invariant (sorted before accumulation). Used for the
// attention-weights x values product, where k is the token axis.
template <class T>
Var<T> bmm_nn_invariant(Tape<T>& tape, Var<T> a, Var<T> b) {
    int B = a->value.dim(0), m = a->value.dim(1), k = a->value.dim(2), n = b->value.dim(2);
    if (b->value.dim(0) != B || b->value.dim(1) != k)
        throw ShapeMismatch("bmm_nn_invariant: shape mismatch");
    Tensor<T> out({B, m, n});
    std::vector<T> buf(static_cast<size_t>(k));
    for (int i = 0; i < B; ++i) {
        const T* ab = a->value.data() + static_cast<long>(i) * m * k;
        const T* bb = b->value.data() + static_cast<long>(i) * k * n;
        T* cb = out.data() + static_cast<long>(i) * m * n;
        for (int r = 0; r < m; ++r) {
            for (int c = 0; c < n; ++c) {
                for (int j = 0; j < k; ++j) buf[static_cast<size_t>(j)] = ab[r * k + j] * bb[j * n + c];
                cb[r * n + c] = permutation_invariant_sum(buf.data(), k);
            }
        }
    }
    return tape.make(std::move(out), {a, b}, [a, b, B, m, k, n](Node<T>& self) {
        for (int i = 0; i < B; ++i) {
            detail::CMapM<T> g(self.grad.data() + static_cast<long>(i) * m * n, m, n);
            if (a->needs_grad) {
                accum_init(a);
                detail::MapM<T> ga(a->grad.data() + static_cast<long>(i) * m * k, m, k);
                detail::CMapM<T> bm(b->value.data() + static_cast<long>(i) * k * n, k, n);
                ga.noalias() += g * bm.transpose();
            }
            if (b->needs_grad) {
                accum_init(b);
                detail::MapM<T> gb(b->grad.data() + static_cast<long>(i) * k * n, k, n);
                detail::CMapM<T> am(a->value.data() + static_cast<long>(i) * m * k, m, k);
                gb.noalias() += am.transpose() * g;
            }
        }
    });
}

// ---- conv / pooling / resampling (NHWC) ----

namespace detail {

// zero-padded same-size im2col for 3x3-style kernels, stride 1
template <class T>
void im2col_same(const Tensor<T>& x, int kh, int kw, Tensor<T>& cols) {
    int n = x.shape[0], h = x.shape[1], w = x.shape[2], c = x.shape[3];
    int ph = kh / 2, pw = kw / 2;
    long patch = static_cast<long>(kh) * kw * c;
    T* out = cols.data();
    for (int i = 0; i < n; ++i) {
        for (int y = 0; y < h; ++y) {
            for (int xx = 0; xx < w; ++xx) {
                for (int dy = 0; dy < kh; ++dy) {
                    int sy = y + dy - ph;
                    for (int dx = 0; dx < kw; ++dx) {
                        int sx = xx + dx - pw;
                        if (sy >= 0 && sy < h && sx >= 0 && sx < w) {
                            const T* src = &x.at(i, sy, sx, 0);
                            std::copy(src, src + c, out);
                        } else {
                            std::fill(out, out + c, T(0));
                        }
                        out += c;
                    }
                }
            }
        }
    }
    (void)patch;
}

template <class T>
void col2im_same(const Tensor<T>& cols, int kh, int kw, Tensor<T>& gx) {
    int n = gx.shape[0], h = gx.shape[1], w = gx.shape[2], c = gx.shape[3];
    int ph = kh / 2, pw = kw / 2;
    const T* in = cols.data();
    for (int i = 0; i < n; ++i) {
        for (int y = 0; y < h; ++y) {
            for (int xx = 0; xx < w; ++xx) {
                for (int dy = 0; dy < kh; ++dy) {
                    int sy = y + dy - ph;
                    for (int dx = 0; dx < kw; ++dx) {
                        int sx = xx + dx - pw;
                        if (sy >= 0 && sy < h && sx >= 0 && sx < w) {
                            T* dst = &gx.at(i, sy, sx, 0);
                            for (int ch = 0; ch < c; ++ch) dst[ch] += in[ch];
                        }
                        in += c;
                    }
                }
            }
        }
    }
}

}  // namespace detail

// x (n,h,w,c), w (kh,kw,c,oc), b (oc); stride 1, zero-padded to same size
template <class T>
Var<T> conv2d_same(Tape<T>& tape, Var<T> x, Var<T> w, Var<T> b) {
    if (x->value.ndim() != 4 || w->value.ndim() != 4) throw ShapeMismatch("conv2d: rank");
    int n = x->value.dim(0), h = x->value.dim(1), ww = x->value.dim(2), c = x->value.dim(3);
    int kh = w->value.dim(0), kw = w->value.dim(1), oc = w->value.dim(3);
    if (w->value.dim(2) != c) throw ShapeMismatch("conv2d: channel mismatch");
    long rows = static_cast<long>(n) * h * ww;
    long patch = static_cast<long>(kh) * kw * c;
    auto cols = std::make_shared<Tensor<T>>(
        std::vector<int>{static_cast<int>(rows), static_cast<int>(patch)});
    detail::im2col_same(x->value, kh, kw, *cols);
    Tensor<T> out({n, h, ww, oc});
    detail::as_mat(out, rows, oc).noalias() =
        detail::as_mat(*cols, rows, patch) * detail::as_mat(w->value, patch, oc);
    for (long r = 0; r < rows; ++r)
        for (int j = 0; j < oc; ++j) out[r * oc + j] += b->value[j];
    return tape.make(std::move(out), {x, w, b},
                     [x, w, b, cols, n, h, ww, c, kh, kw, oc, rows, patch](Node<T>& self) {
        auto g = detail::as_mat(self.grad, rows, oc);
        if (b->needs_grad) {
            accum_init(b);
            for (long r = 0; r < rows; ++r)
                for (int j = 0; j < oc; ++j) b->grad[j] += self.grad[r * oc + j];
        }
        if (w->needs_grad) {
            accum_init(w);
            detail::as_mat(w->grad, patch, oc).noalias() +=
                detail::as_mat(*cols, rows, patch).transpose() * g;
        }
        if (x->needs_grad) {
            accum_init(x);
            Tensor<T> gcols({static_cast<int>(rows), static_cast<int>(patch)});
            detail::as_mat(gcols, rows, patch).noalias() =
                g * detail::as_mat(w->value, patch, oc).transpose();
            detail::col2im_same(gcols, kh, kw, x->grad);
        }
    });
}

template <class T>
Var<T> maxpool2x2(Tape<T>& tape, Var<T> x) {
    int n = x->value.dim(0), h = x->value.dim(1), w = x->value.dim(2), c = x->value.dim(3);
    if (h % 2 || w % 2) throw ShapeMismatch("maxpool2x2: odd spatial dims");
    int oh = h / 2, ow = w / 2;
    Tensor<T> out({n, oh, ow, c});
    auto arg = std::make_shared<std::vector<long>>(out.numel());
    for (int i = 0; i < n; ++i)
        for (int y = 0; y < oh; ++y)
            for (int xx = 0; xx < ow; ++xx)
                for (int ch = 0; ch < c; ++ch) {
                    long best = -1;
                    T bv = T(0);
                    for (int dy = 0; dy < 2; ++dy)
                        for (int dx = 0; dx < 2; ++dx) {
                            long off = ((static_cast<long>(i) * h + 2 * y + dy) * w + 2 * xx + dx) * c + ch;
                            T val = x->value[off];
                            if (best < 0 || val > bv) {
                                bv = val;
                                best = off;
                            }
                        }
                    long oo = ((static_cast<long>(i) * oh + y) * ow + xx) * c + ch;
                    out[oo] = bv;
                    (*arg)[static_cast<size_t>(oo)] = best;
                }
    return tape.make(std::move(out), {x}, [x, arg](Node<T>& self) {
        if (!x->needs_grad) return;
        accum_init(x);
        for (long i = 0; i < self.grad.numel(); ++i)
            x->grad[(*arg)[static_cast<size_t>(i)]] += self.grad[i];
    });
}

template <class T>
Var<T> upsample_nearest2x(Tape<T>& tape, Var<T> x) {
    int n = x->value.dim(0), h = x->value.dim(1), w = x->value.dim(2), c = x->value.dim(3);
    Tensor<T> out({n, 2 * h, 2 * w, c});
    for (int i = 0; i < n; ++i)
        for (int y = 0; y < 2 * h; ++y)
            for (int xx = 0; xx < 2 * w; ++xx)
                for (int ch = 0; ch < c; ++ch)
                    out.at(i, y, xx, ch) = x->value.at(i, y / 2, xx / 2, ch);
    return tape.make(std::move(out), {x}, [x, n, h, w, c](Node<T>& self) {
        if (!x->needs_grad) return;
        accum_init(x);
        for (int i = 0; i < n; ++i)
            for (int y = 0; y < 2 * h; ++y)
                for (int xx = 0; xx < 2 * w; ++xx)
                    for (int ch = 0; ch < c; ++ch)
                        x->grad.at(i, y / 2, xx / 2, ch) += self.grad.at(i, y, xx, ch);
    });
}

// ---- normalization ----

// layer norm over the last dimension with affine parameters
template <class T>
Var<T> layernorm(Tape<T>& tape, Var<T> x, Var<T> gamma, Var<T> beta, T eps = T(1e-5)) {
    long e = x->value.dim(x->value.ndim() - 1);
    if (gamma->value.numel() != e || beta->value.numel() != e)
        throw ShapeMismatch("layernorm: affine width mismatch");
    long rows = x->value.numel() / e;
    Tensor<T> out = x->value;
    auto xhat = std::make_shared<Tensor<T>>(x->value.shape);
    auto inv_std = std::make_shared<std::vector<T>>(static_cast<size_t>(rows));
    for (long r = 0; r < rows; ++r) {
        T* row = out.data() + r * e;
        T mu = T(0);
        for (long j = 0; j < e; ++j) mu += row[j];
        mu /= static_cast<T>(e);
        T var = T(0);
        for (long j = 0; j < e; ++j) {
            T d = row[j] - mu;
            var += d * d;
        }
        var /= static_cast<T>(e);
        T is = T(1) / std::sqrt(var + eps);
        (*inv_std)[static_cast<size_t>(r)] = is;
        for (long j = 0; j < e; ++j) {
            T xh = (row[j] - mu) * is;
            (*xhat)[r * e + j] = xh;
            row[j] = gamma->value[j] * xh + beta->value[j];
        }
    }
    return tape.make(std::move(out), {x, gamma, beta},
                     [x, gamma, beta, xhat, inv_std, rows, e](Node<T>& self) {
        if (gamma->needs_grad) {
            accum_init(gamma);
            for (long r = 0; r < rows; ++r)
                for (long j = 0; j < e; ++j)
                    gamma->grad[j] += self.grad[r * e + j] * (*xhat)[r * e + j];
        }
        if (beta->needs_grad) {
            accum_init(beta);
            for (long r = 0; r < rows; ++r)
                for (long j = 0; j < e; ++j) beta->grad[j] += self.grad[r * e + j];
        }
        if (x->needs_grad) {
            accum_init(x);
            for (long r = 0; r < rows; ++r) {
                T mean_dxhat = T(0), mean_dxhat_xhat = T(0);
                for (long j = 0; j < e; ++j) {
                    T dxh = self.grad[r * e + j] * gamma->value[j];
                    mean_dxhat += dxh;
                    mean_dxhat_xhat += dxh * (*xhat)[r * e + j];
                }
                mean_dxhat /= static_cast<T>(e);
                mean_dxhat_xhat /= static_cast<T>(e);
                T is = (*inv_std)[static_cast<size_t>(r)];
                for (long j = 0; j < e; ++j) {
                    T dxh = self.grad[r * e + j] * gamma->value[j];
                    x->grad[r * e + j] +=
                        is * (dxh - mean_dxhat - (*xhat)[r * e + j] * mean_dxhat_xhat);
                }
            }
        }
    });
}

// ---- losses ----

// mean softmax cross-entropy in nats; logits (n, K)
template <class T>
Var<T> softmax_cross_entropy(Tape<T>& tape, Var<T> logits, const std::vector<int>& labels) {
    int n = logits->value.dim(0), K = logits->value.dim(1);
    if (static_cast<int>(labels.size()) != n) throw ShapeMismatch("cross_entropy: label count");
    auto probs = std::make_shared<Tensor<T>>(logits->value.shape);
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        const T* row = logits->value.data() + static_cast<long>(i) * K;
        T m = row[0];
        for (int j = 1; j < K; ++j) m = std::max(m, row[j]);
        double denom = 0.0;
        for (int j = 0; j < K; ++j) denom += std::exp(static_cast<double>(row[j] - m));
        double logz = std::log(denom) + static_cast<double>(m);
        for (int j = 0; j < K; ++j)
            (*probs)[static_cast<long>(i) * K + j] =
                static_cast<T>(std::exp(static_cast<double>(row[j]) - logz));
        total += logz - static_cast<double>(row[labels[static_cast<size_t>(i)]]);
    }
    Tensor<T> out = Tensor<T>::scalar(static_cast<T>(total / n));
    auto labels_copy = std::make_shared<std::vector<int>>(labels);
    return tape.make(std::move(out), {logits}, [logits, probs, labels_copy, n, K](Node<T>& self) {
        if (!logits->needs_grad) return;
        accum_init(logits);
        T g = self.grad[0] / static_cast<T>(n);
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < K; ++j) {
                T p = (*probs)[static_cast<long>(i) * K + j];
                T delta = (j == (*labels_copy)[static_cast<size_t>(i)]) ? T(1) : T(0);
                logits->grad[static_cast<long>(i) * K + j] += g * (p - delta);
            }
        }
    });
}

// mean of squared entries
template <class T>
Var<T> mean_square(Tape<T>& tape, Var<T> x) {
    long n = x->value.numel();
    double s = 0.0;
    for (long i = 0; i < n; ++i) {
        double v = static_cast<double>(x->value[i]);
        s += v * v;
    }
    Tensor<T> out = Tensor<T>::scalar(static_cast<T>(s / static_cast<double>(n)));
    return tape.make(std::move(out), {x}, [x, n](Node<T>& self) {
        if (!x->needs_grad) return;
        accum_init(x);
        T g = self.grad[0] * T(2) / static_cast<T>(n);
        for (long i = 0; i < n; ++i) x->grad[i] += g * x->value[i];
    });
}

// anisotropic total variation with squared forward differences, averaged over
// all entries; x (n,h,w,c)
template <class T>
Var<T> tv_loss(Tape<T>& tape, Var<T> x) {
    int n = x->value.dim(0), h = x->value.dim(1), w = x->value.dim(2), c = x->value.dim(3);
    double denom = static_cast<double>(x->value.numel());
    double s = 0.0;
    for (int i = 0; i < n; ++i)
        for (int y = 0; y < h; ++y)
            for (int xx = 0; xx < w; ++xx)
                for (int ch = 0; ch < c; ++ch) {
                    double v = static_cast<double>(x->value.at(i, y, xx, ch));
                    if (y + 1 < h) {
                        double d = static_cast<double>(x->value.at(i, y + 1, xx, ch)) - v;
                        s += d * d;
                    }
                    if (xx + 1 < w) {
                        double d = static_cast<double>(x->value.at(i, y, xx + 1, ch)) - v;
                        s += d * d;
                    }
                }
    Tensor<T> out = Tensor<T>::scalar(static_cast<T>(s / denom));
    return tape.make(std::move(out), {x}, [x, n, h, w, c, denom](Node<T>& self) {
        if (!x->needs_grad) return;
        accum_init(x);
        T g = self.grad[0] * static_cast<T>(2.0 / denom);
        for (int i = 0; i < n; ++i)
            for (int y = 0; y < h; ++y)
                for (int xx = 0; xx < w; ++xx)
                    for (int ch = 0; ch < c; ++ch) {
                        T v = x->value.at(i, y, xx, ch);
                        if (y + 1 < h) {
                            T d = x->value.at(i, y + 1, xx, ch) - v;
                            x->grad.at(i, y + 1, xx, ch) += g * d;
                            x->grad.at(i, y, xx, ch) -= g * d;
                        }
                        if (xx + 1 < w) {
                            T d = x->value.at(i, y, xx + 1, ch) - v;
                            x->grad.at(i, y, xx + 1, ch) += g * d;
                            x->grad.at(i, y, xx, ch) -= g * d;
                        }
                    }
    });
}

// mean pairwise cosine similarity between rows of x (n, D) that share a
// class id; 0 when no same-class pair exists
template <class T>
Var<T> class_cosine_diversity(Tape<T>& tape, Var<T> x, const std::vector<int>& classes) {
    int n = x->value.dim(0);
    long D = x->value.dim(1);
    if (static_cast<int>(classes.size()) != n) throw ShapeMismatch("diversity: class count");
    auto norms = std::make_shared<std::vector<double>>(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        double s = 0.0;
        for (long j = 0; j < D; ++j) {
            double v = static_cast<double>(x->value[i * D + j]);
            s += v * v;
        }
        (*norms)[static_cast<size_t>(i)] = std::sqrt(s);
    }
    auto pairs = std::make_shared<std::vector<std::pair<int, int>>>();
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (classes[static_cast<size_t>(i)] == classes[static_cast<size_t>(j)])
                pairs->emplace_back(i, j);
    auto cosines = std::make_shared<std::vector<double>>();
    double total = 0.0;
    for (auto [i, j] : *pairs) {
        double dot = 0.0;
        for (long k = 0; k < D; ++k)
            dot += static_cast<double>(x->value[i * D + k]) * static_cast<double>(x->value[j * D + k]);
        double ni = (*norms)[static_cast<size_t>(i)], nj = (*norms)[static_cast<size_t>(j)];
        double cs = (ni > 0.0 && nj > 0.0) ? dot / (ni * nj) : 0.0;
        cosines->push_back(cs);
        total += cs;
    }
    T val = pairs->empty() ? T(0) : static_cast<T>(total / static_cast<double>(pairs->size()));
    Tensor<T> out = Tensor<T>::scalar(val);
    return tape.make(std::move(out), {x}, [x, norms, pairs, cosines, D](Node<T>& self) {
        if (!x->needs_grad || pairs->empty()) return;
        accum_init(x);
        double g = static_cast<double>(self.grad[0]) / static_cast<double>(pairs->size());
        for (size_t p = 0; p < pairs->size(); ++p) {
            auto [i, j] = (*pairs)[p];
            double ni = (*norms)[static_cast<size_t>(i)], nj = (*norms)[static_cast<size_t>(j)];
            if (ni <= 0.0 || nj <= 0.0) continue;
            double cs = (*cosines)[p];
            for (long k = 0; k < D; ++k) {
                double xi = static_cast<double>(x->value[i * D + k]);
                double xj = static_cast<double>(x->value[j * D + k]);
                x->grad[i * D + k] += static_cast<T>(g * (xj / (ni * nj) - cs * xi / (ni * ni)));
                x->grad[j * D + k] += static_cast<T>(g * (xi / (ni * nj) - cs * xj / (nj * nj)));
            }
        }
    });
}

// lookup rows of table (K, e) by id -> (n, e)
template <class T>
Var<T> embedding_lookup(Tape<T>& tape, Var<T> table, const std::vector<int>& ids) {
    int K = table->value.dim(0), e = table->value.dim(1);
    int n = static_cast<int>(ids.size());
    Tensor<T> out({n, e});
    for (int i = 0; i < n; ++i) {
        int id = ids[static_cast<size_t>(i)];
        if (id < 0 || id >= K) throw UnknownClass("embedding id out of range");
        std::copy(table->value.data() + static_cast<long>(id) * e,
                  table->value.data() + static_cast<long>(id + 1) * e,
                  out.data() + static_cast<long>(i) * e);
    }
    auto ids_copy = std::make_shared<std::vector<int>>(ids);
    return tape.make(std::move(out), {table}, [table, ids_copy, e](Node<T>& self) {
        if (!table->needs_grad) return;
        accum_init(table);
        int n = static_cast<int>(ids_copy->size());
        for (int i = 0; i < n; ++i) {
            int id = (*ids_copy)[static_cast<size_t>(i)];
            for (int j = 0; j < e; ++j)
                table->grad[static_cast<long>(id) * e + j] += self.grad[static_cast<long>(i) * e + j];
        }
    });
}

// concatenate along the last dimension; a (n, da), b (n, db) -> (n, da+db)
template <class T>
Var<T> concat_lastdim(Tape<T>& tape, Var<T> a, Var<T> b) {
    int n = a->value.dim(0), da = a->value.dim(1), db = b->value.dim(1);
    if (b->value.dim(0) != n) throw ShapeMismatch("concat: row mismatch");
    Tensor<T> out({n, da + db});
    for (int i = 0; i < n; ++i) {
        std::copy(a->value.data() + static_cast<long>(i) * da,
                  a->value.data() + static_cast<long>(i + 1) * da,
                  out.data() + static_cast<long>(i) * (da + db));
        std::copy(b->value.data() + static_cast<long>(i) * db,
                  b->value.data() + static_cast<long>(i + 1) * db,
                  out.data() + static_cast<long>(i) * (da + db) + da);
    }
    return tape.make(std::move(out), {a, b}, [a, b, n, da, db](Node<T>& self) {
        if (a->needs_grad) {
            accum_init(a);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < da; ++j)
                    a->grad[static_cast<long>(i) * da + j] +=
                        self.grad[static_cast<long>(i) * (da + db) + j];
        }
        if (b->needs_grad) {
            accum_init(b);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < db; ++j)
                    b->grad[static_cast<long>(i) * db + j] +=
                        self.grad[static_cast<long>(i) * (da + db) + da + j];
        }
    });
}

// total = sum_i coeff_i * scalar_i
template <class T>
Var<T> weighted_sum(Tape<T>& tape, const std::vector<std::pair<T, Var<T>>>& terms) {
    T total = T(0);
    std::vector<Var<T>> parents;
    for (const auto& [w, v] : terms) {
        if (v->value.numel() != 1) throw ShapeMismatch("weighted_sum: non-scalar term");
        total += w * v->value[0];
        parents.push_back(v);
    }
    std::vector<T> ws;
    for (const auto& [w, v] : terms) ws.push_back(w);
    Tensor<T> out = Tensor<T>::scalar(total);
    return tape.make(std::move(out), parents, [parents, ws](Node<T>& self) {
        for (size_t i = 0; i < parents.size(); ++i) {
            if (!parents[i]->needs_grad) continue;
            accum_init(parents[i]);
            parents[i]->grad[0] += ws[i] * self.grad[0];
        }
    });
}

// image (n,h,w,c) -> non-overlapping p x p patch rows (n, (h/p)*(w/p), p*p*c),
// patches in row-major grid order
template <class T>
Var<T> patchify(Tape<T>& tape, Var<T> x, int p) {
    int n = x->value.dim(0), h = x->value.dim(1), w = x->value.dim(2), c = x->value.dim(3);
    if (h % p || w % p) throw ShapeMismatch("patchify: dims not divisible by patch size");
    int gh = h / p, gw = w / p, t = gh * gw, pd = p * p * c;
    Tensor<T> out({n, t, pd});
    for (int i = 0; i < n; ++i)
        for (int gy = 0; gy < gh; ++gy)
            for (int gx = 0; gx < gw; ++gx) {
                T* dst = &out.at(i, gy * gw + gx, 0);
                for (int dy = 0; dy < p; ++dy)
                    for (int dx = 0; dx < p; ++dx) {
                        const T* src = &x->value.at(i, gy * p + dy, gx * p + dx, 0);
                        std::copy(src, src + c, dst);
                        dst += c;
                    }
            }
    return tape.make(std::move(out), {x}, [x, p, n, h, w, c](Node<T>& self) {
        if (!x->needs_grad) return;
        accum_init(x);
        int gh = h / p, gw = w / p;
        for (int i = 0; i < n; ++i)
            for (int gy = 0; gy < gh; ++gy)
                for (int gx = 0; gx < gw; ++gx) {
                    const T* src = &self.grad.at(i, gy * gw + gx, 0);
                    for (int dy = 0; dy < p; ++dy)
                        for (int dx = 0; dx < p; ++dx) {
                            T* dst = &x->grad.at(i, gy * p + dy, gx * p + dx, 0);
                            for (int ch = 0; ch < c; ++ch) dst[ch] += src[ch];
                            src += c;
                        }
                }
    });
}

}  // namespace sclab::ad
