#pragma once

#include <algorithm>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <vector>

#include "sclab/common.hpp"

namespace sclab {

// Dense row-major tensor. Value semantics; shape is a plain dim list.
template <class T>
struct Tensor {
    std::vector<int> shape;
    std::vector<T> v;

    Tensor() = default;
    explicit Tensor(std::vector<int> s) : shape(std::move(s)), v(numel_of(shape), T(0)) {}
    Tensor(std::vector<int> s, std::vector<T> data) : shape(std::move(s)), v(std::move(data)) {
        if (static_cast<size_t>(numel_of(shape)) != v.size())
            throw ShapeMismatch("tensor data length does not match shape");
    }

    static long numel_of(const std::vector<int>& s) {
        long n = 1;
        for (int d : s) {
            if (d < 0) throw ShapeMismatch("negative dimension");
            n *= d;
        }
        return n;
    }

    static Tensor zeros(std::vector<int> s) { return Tensor(std::move(s)); }

    static Tensor full(std::vector<int> s, T value) {
        Tensor t(std::move(s));
        std::fill(t.v.begin(), t.v.end(), value);
        return t;
    }

    static Tensor scalar(T value) { return Tensor({1}, {value}); }

    long numel() const { return static_cast<long>(v.size()); }
    int ndim() const { return static_cast<int>(shape.size()); }
    int dim(int i) const { return shape[static_cast<size_t>(i)]; }

    T* data() { return v.data(); }
    const T* data() const { return v.data(); }

    T& operator[](long i) { return v[static_cast<size_t>(i)]; }
    const T& operator[](long i) const { return v[static_cast<size_t>(i)]; }

    // row-major offset helpers for the common ranks
    T& at(int i, int j) { return v[static_cast<size_t>(i) * shape[1] + j]; }
    const T& at(int i, int j) const { return v[static_cast<size_t>(i) * shape[1] + j]; }
    T& at(int i, int j, int k) {
        return v[(static_cast<size_t>(i) * shape[1] + j) * shape[2] + k];
    }
    const T& at(int i, int j, int k) const {
        return v[(static_cast<size_t>(i) * shape[1] + j) * shape[2] + k];
    }
    T& at(int i, int j, int k, int l) {
        return v[((static_cast<size_t>(i) * shape[1] + j) * static_cast<size_t>(shape[2]) + k) *
                     shape[3] +
                 l];
    }
    const T& at(int i, int j, int k, int l) const {
        return v[((static_cast<size_t>(i) * shape[1] + j) * static_cast<size_t>(shape[2]) + k) *
                     shape[3] +
                 l];
    }

    Tensor reshaped(std::vector<int> s) const {
        if (numel_of(s) != numel()) throw ShapeMismatch("reshape changes element count");
        Tensor t;
        t.shape = std::move(s);
        t.v = v;
        return t;
    }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    bool all_finite() const {
        for (const T& x : v)
            if (!std::isfinite(static_cast<double>(x))) return false;
        return true;
    }

    std::string shape_str() const {
        std::ostringstream os;
        os << '(';
        for (size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
        os << ')';
        return os.str();
    }
};

template <class T>
Tensor<T> operator+(const Tensor<T>& a, const Tensor<T>& b) {
    if (!a.same_shape(b)) throw ShapeMismatch("tensor add: " + a.shape_str() + " vs " + b.shape_str());
    Tensor<T> c = a;
    for (long i = 0; i < c.numel(); ++i) c[i] += b[i];
    return c;
}

template <class T>
Tensor<T> operator-(const Tensor<T>& a, const Tensor<T>& b) {
    if (!a.same_shape(b)) throw ShapeMismatch("tensor sub: " + a.shape_str() + " vs " + b.shape_str());
    Tensor<T> c = a;
    for (long i = 0; i < c.numel(); ++i) c[i] -= b[i];
    return c;
}

// Sum of a small buffer that is invariant under permutation of the inputs:
// the addends are sorted by value before accumulation, so any reordering of
// the same multiset produces the bit-identical result.
template <class T>
T permutation_invariant_sum(T* buf, int n) {
    std::sort(buf, buf + n);
    T s = T(0);
    for (int i = 0; i < n; ++i) s += buf[i];
    return s;
}

}  // namespace sclab
