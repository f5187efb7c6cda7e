#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "ppnet/errors.hpp"

namespace ppnet {

// Dense row-major tensor. 4-D data is ordered (batch, channels, height, width);
// scalars use an empty shape with a single element.
template <class T>
struct Tensor {
    std::vector<size_t> shape;
    std::vector<T> data;

    Tensor() : data(1, T(0)) {}

    explicit Tensor(std::vector<size_t> s) : shape(std::move(s)) {
        data.assign(numel(shape), T(0));
    }

    Tensor(std::vector<size_t> s, std::vector<T> d) : shape(std::move(s)), data(std::move(d)) {
        if (data.size() != numel(shape))
            throw DimensionError("tensor: data length " + std::to_string(data.size()) +
                                 " does not match shape product " + std::to_string(numel(shape)));
    }

    static size_t numel(const std::vector<size_t>& s) {
        size_t n = 1;
        for (size_t e : s) n *= e;
        return n;
    }

    static Tensor zeros(std::vector<size_t> s) { return Tensor(std::move(s)); }

    static Tensor full(std::vector<size_t> s, T v) {
        Tensor t(std::move(s));
        std::fill(t.data.begin(), t.data.end(), v);
        return t;
    }

    static Tensor scalar(T v) {
        Tensor t;
        t.data[0] = v;
        return t;
    }

    size_t size() const { return data.size(); }
    size_t rank() const { return shape.size(); }
    size_t dim(size_t i) const { return shape.at(i); }

    T item() const {
        if (data.size() != 1) throw ContractError("tensor: item() on non-scalar");
        return data[0];
    }

    // 4-D accessors (b, c, y, x).
    T& at4(size_t b, size_t c, size_t y, size_t x) {
        return data[((b * shape[1] + c) * shape[2] + y) * shape[3] + x];
    }
    T at4(size_t b, size_t c, size_t y, size_t x) const {
        return data[((b * shape[1] + c) * shape[2] + y) * shape[3] + x];
    }
    // 3-D accessors (c, y, x).
    T& at3(size_t c, size_t y, size_t x) { return data[(c * shape[1] + y) * shape[2] + x]; }
    T at3(size_t c, size_t y, size_t x) const { return data[(c * shape[1] + y) * shape[2] + x]; }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    bool all_finite() const {
        for (T v : data)
            if (!std::isfinite(static_cast<double>(v))) return false;
        return true;
    }

    template <class U>
    Tensor<U> cast() const {
        Tensor<U> out(shape);
        for (size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
        return out;
    }

    std::string shape_str() const {
        std::ostringstream os;
        os << "(";
        for (size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
        os << ")";
        return os.str();
    }
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

template <class T>
inline void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
    if (!a.same_shape(b))
        throw DimensionError(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " +
                             b.shape_str());
}

}  // namespace ppnet
