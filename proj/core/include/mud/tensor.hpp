#pragma once

#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include "mud/error.hpp"

namespace mud {

/// Dense n-dimensional array, row-major, contiguous.
template <typename T>
class TensorT {
public:
    TensorT() = default;

    explicit TensorT(std::vector<int> shape) : shape_(std::move(shape)) {
        values_.assign(checked_size(shape_), T{0});
    }

    TensorT(std::vector<int> shape, std::vector<T> values)
        : shape_(std::move(shape)), values_(std::move(values)) {
        if (values_.size() != checked_size(shape_)) {
            throw DataError("tensor value count does not match shape");
        }
    }

    static TensorT scalar(T v) { return TensorT({1}, {v}); }

    const std::vector<int>& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    int dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
    std::size_t size() const { return values_.size(); }
    bool empty() const { return values_.empty(); }

    T* data() { return values_.data(); }
    const T* data() const { return values_.data(); }
    std::vector<T>& values() { return values_; }
    const std::vector<T>& values() const { return values_; }

    T& operator[](std::size_t i) { return values_[i]; }
    const T& operator[](std::size_t i) const { return values_[i]; }

    /// CHW access for rank-3 tensors.
    T& at(int c, int y, int x) {
        return values_[(static_cast<std::size_t>(c) * shape_[1] + y) * shape_[2] + x];
    }
    const T& at(int c, int y, int x) const {
        return values_[(static_cast<std::size_t>(c) * shape_[1] + y) * shape_[2] + x];
    }

    bool same_shape(const TensorT& other) const { return shape_ == other.shape_; }

    template <typename U>
    TensorT<U> cast() const {
        std::vector<U> out(values_.size());
        for (std::size_t i = 0; i < values_.size(); ++i) out[i] = static_cast<U>(values_[i]);
        return TensorT<U>(shape_, std::move(out));
    }

    std::string shape_string() const {
        std::string s = "(";
        for (std::size_t i = 0; i < shape_.size(); ++i) {
            if (i) s += "x";
            s += std::to_string(shape_[i]);
        }
        return s + ")";
    }

private:
    static std::size_t checked_size(const std::vector<int>& shape) {
        std::size_t n = 1;
        for (int d : shape) {
            if (d <= 0) throw DataError("tensor dimensions must be positive");
            n *= static_cast<std::size_t>(d);
        }
        return shape.empty() ? 0 : n;
    }

    std::vector<int> shape_;
    std::vector<T> values_;
};

using Tensor = TensorT<float>;
using TensorD = TensorT<double>;

}  // namespace mud
