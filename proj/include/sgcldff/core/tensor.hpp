#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include "sgcldff/core/errors.hpp"

namespace sgcldff {

// Dense row-major ND array of doubles. All network math runs in double so
// that finite-difference gradient checks are meaningful; checkpoints store
// float32 (see checkpoint.hpp).
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
        data_.assign(numel_of(shape_), 0.0);
    }
    Tensor(std::vector<int> shape, std::vector<double> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        if (data_.size() != numel_of(shape_))
            throw ShapeError("tensor data size does not match shape");
    }

    static std::size_t numel_of(const std::vector<int>& shape) {
        std::size_t n = 1;
        for (int d : shape) {
            if (d < 0) throw ShapeError("negative tensor dimension");
            n *= static_cast<std::size_t>(d);
        }
        return n;
    }

    const std::vector<int>& shape() const { return shape_; }
    int dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
    int ndim() const { return static_cast<int>(shape_.size()); }
    std::size_t numel() const { return data_.size(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    // Index helpers for the common layouts.
    double& at2(int a, int b) { return data_[idx2(a, b)]; }
    double at2(int a, int b) const { return data_[idx2(a, b)]; }
    double& at3(int a, int b, int c) { return data_[idx3(a, b, c)]; }
    double at3(int a, int b, int c) const { return data_[idx3(a, b, c)]; }
    double& at4(int a, int b, int c, int d) { return data_[idx4(a, b, c, d)]; }
    double at4(int a, int b, int c, int d) const { return data_[idx4(a, b, c, d)]; }

    std::size_t idx2(int a, int b) const {
        return static_cast<std::size_t>(a) * shape_[1] + b;
    }
    std::size_t idx3(int a, int b, int c) const {
        return (static_cast<std::size_t>(a) * shape_[1] + b) * shape_[2] + c;
    }
    std::size_t idx4(int a, int b, int c, int d) const {
        return ((static_cast<std::size_t>(a) * shape_[1] + b) * shape_[2] + c) * shape_[3] + d;
    }

    void fill(double v) { std::fill(data_.begin(), data_.end(), v); }
    void zero() { fill(0.0); }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

    bool all_finite() const {
        for (double v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    std::string shape_str() const {
        std::string s = "[";
        for (std::size_t i = 0; i < shape_.size(); ++i) {
            if (i) s += ",";
            s += std::to_string(shape_[i]);
        }
        return s + "]";
    }

private:
    std::vector<int> shape_;
    std::vector<double> data_;
};

inline void require_shape(const Tensor& t, const std::vector<int>& shape, const std::string& what) {
    if (t.shape() != shape) {
        Tensor probe(shape);
        throw ShapeError(what + ": expected " + probe.shape_str() + ", got " + t.shape_str());
    }
}

}  // namespace sgcldff
