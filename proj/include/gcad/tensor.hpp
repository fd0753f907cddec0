#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include "gcad/errors.hpp"

namespace gcad {

/// Dense row-major array of doubles. The substrate for windows, weights and
/// every intermediate value in the predictor.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<std::size_t> shape)
        : shape_(std::move(shape)), data_(count(shape_), 0.0) {}

    Tensor(std::vector<std::size_t> shape, std::vector<double> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        if (data_.size() != count(shape_))
            throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                             " does not match shape (" + shape_string() + ")");
    }

    static Tensor zeros(std::vector<std::size_t> shape) { return Tensor(std::move(shape)); }

    static Tensor scalar(double v) { return Tensor({1}, {v}); }

    static Tensor vector(std::vector<double> v) {
        std::size_t n = v.size();
        return Tensor({n}, std::move(v));
    }

    static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows) {
        std::size_t r = rows.size();
        std::size_t c = r ? rows.begin()->size() : 0;
        std::vector<double> data;
        data.reserve(r * c);
        for (const auto& row : rows) {
            if (row.size() != c) throw ShapeError("ragged matrix initializer");
            data.insert(data.end(), row.begin(), row.end());
        }
        return Tensor({r, c}, std::move(data));
    }

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t dim(std::size_t i) const { return shape_[i]; }
    std::size_t numel() const { return data_.size(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& values() { return data_; }
    const std::vector<double>& values() const { return data_; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    double& at(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
    double at(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    bool all_finite() const {
        for (double v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    std::string shape_string() const {
        std::string s;
        for (std::size_t i = 0; i < shape_.size(); ++i) {
            if (i) s += "x";
            s += std::to_string(shape_[i]);
        }
        return s;
    }

    bool operator==(const Tensor& o) const { return shape_ == o.shape_ && data_ == o.data_; }

private:
    static std::size_t count(const std::vector<std::size_t>& shape) {
        return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                               [](std::size_t a, std::size_t b) { return a * b; });
    }

    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

// ---------------------------------------------------------------------------
// Pure tensor kernels. The tape records these same operations; keeping them
// free functions lets tests exercise the math without a tape.
// ---------------------------------------------------------------------------

inline Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2)
        throw ShapeError("matmul expects rank-2 operands, got " + a.shape_string() + " and " +
                         b.shape_string());
    if (a.dim(1) != b.dim(0))
        throw ShapeError("matmul inner dimensions disagree: " + a.shape_string() + " vs " +
                         b.shape_string());
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    Tensor c({m, n});
    const double* pa = a.data();
    const double* pb = b.data();
    double* pc = c.data();
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t kk = 0; kk < k; ++kk) {
            const double aik = pa[i * k + kk];
            const double* brow = pb + kk * n;
            double* crow = pc + i * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += aik * brow[j];
        }
    }
    return c;
}

inline Tensor transpose(const Tensor& a) {
    if (a.rank() != 2) throw ShapeError("transpose expects a rank-2 tensor");
    const std::size_t m = a.dim(0), n = a.dim(1);
    Tensor t({n, m});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) t.at(j, i) = a.at(i, j);
    return t;
}

inline Tensor reshape(const Tensor& a, std::vector<std::size_t> shape) {
    Tensor r(std::move(shape), a.values());
    return r;
}

namespace detail {

// Elementwise binary op; rhs may be a vector broadcast along the last axis.
template <typename F>
Tensor zip(const Tensor& a, const Tensor& b, F f, const char* name) {
    if (a.same_shape(b)) {
        Tensor out(a.shape());
        for (std::size_t i = 0; i < a.numel(); ++i) out[i] = f(a[i], b[i]);
        return out;
    }
    if (b.rank() == 1 && a.rank() >= 1 && a.dim(a.rank() - 1) == b.dim(0)) {
        const std::size_t n = b.dim(0);
        Tensor out(a.shape());
        for (std::size_t i = 0; i < a.numel(); ++i) out[i] = f(a[i], b[i % n]);
        return out;
    }
    throw ShapeError(std::string(name) + ": incompatible shapes " + a.shape_string() + " and " +
                     b.shape_string());
}

}  // namespace detail

inline Tensor add(const Tensor& a, const Tensor& b) {
    return detail::zip(a, b, [](double x, double y) { return x + y; }, "add");
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
    return detail::zip(a, b, [](double x, double y) { return x - y; }, "sub");
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
    return detail::zip(a, b, [](double x, double y) { return x * y; }, "mul");
}

inline Tensor relu(const Tensor& a) {
    Tensor out(a.shape());
    for (std::size_t i = 0; i < a.numel(); ++i) out[i] = a[i] > 0.0 ? a[i] : 0.0;
    return out;
}

inline Tensor square(const Tensor& a) {
    Tensor out(a.shape());
    for (std::size_t i = 0; i < a.numel(); ++i) out[i] = a[i] * a[i];
    return out;
}

inline Tensor scale(const Tensor& a, double c) {
    Tensor out(a.shape());
    for (std::size_t i = 0; i < a.numel(); ++i) out[i] = c * a[i];
    return out;
}

inline Tensor sum_all(const Tensor& a) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) s += a[i];
    return Tensor::scalar(s);
}

}  // namespace gcad
