#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <utility>
#include <vector>

#include "facekit/common.hpp"

namespace facekit {

// Dense n-dimensional array of doubles, row-major. Values are required to be
// finite; factory functions that accept external data validate this.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<std::size_t> shape)
        : shape_(std::move(shape)), data_(count_of(shape_), 0.0) {}

    Tensor(std::vector<std::size_t> shape, std::vector<double> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        check(data_.size() == count_of(shape_), "tensor data length ", data_.size(),
              " does not match shape ", shape_str(shape_));
        for (double v : data_)
            check(std::isfinite(v), "tensor rejects non-finite value ", v);
    }

    static Tensor zeros(std::vector<std::size_t> shape) { return Tensor(std::move(shape)); }

    static Tensor full(std::vector<std::size_t> shape, double value) {
        Tensor t(std::move(shape));
        for (double& v : t.data_) v = value;
        check(std::isfinite(value), "tensor rejects non-finite fill ", value);
        return t;
    }

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& values() { return data_; }
    const std::vector<double>& values() const { return data_; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    // 3-D access, layout [channels, rows, cols].
    double& at3(std::size_t c, std::size_t y, std::size_t x) {
        return data_[(c * shape_[1] + y) * shape_[2] + x];
    }
    double at3(std::size_t c, std::size_t y, std::size_t x) const {
        return data_[(c * shape_[1] + y) * shape_[2] + x];
    }

    const double* ptr3(std::size_t c, std::size_t y, std::size_t x) const {
        return data_.data() + (c * shape_[1] + y) * shape_[2] + x;
    }
    double* ptr3(std::size_t c, std::size_t y, std::size_t x) {
        return data_.data() + (c * shape_[1] + y) * shape_[2] + x;
    }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

    bool all_finite() const {
        for (double v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    static std::size_t count_of(const std::vector<std::size_t>& shape) {
        std::size_t n = 1;
        for (std::size_t e : shape) n *= e;
        return n;
    }

private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

// Rank-2 tensor with row/column access. Kept as its own type since all the
// linear algebra lives here.
class Matrix {
public:
    Matrix() : rows_(0), cols_(0) {}

    Matrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
        : rows_(rows), cols_(cols), data_(std::move(data)) {
        check(data_.size() == rows * cols, "matrix data length ", data_.size(),
              " does not match ", rows, "x", cols);
        for (double v : data_)
            check(std::isfinite(v), "matrix rejects non-finite value ", v);
    }

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    static Matrix from_tensor(const Tensor& t) {
        check(t.rank() == 2, "matrix requires rank-2 tensor, got shape ", shape_str(t.shape()));
        return Matrix(t.shape()[0], t.shape()[1], t.values());
    }

    Tensor to_tensor() const { return Tensor({rows_, cols_}, data_); }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::vector<double>& values() { return data_; }
    const std::vector<double>& values() const { return data_; }

    Matrix transposed() const {
        Matrix t(cols_, rows_);
        for (std::size_t r = 0; r < rows_; ++r)
            for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
        return t;
    }

    Matrix& operator+=(const Matrix& o) {
        check(rows_ == o.rows_ && cols_ == o.cols_, "matrix add shape mismatch ", rows_, "x",
              cols_, " vs ", o.rows_, "x", o.cols_);
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
        return *this;
    }

    Matrix& operator-=(const Matrix& o) {
        check(rows_ == o.rows_ && cols_ == o.cols_, "matrix sub shape mismatch ", rows_, "x",
              cols_, " vs ", o.rows_, "x", o.cols_);
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
        return *this;
    }

    Matrix& operator*=(double s) {
        for (double& v : data_) v *= s;
        return *this;
    }

    friend Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
    friend Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
    friend Matrix operator*(Matrix a, double s) { return a *= s; }
    friend Matrix operator*(double s, Matrix a) { return a *= s; }

    double frobenius_norm() const {
        double acc = 0.0;
        for (double v : data_) acc += v * v;
        return std::sqrt(acc);
    }

    double max_abs() const {
        double m = 0.0;
        for (double v : data_) m = std::max(m, std::abs(v));
        return m;
    }

private:
    std::size_t rows_, cols_;
    std::vector<double> data_;
};

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

inline double l2_norm(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }

inline double l2_distance(const std::vector<double>& a, const std::vector<double>& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return std::sqrt(acc);
}

}  // namespace facekit
