#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace bsde {

// Dense row-major (rows x cols) array of doubles.
class Array2 {
    std::size_t rows_ = 0, cols_ = 0;
    std::vector<double> data_;

public:
    Array2() = default;
    Array2(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
    std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    bool empty() const { return data_.empty(); }

    std::span<const double> flat() const { return data_; }
    std::span<double> flat() { return data_; }
};

// Dense (n1 x n2 x n3) array, innermost index contiguous.
class Array3 {
    std::size_t n1_ = 0, n2_ = 0, n3_ = 0;
    std::vector<double> data_;

public:
    Array3() = default;
    Array3(std::size_t n1, std::size_t n2, std::size_t n3, double fill = 0.0)
        : n1_(n1), n2_(n2), n3_(n3), data_(n1 * n2 * n3, fill) {}

    double& operator()(std::size_t i, std::size_t j, std::size_t k) {
        return data_[(i * n2_ + j) * n3_ + k];
    }
    double operator()(std::size_t i, std::size_t j, std::size_t k) const {
        return data_[(i * n2_ + j) * n3_ + k];
    }

    std::span<double> slice(std::size_t i, std::size_t j) {
        return {data_.data() + (i * n2_ + j) * n3_, n3_};
    }
    std::span<const double> slice(std::size_t i, std::size_t j) const {
        return {data_.data() + (i * n2_ + j) * n3_, n3_};
    }

    std::size_t size1() const { return n1_; }
    std::size_t size2() const { return n2_; }
    std::size_t size3() const { return n3_; }
    bool empty() const { return data_.empty(); }

    std::span<const double> flat() const { return data_; }
};

} // namespace bsde
