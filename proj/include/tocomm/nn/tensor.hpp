#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace tocomm::nn {

// Dense row-major array of doubles. Rank-1 tensors behave as a single row
// wherever a matrix is expected.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0);
    Tensor(std::vector<std::size_t> shape, std::vector<double> data);

    static Tensor vector(std::initializer_list<double> values);
    static Tensor matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    static Tensor matrix(std::size_t rows, std::size_t cols, std::initializer_list<double> values);
    static Tensor scalar(double value);

    const std::vector<std::size_t>& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    // Matrix view: rank 1 -> 1 x n, rank >= 2 -> shape[0] x (product of the rest).
    std::size_t rows() const noexcept;
    std::size_t cols() const noexcept;

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }
    double* raw() noexcept { return data_.data(); }
    const double* raw() const noexcept { return data_.data(); }

    std::span<double> row(std::size_t r);
    std::span<const double> row(std::size_t r) const;

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }
    double& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
    double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

    // Scalar value of a one-element tensor.
    double item() const;

    void fill(double value);
    Tensor reshaped(std::vector<std::size_t> shape) const;
    bool all_finite() const noexcept;

    bool operator==(const Tensor& other) const = default;

private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

std::size_t shape_product(const std::vector<std::size_t>& shape) noexcept;
std::string shape_string(const std::vector<std::size_t>& shape);

// Gathers the listed rows of a matrix into a new [indices.size() x cols] matrix.
Tensor gather_rows(const Tensor& source, std::span<const std::size_t> indices);

// Horizontal concatenation of matrices with equal row counts.
Tensor concat_cols(std::span<const Tensor> parts);

Tensor slice_cols(const Tensor& source, std::size_t begin, std::size_t count);

// Single-vector dense layer, W [out x in], b [out], x [in].
Tensor linear_forward(const Tensor& w, const Tensor& b, const Tensor& x);

}  // namespace tocomm::nn
