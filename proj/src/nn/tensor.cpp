#include "tocomm/nn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <stdexcept>

#include "tocomm/nn/kernels.hpp"

namespace tocomm::nn {

std::size_t shape_product(const std::vector<std::size_t>& shape) noexcept {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const std::vector<std::size_t>& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += "x";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

Tensor::Tensor(std::vector<std::size_t> shape, double fill)
    : shape_(std::move(shape)), data_(shape_product(shape_), fill) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    if (shape_product(shape_) != data_.size()) {
        throw std::invalid_argument("tensor: shape " + shape_string(shape_) + " does not hold " +
                                    std::to_string(data_.size()) + " values");
    }
}

Tensor Tensor::vector(std::initializer_list<double> values) {
    return Tensor({values.size()}, std::vector<double>(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, double fill) {
    return Tensor({rows, cols}, fill);
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::initializer_list<double> values) {
    return Tensor({rows, cols}, std::vector<double>(values));
}

Tensor Tensor::scalar(double value) { return Tensor({1}, std::vector<double>{value}); }

std::size_t Tensor::rows() const noexcept {
    if (shape_.empty()) return data_.empty() ? 0 : 1;
    if (shape_.size() == 1) return 1;
    return shape_[0];
}

std::size_t Tensor::cols() const noexcept {
    if (shape_.empty()) return data_.size();
    if (shape_.size() == 1) return shape_[0];
    return shape_[0] == 0 ? 0 : data_.size() / shape_[0];
}

std::span<double> Tensor::row(std::size_t r) {
    const std::size_t c = cols();
    return std::span<double>(data_).subspan(r * c, c);
}

std::span<const double> Tensor::row(std::size_t r) const {
    const std::size_t c = cols();
    return std::span<const double>(data_).subspan(r * c, c);
}

double Tensor::item() const {
    if (data_.size() != 1) {
        throw std::invalid_argument("tensor: item() on shape " + shape_string(shape_));
    }
    return data_[0];
}

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

Tensor Tensor::reshaped(std::vector<std::size_t> shape) const { return Tensor(std::move(shape), data_); }

bool Tensor::all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Tensor gather_rows(const Tensor& source, std::span<const std::size_t> indices) {
    const std::size_t c = source.cols();
    Tensor out = Tensor::matrix(indices.size(), c);
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] >= source.rows()) throw std::out_of_range("gather_rows: row index out of range");
        std::copy_n(source.raw() + indices[i] * c, c, out.raw() + i * c);
    }
    return out;
}

Tensor concat_cols(std::span<const Tensor> parts) {
    if (parts.empty()) return {};
    const std::size_t rows = parts.front().rows();
    std::size_t total = 0;
    for (const auto& p : parts) {
        if (p.rows() != rows) throw std::invalid_argument("concat_cols: row count mismatch");
        total += p.cols();
    }
    Tensor out = Tensor::matrix(rows, total);
    for (std::size_t r = 0; r < rows; ++r) {
        double* dst = out.raw() + r * total;
        for (const auto& p : parts) {
            const auto src = p.row(r);
            dst = std::copy(src.begin(), src.end(), dst);
        }
    }
    return out;
}

Tensor slice_cols(const Tensor& source, std::size_t begin, std::size_t count) {
    if (begin + count > source.cols()) throw std::out_of_range("slice_cols: range exceeds width");
    Tensor out = Tensor::matrix(source.rows(), count);
    for (std::size_t r = 0; r < source.rows(); ++r) {
        std::copy_n(source.row(r).begin() + static_cast<std::ptrdiff_t>(begin), count, out.row(r).begin());
    }
    return out;
}

Tensor linear_forward(const Tensor& w, const Tensor& b, const Tensor& x) {
    if (w.rank() != 2 || b.size() != w.shape()[0] || x.size() != w.shape()[1]) {
        throw std::invalid_argument("linear_forward: shapes W" + shape_string(w.shape()) + " b" +
                                    shape_string(b.shape()) + " x" + shape_string(x.shape()) +
                                    " do not conform");
    }
    Tensor y({w.shape()[0]});
    kernels::active().gemm_nt(x.raw(), w.raw(), b.raw(), y.raw(), 1, w.shape()[1], w.shape()[0]);
    return y;
}

}  // namespace tocomm::nn
