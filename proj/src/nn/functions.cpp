#include "tocomm/nn/functions.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace tocomm::nn {

double softplus(double x) noexcept { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double sigmoid(double x) noexcept {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

Tensor softmax_rows(const Tensor& logits) {
    Tensor p = Tensor::matrix(logits.rows(), logits.cols());
    for (std::size_t r = 0; r < logits.rows(); ++r) {
        const auto row = logits.row(r);
        const double mx = *std::max_element(row.begin(), row.end());
        double z = 0.0;
        for (double v : row) z += std::exp(v - mx);
        const double lse = mx + std::log(z);
        auto out = p.row(r);
        for (std::size_t c = 0; c < row.size(); ++c) out[c] = std::exp(row[c] - lse);
    }
    return p;
}

std::vector<double> cross_entropy_rows(const Tensor& logits, std::span<const std::uint32_t> labels) {
    if (labels.size() != logits.rows()) throw std::invalid_argument("cross_entropy: label count does not match rows");
    std::vector<double> out(labels.size());
    for (std::size_t r = 0; r < labels.size(); ++r) {
        const auto row = logits.row(r);
        if (labels[r] >= row.size()) {
            throw std::out_of_range("cross_entropy: label " + std::to_string(labels[r]) + " outside [0, " +
                                    std::to_string(row.size()) + ")");
        }
        const double mx = *std::max_element(row.begin(), row.end());
        double z = 0.0;
        for (double v : row) z += std::exp(v - mx);
        out[r] = mx + std::log(z) - row[labels[r]];
    }
    return out;
}

std::vector<std::uint32_t> argmax_rows(const Tensor& scores) {
    std::vector<std::uint32_t> out(scores.rows());
    for (std::size_t r = 0; r < scores.rows(); ++r) {
        const auto row = scores.row(r);
        out[r] = static_cast<std::uint32_t>(std::max_element(row.begin(), row.end()) - row.begin());
    }
    return out;
}

}  // namespace tocomm::nn
