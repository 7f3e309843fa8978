#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "tocomm/nn/tensor.hpp"

namespace tocomm::nn {

double softplus(double x) noexcept;
double sigmoid(double x) noexcept;

// Row-wise softmax of a [M x C] matrix.
Tensor softmax_rows(const Tensor& logits);
// Per-row -log softmax(logits)[label] in nats; same arithmetic as Tape::cross_entropy.
std::vector<double> cross_entropy_rows(const Tensor& logits, std::span<const std::uint32_t> labels);
// Lowest index among tied maxima.
std::vector<std::uint32_t> argmax_rows(const Tensor& scores);

}  // namespace tocomm::nn
