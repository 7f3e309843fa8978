#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "tocomm/nn/tape.hpp"
#include "tocomm/nn/tensor.hpp"

namespace tocomm::coding {

// Uniform grid of 2^n levels spanning [-1, 1] inclusive.
class QuantizerSpec {
public:
    QuantizerSpec(unsigned bits, std::size_t dims);

    unsigned bits() const noexcept { return bits_; }
    std::size_t dims() const noexcept { return dims_; }
    std::uint32_t level_count() const noexcept { return std::uint32_t{1} << bits_; }
    double level(std::uint32_t index) const;
    std::vector<double> levels() const;
    double step() const noexcept { return 2.0 / static_cast<double>(level_count() - 1); }

    // Clamps to [-1, 1]; exact midpoints go to the lower index.
    std::uint32_t index_of(double v) const noexcept;

    bool operator==(const QuantizerSpec&) const = default;

private:
    unsigned bits_;
    std::size_t dims_;
};

inline constexpr unsigned kMaxBits = 16;

// bits * dims; throws std::invalid_argument when either is zero.
std::uint64_t bit_cost(unsigned bits, std::size_t dims);
inline std::uint64_t bit_cost(const QuantizerSpec& spec) { return bit_cost(spec.bits(), spec.dims()); }

struct QuantizedCode {
    std::vector<std::uint32_t> indices;
    std::vector<double> dequantized;
    std::uint64_t bit_cost = 0;
};

QuantizedCode quantize(std::span<const double> v, const QuantizerSpec& spec);
std::vector<double> dequantize(std::span<const std::uint32_t> indices, const QuantizerSpec& spec);

// Row-wise over a [M x d] matrix.
nn::Tensor quantize_values(const nn::Tensor& v, const QuantizerSpec& spec);
std::vector<std::uint32_t> quantize_indices(const nn::Tensor& v, const QuantizerSpec& spec);

// Clipped straight-through surrogate: upstream where |v| <= 1, else 0.
nn::Tensor quantize_backward(const nn::Tensor& upstream, const nn::Tensor& v);
// Records the quantizer on the tape; forward value is the dequantized level.
nn::Var quantize_ste(nn::Tape& tape, nn::Var v, const QuantizerSpec& spec);

// MSB-first n-bit fields, zero-padded to a byte boundary.
std::vector<std::uint8_t> pack_bits(std::span<const std::uint32_t> indices, unsigned bits);
std::vector<std::uint32_t> unpack_bits(std::span<const std::uint8_t> bytes, unsigned bits, std::size_t count);
std::size_t packed_size(std::size_t count, unsigned bits) noexcept;

}  // namespace tocomm::coding
