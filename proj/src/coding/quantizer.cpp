#include "tocomm/coding/quantizer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace tocomm::coding {

QuantizerSpec::QuantizerSpec(unsigned bits, std::size_t dims) : bits_(bits), dims_(dims) {
    if (bits == 0 || bits > kMaxBits) throw std::invalid_argument("quantizer: bits must be in 1..16");
    if (dims == 0) throw std::invalid_argument("quantizer: dims must be positive");
}

double QuantizerSpec::level(std::uint32_t index) const {
    if (index >= level_count()) throw std::out_of_range("quantizer: level index out of range");
    return -1.0 + 2.0 * static_cast<double>(index) / static_cast<double>(level_count() - 1);
}

std::vector<double> QuantizerSpec::levels() const {
    std::vector<double> out(level_count());
    for (std::uint32_t i = 0; i < level_count(); ++i) out[i] = level(i);
    return out;
}

std::uint32_t QuantizerSpec::index_of(double v) const noexcept {
    const double top = static_cast<double>(level_count() - 1);
    // NaN maps to index 0 rather than propagating into an invalid cast.
    const double c = std::isnan(v) ? -1.0 : std::clamp(v, -1.0, 1.0);
    const double t = (c + 1.0) * 0.5 * top;
    const double i = std::ceil(t - 0.5);
    return static_cast<std::uint32_t>(std::clamp(i, 0.0, top));
}

std::uint64_t bit_cost(unsigned bits, std::size_t dims) {
    if (bits == 0 || dims == 0) throw std::invalid_argument("bit_cost: bits and dims must be positive");
    return std::uint64_t{bits} * dims;
}

QuantizedCode quantize(std::span<const double> v, const QuantizerSpec& spec) {
    if (v.size() != spec.dims()) {
        throw std::invalid_argument("quantize: got " + std::to_string(v.size()) + " values for " +
                                    std::to_string(spec.dims()) + " dims");
    }
    QuantizedCode code;
    code.indices.reserve(v.size());
    for (double x : v) code.indices.push_back(spec.index_of(x));
    code.dequantized = dequantize(code.indices, spec);
    code.bit_cost = bit_cost(spec);
    return code;
}

std::vector<double> dequantize(std::span<const std::uint32_t> indices, const QuantizerSpec& spec) {
    std::vector<double> out;
    out.reserve(indices.size());
    for (std::uint32_t i : indices) out.push_back(spec.level(i));
    return out;
}

nn::Tensor quantize_values(const nn::Tensor& v, const QuantizerSpec& spec) {
    if (v.cols() != spec.dims()) throw std::invalid_argument("quantize: column count does not match dims");
    nn::Tensor out = v;
    for (double& x : out.data()) x = spec.level(spec.index_of(x));
    return out;
}

std::vector<std::uint32_t> quantize_indices(const nn::Tensor& v, const QuantizerSpec& spec) {
    if (v.cols() != spec.dims()) throw std::invalid_argument("quantize: column count does not match dims");
    std::vector<std::uint32_t> out;
    out.reserve(v.size());
    for (double x : v.data()) out.push_back(spec.index_of(x));
    return out;
}

nn::Tensor quantize_backward(const nn::Tensor& upstream, const nn::Tensor& v) {
    if (upstream.shape() != v.shape()) throw std::invalid_argument("quantize_backward: shape mismatch");
    nn::Tensor g = upstream;
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (!(std::abs(v[i]) <= 1.0)) g[i] = 0.0;
    }
    return g;
}

nn::Var quantize_ste(nn::Tape& tape, nn::Var v, const QuantizerSpec& spec) {
    return tape.surrogate(v, quantize_values(tape.value(v), spec), quantize_backward, "quantize");
}

std::size_t packed_size(std::size_t count, unsigned bits) noexcept { return (count * bits + 7) / 8; }

std::vector<std::uint8_t> pack_bits(std::span<const std::uint32_t> indices, unsigned bits) {
    if (bits == 0 || bits > kMaxBits) throw std::invalid_argument("pack_bits: bits must be in 1..16");
    std::vector<std::uint8_t> out(packed_size(indices.size(), bits), 0);
    std::size_t pos = 0;
    for (std::uint32_t idx : indices) {
        if (idx >> bits) {
            throw std::out_of_range("pack_bits: index " + std::to_string(idx) + " does not fit in " +
                                    std::to_string(bits) + " bits");
        }
        for (unsigned b = bits; b-- > 0; ++pos) {
            if ((idx >> b) & 1u) out[pos / 8] |= static_cast<std::uint8_t>(0x80u >> (pos % 8));
        }
    }
    return out;
}

std::vector<std::uint32_t> unpack_bits(std::span<const std::uint8_t> bytes, unsigned bits, std::size_t count) {
    if (bits == 0 || bits > kMaxBits) throw std::invalid_argument("unpack_bits: bits must be in 1..16");
    if (bytes.size() < packed_size(count, bits)) throw std::invalid_argument("unpack_bits: truncated byte string");
    std::vector<std::uint32_t> out(count, 0);
    std::size_t pos = 0;
    for (auto& idx : out) {
        for (unsigned b = 0; b < bits; ++b, ++pos) {
            idx = (idx << 1) | ((bytes[pos / 8] >> (7 - pos % 8)) & 1u);
        }
    }
    return out;
}

}  // namespace tocomm::coding
