#pragma once

// Straight-line per-example forward passes with plain loops. They share no
// code with the tape or the kernels and serve as oracles for model losses.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "tocomm/nn/layers.hpp"
#include "tocomm/nn/params.hpp"

namespace tocomm::testing {

inline std::vector<double> dense(const nn::Tensor& w, const nn::Tensor& b, const std::vector<double>& x, bool relu) {
    const std::size_t out = w.shape()[0], in = w.shape()[1];
    std::vector<double> y(out);
    for (std::size_t o = 0; o < out; ++o) {
        double acc = b[o];
        for (std::size_t i = 0; i < in; ++i) acc += w[o * in + i] * x[i];
        y[o] = relu ? std::max(acc, 0.0) : acc;
    }
    return y;
}

inline std::vector<double> mlp_ref(const nn::ParamStore& p, const nn::Mlp& m, std::vector<double> x) {
    for (std::size_t l = 0; l < m.layer_count(); ++l) {
        x = dense(p.get(m.weight_name(l)).value, p.get(m.bias_name(l)).value, x, l + 1 < m.layer_count());
    }
    return x;
}

inline double nearest_level(double v, unsigned bits) {
    const std::size_t count = std::size_t{1} << bits;
    double best = 0.0, best_err = INFINITY;
    for (std::size_t i = 0; i < count; ++i) {
        const double level = -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(count - 1);
        const double err = std::abs(v - level);
        // Computed levels are not exactly symmetric about zero, so a value
        // halfway between two levels is a tie up to rounding; ties keep the lower.
        if (err < best_err - 1e-12) {
            best_err = err;
            best = level;
        }
    }
    return best;
}

inline double ce_ref(const std::vector<double>& logits, std::uint32_t y) {
    double mx = logits[0];
    for (double v : logits) mx = std::max(mx, v);
    double z = 0.0;
    for (double v : logits) z += std::exp(v - mx);
    return std::log(z) + mx - logits[y];
}

}  // namespace tocomm::testing
