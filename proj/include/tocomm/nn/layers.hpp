#pragma once

#include <string>
#include <vector>

#include "tocomm/nn/params.hpp"
#include "tocomm/nn/tape.hpp"

namespace tocomm::nn {

struct MlpShape {
    std::size_t input = 0;
    std::vector<std::size_t> hidden;
    std::size_t output = 0;
};

// Stack of fully connected layers, ReLU between layers, linear output.
// Parameters live in a ParamStore under "<prefix>/l<i>/w" and "<prefix>/l<i>/b".
class Mlp {
public:
    Mlp() = default;
    Mlp(std::string prefix, MlpShape shape);

    void init(ParamStore& params, Rng& rng) const;
    // Registers the parameters with zero weights and biases.
    void init_zero(ParamStore& params) const;
    Var forward(Tape& tape, ParamStore& params, Var x) const;
    // Tape-free forward pass; bitwise equal to forward() on the same input.
    Tensor infer(const ParamStore& params, const Tensor& x) const;

    const std::string& prefix() const noexcept { return prefix_; }
    const MlpShape& shape() const noexcept { return shape_; }
    std::size_t layer_count() const noexcept { return shape_.hidden.size() + 1; }
    std::string weight_name(std::size_t layer) const;
    std::string bias_name(std::size_t layer) const;

private:
    std::size_t fan_in(std::size_t layer) const;
    std::size_t fan_out(std::size_t layer) const;

    std::string prefix_;
    MlpShape shape_;
};

}  // namespace tocomm::nn
