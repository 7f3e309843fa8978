#include "tocomm/nn/layers.hpp"

#include <stdexcept>

#include "tocomm/nn/kernels.hpp"

namespace tocomm::nn {

Mlp::Mlp(std::string prefix, MlpShape shape) : prefix_(std::move(prefix)), shape_(std::move(shape)) {
    if (shape_.input == 0 || shape_.output == 0) throw std::invalid_argument("mlp: zero-width input or output");
    for (std::size_t h : shape_.hidden) {
        if (h == 0) throw std::invalid_argument("mlp: zero-width hidden layer");
    }
}

std::string Mlp::weight_name(std::size_t layer) const { return prefix_ + "/l" + std::to_string(layer) + "/w"; }
std::string Mlp::bias_name(std::size_t layer) const { return prefix_ + "/l" + std::to_string(layer) + "/b"; }

std::size_t Mlp::fan_in(std::size_t layer) const { return layer == 0 ? shape_.input : shape_.hidden[layer - 1]; }

std::size_t Mlp::fan_out(std::size_t layer) const {
    return layer == shape_.hidden.size() ? shape_.output : shape_.hidden[layer];
}

void Mlp::init(ParamStore& params, Rng& rng) const {
    for (std::size_t l = 0; l < layer_count(); ++l) {
        params.add(weight_name(l), glorot_uniform(fan_out(l), fan_in(l), rng));
        params.add(bias_name(l), Tensor({fan_out(l)}, 0.0));
    }
}

void Mlp::init_zero(ParamStore& params) const {
    for (std::size_t l = 0; l < layer_count(); ++l) {
        params.add(weight_name(l), Tensor::matrix(fan_out(l), fan_in(l)));
        params.add(bias_name(l), Tensor({fan_out(l)}, 0.0));
    }
}

Var Mlp::forward(Tape& tape, ParamStore& params, Var x) const {
    Var h = x;
    for (std::size_t l = 0; l < layer_count(); ++l) {
        h = tape.linear(h, tape.parameter(params, weight_name(l)), tape.parameter(params, bias_name(l)));
        if (l + 1 < layer_count()) h = tape.relu(h);
    }
    return h;
}

Tensor Mlp::infer(const ParamStore& params, const Tensor& x) const {
    if (x.cols() != shape_.input) {
        throw std::invalid_argument("mlp " + prefix_ + ": input width " + std::to_string(x.cols()) + ", expected " +
                                    std::to_string(shape_.input));
    }
    const auto& k = kernels::active();
    Tensor h = x;
    for (std::size_t l = 0; l < layer_count(); ++l) {
        const Tensor& w = params.get(weight_name(l)).value;
        const Tensor& b = params.get(bias_name(l)).value;
        Tensor y = Tensor::matrix(h.rows(), fan_out(l));
        k.gemm_nt(h.raw(), w.raw(), b.raw(), y.raw(), h.rows(), fan_in(l), fan_out(l));
        if (l + 1 < layer_count()) {
            for (double& v : y.data()) v = v > 0.0 ? v : 0.0;
        }
        h = std::move(y);
    }
    return h;
}

}  // namespace tocomm::nn
