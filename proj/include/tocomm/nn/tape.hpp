#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "tocomm/nn/params.hpp"
#include "tocomm/nn/tensor.hpp"

namespace tocomm::nn {

// Raised when a forward value or loss leaves the finite range.
class NonFiniteError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Handle to a value recorded on a Tape.
struct Var {
    std::size_t id = static_cast<std::size_t>(-1);
    bool valid() const noexcept { return id != static_cast<std::size_t>(-1); }
};

// Computes the gradient w.r.t. the input of a non-differentiable node from the
// upstream gradient and the node's input value.
using SurrogateGrad = std::function<Tensor(const Tensor& upstream, const Tensor& input)>;

// Reverse-mode gradient tape. Every op evaluates eagerly, records its
// backward rule, and checks its output for NaN/Inf. Matrices are [rows x cols];
// per-example quantities are [M x 1] columns.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var constant(Tensor value);
    // Leaf bound to a stored parameter; backward accumulates into its grad.
    Var parameter(ParamStore& store, std::string_view name);

    const Tensor& value(Var v) const;
    // Gradient after backward(); zeros if none reached the node.
    Tensor grad(Var v) const;
    std::size_t size() const noexcept { return nodes_.size(); }

    // x [M x in] (or [in]), w [out x in], b [out] -> [M x out]
    Var linear(Var x, Var w, Var b);
    Var relu(Var x);
    Var softplus(Var x);
    Var tanh(Var x);
    Var add(Var a, Var b);
    Var mul(Var a, Var b);
    Var scale(Var a, double factor);
    Var add_scalar(Var a, double offset);
    // x [M x d] scaled per row by col [M x 1].
    Var mul_rows(Var x, Var col);
    Var concat_cols(std::span<const Var> parts);
    Var slice_cols(Var x, std::size_t begin, std::size_t count);
    // [M x d] -> [M x 1]
    Var row_sum(Var x);
    // Mean over all elements -> [1]
    Var mean(Var x);
    Var sum(Var x);
    // Per-row -log softmax(logits)[label], natural log. [M x C] -> [M x 1]
    Var cross_entropy(Var logits, std::span<const std::uint32_t> labels);
    // Per-row KL(N(mu, diag sigma^2) || N(0, I)) in nats. -> [M x 1]
    Var kl_std_normal(Var mu, Var sigma);
    // Non-differentiable node with a declared backward override.
    Var surrogate(Var x, Tensor forward_value, SurrogateGrad backward, std::string_view op_name);

    // Root must hold exactly one element. A tape can be differentiated once.
    void backward(Var root);

private:
    struct Node {
        Tensor value;
        Tensor grad;
        bool requires_grad = false;
        Parameter* param = nullptr;
        std::function<void(Tape&, const Tensor&)> backprop;
    };

    Var record(Tensor value, std::string_view op, std::vector<Var> inputs,
               std::function<void(Tape&, const Tensor&)> backprop);
    const Node& node(Var v) const;
    bool needs_grad(Var v) const { return nodes_[v.id].requires_grad; }
    Tensor& grad_slot(Var v);

    std::vector<Node> nodes_;
    bool differentiated_ = false;
};

}  // namespace tocomm::nn
