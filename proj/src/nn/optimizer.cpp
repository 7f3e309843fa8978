#include "tocomm/nn/optimizer.hpp"

#include <cmath>
#include <stdexcept>

#include "tocomm/nn/kernels.hpp"

namespace tocomm::nn {

OptimizerKind parse_optimizer(const std::string& name) {
    if (name == "sgd") return OptimizerKind::sgd;
    if (name == "adam") return OptimizerKind::adam;
    throw std::invalid_argument("unknown optimizer '" + name + "' (expected sgd or adam)");
}

std::string to_string(OptimizerKind kind) { return kind == OptimizerKind::sgd ? "sgd" : "adam"; }

Optimizer::Optimizer(OptimizerConfig config, std::string prefix) : config_(config), prefix_(std::move(prefix)) {
    if (!(config_.learning_rate > 0.0)) throw std::invalid_argument("optimizer: learning rate must be positive");
}

void Optimizer::step(ParamStore& params) {
    ++step_;
    const auto& k = kernels::active();
    kernels::AdamHyper h{config_.learning_rate,
                         config_.beta1,
                         config_.beta2,
                         config_.epsilon,
                         1.0 - std::pow(config_.beta1, static_cast<double>(step_)),
                         1.0 - std::pow(config_.beta2, static_cast<double>(step_))};
    for (auto& [name, p] : params) {
        if (!name.starts_with(prefix_)) continue;
        if (p.grad.size() != p.value.size()) throw std::logic_error("optimizer: missing gradient for '" + name + "'");
        if (config_.kind == OptimizerKind::sgd) {
            for (std::size_t i = 0; i < p.value.size(); ++i) {
                p.value[i] -= config_.learning_rate * p.grad[i];
                p.grad[i] = 0.0;
            }
            continue;
        }
        auto it = moments_.find(name);
        if (it == moments_.end()) {
            it = moments_.emplace(name, Moments{Tensor(p.value.shape(), 0.0), Tensor(p.value.shape(), 0.0)}).first;
        }
        k.adam_step(p.value.raw(), p.grad.raw(), it->second.m.raw(), it->second.v.raw(), p.value.size(), h);
    }
}

}  // namespace tocomm::nn
