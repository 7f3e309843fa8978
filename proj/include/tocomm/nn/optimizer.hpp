#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "tocomm/nn/params.hpp"

namespace tocomm::nn {

enum class OptimizerKind { sgd, adam };

OptimizerKind parse_optimizer(const std::string& name);
std::string to_string(OptimizerKind kind);

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::adam;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

// Updates every parameter whose name starts with the bound prefix (all
// parameters when the prefix is empty). Parameters outside the prefix are left
// untouched, gradients included.
class Optimizer {
public:
    explicit Optimizer(OptimizerConfig config, std::string prefix = {});

    // Applies one update, zeroes the updated gradients, bumps the step count.
    void step(ParamStore& params);

    std::uint64_t steps() const noexcept { return step_; }
    const OptimizerConfig& config() const noexcept { return config_; }

private:
    struct Moments {
        Tensor m;
        Tensor v;
    };

    OptimizerConfig config_;
    std::string prefix_;
    std::uint64_t step_ = 0;
    std::map<std::string, Moments, std::less<>> moments_;
};

}  // namespace tocomm::nn
