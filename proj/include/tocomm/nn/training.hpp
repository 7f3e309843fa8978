#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>

namespace tocomm::nn {

// A training loop met a non-finite value; carries the failing step.
class TrainingDivergence : public std::runtime_error {
public:
    TrainingDivergence(std::string what, std::uint64_t step)
        : std::runtime_error(std::move(what) + " at step " + std::to_string(step)), step_(step) {}
    std::uint64_t step() const noexcept { return step_; }

private:
    std::uint64_t step_;
};

// Per-step scalars shared by every trainer. `task` is the main cross-entropy,
// `side` the trainer-specific regularizer (KL or auxiliary CE), `bits` the
// per-example communication cost charged by the loss.
struct StepRecord {
    std::uint64_t step = 0;
    double loss = 0.0;
    double task = 0.0;
    double side = 0.0;
    double bits = 0.0;

    bool operator==(const StepRecord&) const = default;
};

using StepObserver = std::function<void(const StepRecord&)>;

}  // namespace tocomm::nn
