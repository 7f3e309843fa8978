#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "tocomm/nn/tensor.hpp"

namespace tocomm::nn {

using Rng = std::mt19937_64;

// Independent generator for a named purpose under one run seed.
Rng make_rng(std::uint64_t seed, std::uint64_t stream);

struct Parameter {
    Tensor value;
    Tensor grad;  // same shape as value
};

// Named parameters with gradient accumulators. Iteration is ordered by name,
// so anything derived from a walk over the store is deterministic.
class ParamStore {
public:
    // Throws if the name is already taken.
    Parameter& add(std::string name, Tensor value);

    bool contains(std::string_view name) const;
    Parameter& get(std::string_view name);
    const Parameter& get(std::string_view name) const;

    void zero_grad();
    std::size_t size() const noexcept { return params_.size(); }
    std::size_t scalar_count() const noexcept;
    std::vector<std::string> names() const;

    // Copies every parameter under `from_prefix` into this store, renamed to
    // `to_prefix`. Existing entries with the target names are overwritten.
    void import_prefix(const ParamStore& source, std::string_view from_prefix, std::string_view to_prefix);

    // Bitwise equality of all values under a prefix.
    bool values_equal(const ParamStore& other, std::string_view prefix = {}) const;

    auto begin() { return params_.begin(); }
    auto end() { return params_.end(); }
    auto begin() const { return params_.begin(); }
    auto end() const { return params_.end(); }

private:
    std::map<std::string, Parameter, std::less<>> params_;
};

// Uniform(-a, a) with a = sqrt(6 / (fan_in + fan_out)).
Tensor glorot_uniform(std::size_t fan_out, std::size_t fan_in, Rng& rng);

}  // namespace tocomm::nn
