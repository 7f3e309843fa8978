#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "tocomm/data/dataset.hpp"
#include "tocomm/nn/params.hpp"

namespace tocomm::data {

// p(x_1..x_K, y) = p(y) * prod_k p(x_k | y). conditionals[k][y][x].
struct DiscreteTask {
    std::vector<double> prior;
    std::vector<std::vector<std::vector<double>>> conditionals;

    std::size_t num_classes() const noexcept { return prior.size(); }
    std::size_t devices() const noexcept { return conditionals.size(); }
    std::size_t alphabet(std::size_t k) const { return conditionals.at(k).at(0).size(); }

    // Throws std::invalid_argument on a malformed or non-normalized table.
    void validate(double tolerance = 1e-9) const;
};

inline constexpr std::size_t kMaxSyntheticClasses = 8;
inline constexpr std::size_t kMaxSyntheticAlphabet = 16;
inline constexpr std::size_t kMaxSyntheticDevices = 3;

// Random table; each distribution is a normalized vector of Exp(1)^sharpness draws.
DiscreteTask random_discrete_task(std::size_t num_classes, std::span<const std::size_t> alphabets, nn::Rng& rng,
                                  double sharpness = 2.0);

struct SyntheticDataset {
    DiscreteTask table;
    std::vector<std::vector<std::uint32_t>> symbols;  // [K][N]
    MultiViewDataset one_hot;                         // view k is [N x |X_k|]
};

SyntheticDataset synth_discrete(const DiscreteTask& table, std::size_t n, nn::Rng& rng);

// Visits every (x_1..x_K, y) with its joint probability.
void for_each_outcome(const DiscreteTask& table,
                      const std::function<void(std::span<const std::uint32_t> xs, std::uint32_t y, double p)>& visit);

// Exact I(Y; f(X_1..X_K)) in nats for a deterministic map f into a finite code set.
double exact_label_information(const DiscreteTask& table,
                               const std::function<std::uint64_t(std::span<const std::uint32_t>)>& code);
double exact_label_information_view(const DiscreteTask& table, std::size_t k);
double label_entropy(const DiscreteTask& table);

// Plug-in I(A; B) in nats from paired samples.
double plugin_mutual_information(std::span<const std::uint64_t> a, std::span<const std::uint32_t> b);

}  // namespace tocomm::data
