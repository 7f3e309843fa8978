#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "tocomm/data/dataset.hpp"
#include "tocomm/nn/layers.hpp"
#include "tocomm/nn/optimizer.hpp"
#include "tocomm/nn/params.hpp"
#include "tocomm/nn/tape.hpp"
#include "tocomm/nn/training.hpp"

namespace tocomm::vib {

struct VibArchitecture {
    std::size_t input = 392;
    std::vector<std::size_t> trunk_hidden{256, 256};
    std::size_t feature_dim = 64;
    std::vector<std::size_t> classifier_hidden{256};
    std::size_t num_classes = 10;

    bool operator==(const VibArchitecture&) const = default;
};

struct VibConfig {
    double gamma = 1e-4;
    std::size_t batch_size = 100;
    std::size_t steps = 10000;
    std::size_t samples_per_example = 1;
    nn::OptimizerConfig optimizer;
    std::uint64_t seed = 0;

    void validate() const;
};

struct GaussianVars {
    nn::Var mu;
    nn::Var sigma;
};

// Gaussian encoder p(z|x) = N(mu(x), diag sigma(x)^2) plus a variational
// classifier over z. The trunk emits 2d values: mu, then the pre-softplus sigma.
class VibModel {
public:
    VibModel(std::string prefix, VibArchitecture arch);

    static std::string device_prefix(std::size_t k) { return "vib/k" + std::to_string(k); }

    void init(nn::ParamStore& params, nn::Rng& rng) const;

    GaussianVars encode(nn::Tape& tape, nn::ParamStore& params, nn::Var x) const;
    nn::Var classify(nn::Tape& tape, nn::ParamStore& params, nn::Var z) const;

    std::pair<nn::Tensor, nn::Tensor> encode_gaussian(const nn::ParamStore& params, const nn::Tensor& x) const;
    // Deterministic feature handed downstream: the posterior mean.
    nn::Tensor features(const nn::ParamStore& params, const nn::Tensor& x) const;
    nn::Tensor logits_at_mean(const nn::ParamStore& params, const nn::Tensor& x) const;

    const std::string& prefix() const noexcept { return prefix_; }
    const VibArchitecture& architecture() const noexcept { return arch_; }
    const nn::Mlp& trunk() const noexcept { return trunk_; }
    const nn::Mlp& classifier() const noexcept { return classifier_; }

private:
    std::string prefix_;
    VibArchitecture arch_;
    nn::Mlp trunk_;
    nn::Mlp classifier_;
};

// z = mu + sigma * eps. Shapes must agree.
nn::Var reparameterize(nn::Tape& tape, nn::Var mu, nn::Var sigma, const nn::Tensor& eps);
nn::Tensor reparameterize(const nn::Tensor& mu, const nn::Tensor& sigma, const nn::Tensor& eps);

// Sum over dimensions of KL(N(mu_i, sigma_i^2) || N(0, 1)), nats.
double kl_std_normal(std::span<const double> mu, std::span<const double> sigma);

struct VibLoss {
    nn::Var total;  // mean CE + gamma * mean KL
    nn::Var ce;
    nn::Var kl;
};

// `eps` is [M x d], drawn by the caller so gradients can be checked with it fixed.
VibLoss vib_loss(nn::Tape& tape, nn::ParamStore& params, const VibModel& model, const nn::Tensor& x,
                 std::span<const std::uint32_t> labels, const nn::Tensor& eps, double gamma);

struct VibTrainResult {
    std::vector<nn::StepRecord> trace;  // side = mean KL (nats)
};

// Registers fresh parameters under the model prefix and runs the configured steps.
VibTrainResult train_vib(const nn::Tensor& x, std::span<const std::uint32_t> labels, const VibModel& model,
                         nn::ParamStore& params, const VibConfig& config, const nn::StepObserver& observer = {});

// Replaces each device view with its posterior-mean feature, one model per device.
data::MultiViewDataset extract_features(std::span<const VibModel> models, const nn::ParamStore& params,
                                        const data::MultiViewDataset& views);

nlohmann::json to_json(const VibArchitecture& arch);
VibArchitecture architecture_from_json(const nlohmann::json& j);

}  // namespace tocomm::vib
