#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "tocomm/coding/quantizer.hpp"
#include "tocomm/data/dataset.hpp"
#include "tocomm/nn/layers.hpp"
#include "tocomm/nn/optimizer.hpp"
#include "tocomm/nn/tape.hpp"
#include "tocomm/nn/training.hpp"

namespace tocomm::vddib {

// Device-side map z -> tanh(f(z)) -> uniform quantizer.
class DeviceEncoder {
public:
    DeviceEncoder(std::string prefix, std::size_t feature_dim, std::vector<std::size_t> hidden, coding::QuantizerSpec spec);

    void init(nn::ParamStore& params, nn::Rng& rng) const { net_.init(params, rng); }

    nn::Var bounded(nn::Tape& tape, nn::ParamStore& params, nn::Var z) const;
    // Dequantized code with the clipped straight-through gradient.
    nn::Var encode(nn::Tape& tape, nn::ParamStore& params, nn::Var z) const;

    nn::Tensor bounded(const nn::ParamStore& params, const nn::Tensor& z) const;
    nn::Tensor code_values(const nn::ParamStore& params, const nn::Tensor& z) const;
    std::vector<std::uint32_t> code_indices(const nn::ParamStore& params, const nn::Tensor& z) const;
    coding::QuantizedCode encode_device(const nn::ParamStore& params, std::span<const double> z) const;

    const coding::QuantizerSpec& spec() const noexcept { return spec_; }
    const nn::Mlp& net() const noexcept { return net_; }

private:
    nn::Mlp net_;
    coding::QuantizerSpec spec_;
};

struct DeviceBudget {
    unsigned bits = 1;
    std::size_t dims = 5;

    bool operator==(const DeviceBudget&) const = default;
};

struct VddibArchitecture {
    std::vector<std::size_t> feature_dims{64, 64};
    std::vector<DeviceBudget> budgets{{1, 5}, {1, 5}};
    std::vector<std::size_t> encoder_hidden{256};
    std::vector<std::size_t> joint_hidden{256, 256};
    std::vector<std::size_t> aux_hidden{256};
    std::size_t num_classes = 10;

    void validate() const;
    std::uint64_t total_bits() const;
};

struct VddibConfig {
    double beta = 0.01;
    std::size_t batch_size = 100;
    std::size_t steps = 10000;
    nn::OptimizerConfig optimizer;
    std::uint64_t seed = 0;

    void validate() const;
};

class VddibModel {
public:
    explicit VddibModel(VddibArchitecture arch);

    static constexpr const char* kPrefix = "vddib";
    static std::string encoder_prefix(std::size_t k) { return "vddib/enc/k" + std::to_string(k); }
    static std::string aux_prefix(std::size_t k) { return "vddib/aux/k" + std::to_string(k); }
    static std::string joint_prefix() { return "vddib/joint"; }

    void init(nn::ParamStore& params, nn::Rng& rng) const;

    std::size_t devices() const noexcept { return encoders_.size(); }
    const DeviceEncoder& encoder(std::size_t k) const { return encoders_.at(k); }
    const nn::Mlp& joint() const noexcept { return joint_; }
    const nn::Mlp& aux(std::size_t k) const { return aux_.at(k); }
    const VddibArchitecture& architecture() const noexcept { return arch_; }

    std::vector<nn::Var> encode_all(nn::Tape& tape, nn::ParamStore& params, std::span<const nn::Var> z) const;
    nn::Var joint_logits(nn::Tape& tape, nn::ParamStore& params, std::span<const nn::Var> codes) const;
    nn::Var aux_logits(nn::Tape& tape, nn::ParamStore& params, std::size_t k, nn::Var code) const;

    std::vector<nn::Tensor> code_values(const nn::ParamStore& params, std::span<const nn::Tensor> z) const;
    nn::Tensor joint_logits(const nn::ParamStore& params, std::span<const nn::Tensor> codes) const;
    nn::Tensor predict_logits(const nn::ParamStore& params, std::span<const nn::Tensor> z) const;

private:
    VddibArchitecture arch_;
    std::vector<DeviceEncoder> encoders_;
    nn::Mlp joint_;
    std::vector<nn::Mlp> aux_;
};

struct VddibLoss {
    nn::Var total;
    nn::Var joint_ce;  // mean over the batch
    nn::Var aux_ce;    // sum over devices of the per-device mean
    double rate_bits;  // sum over devices of n_k * d_k
};

// total = joint_ce + beta * (aux_ce + rate_bits * ln 2).
VddibLoss vddib_loss(nn::Tape& tape, nn::ParamStore& params, const VddibModel& model, std::span<const nn::Var> codes,
                     std::span<const std::uint32_t> labels, double beta);

struct VddibTrainResult {
    std::vector<nn::StepRecord> trace;  // task = joint CE, side = aux CE sum, bits = rate
};

// `features` holds the frozen extractor outputs, one view per device.
VddibTrainResult train_vddib(const data::MultiViewDataset& features, const VddibModel& model, nn::ParamStore& params,
                             const VddibConfig& config, const nn::StepObserver& observer = {});

nlohmann::json to_json(const VddibArchitecture& arch);
VddibArchitecture vddib_architecture_from_json(const nlohmann::json& j);

}  // namespace tocomm::vddib
