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
#include "tocomm/vddib/vddib.hpp"

namespace tocomm::sr {

// Per-device, per-round chunk budget; a device's full code is rounds * dims wide.
using ChunkBudget = vddib::DeviceBudget;

struct SrArchitecture {
    std::vector<std::size_t> feature_dims{64, 64};
    std::vector<ChunkBudget> chunks{{1, 4}, {1, 4}};
    std::size_t rounds = 2;
    std::vector<std::size_t> encoder_hidden{256};
    std::vector<std::size_t> predictor_hidden{256, 256};
    std::vector<std::size_t> aux_hidden{256};
    std::vector<std::size_t> gate_hidden{64};
    std::size_t num_classes = 10;

    void validate() const;
    std::size_t chunk_width() const;  // sum over devices of the per-round chunk dims
    std::uint64_t round_bits() const;  // bits when every device transmits one chunk
};

struct SrConfig {
    double beta = 0.01;
    std::size_t batch_size = 100;
    std::size_t steps = 10000;
    nn::OptimizerConfig optimizer;
    std::uint64_t seed = 0;

    void validate() const;
};

// Hard 0/1 attention with the clipped straight-through gradient.
double binarize(double s) noexcept;
nn::Tensor binarize_backward(const nn::Tensor& upstream, const nn::Tensor& s);
nn::Var attention_ste(nn::Tape& tape, nn::Var s);

// u_k split into `rounds` contiguous chunks.
std::vector<coding::QuantizedCode> split_code(const coding::QuantizedCode& code, std::size_t rounds);

// Maximum class probability. Throws if the vector is not a distribution (+-1e-6).
double confidence(std::span<const double> probabilities);

// Everything computed in training mode: all rounds run for every row.
struct SrForward {
    std::vector<nn::Var> codes;                     // [K] full dequantized codes, M x (T * d_k)
    std::vector<std::vector<nn::Var>> attention;    // [T][K] M x 1; round 1 is all ones
    std::vector<std::vector<nn::Var>> pre_gate;     // [T][K] gate pre-activations, invalid for round 1
    std::vector<nn::Var> round_logits;              // [T] M x C
};

// Tape-free evaluation of all rounds for a batch.
struct SrBatchResult {
    std::vector<nn::Tensor> probabilities;                 // [T] M x C
    std::vector<std::vector<std::vector<std::uint8_t>>> attention;  // [T][K][M]
};

class SrModel {
public:
    explicit SrModel(SrArchitecture arch);

    static constexpr const char* kPrefix = "sr";
    static std::string encoder_prefix(std::size_t k) { return "sr/enc/k" + std::to_string(k); }
    static std::string predictor_prefix(std::size_t round) { return "sr/pred/t" + std::to_string(round); }
    static std::string aux_prefix(std::size_t k) { return "sr/aux/k" + std::to_string(k); }
    static std::string gate_prefix(std::size_t k, std::size_t round) {
        return "sr/gate/k" + std::to_string(k) + "/t" + std::to_string(round);
    }

    void init(nn::ParamStore& params, nn::Rng& rng) const;

    std::size_t devices() const noexcept { return encoders_.size(); }
    std::size_t rounds() const noexcept { return arch_.rounds; }
    const SrArchitecture& architecture() const noexcept { return arch_; }
    const vddib::DeviceEncoder& encoder(std::size_t k) const { return encoders_.at(k); }
    // Rounds are 1-based.
    const nn::Mlp& predictor(std::size_t round) const { return predictors_.at(round - 1); }
    const nn::Mlp& aux(std::size_t k) const { return aux_.at(k); }
    const nn::Mlp& gate(std::size_t k, std::size_t round) const;

    SrForward forward(nn::Tape& tape, nn::ParamStore& params, std::span<const nn::Var> z) const;

    // Dequantized chunk values of round `round` for device k, from full codes.
    nn::Tensor chunk_of(const nn::Tensor& code, std::size_t k, std::size_t round) const;
    // Server-side helpers over received (already gated) chunks; `received[t][k]`
    // is the M x d_k chunk of round t + 1.
    nn::Tensor predict_probabilities(const nn::ParamStore& params, std::size_t round,
                                     const std::vector<std::vector<nn::Tensor>>& received) const;
    nn::Tensor gate_scores(const nn::ParamStore& params, std::size_t k, std::size_t round,
                           const std::vector<std::vector<nn::Tensor>>& received) const;

    SrBatchResult evaluate(const nn::ParamStore& params, std::span<const nn::Tensor> z) const;

private:
    nn::Tensor round_input(std::size_t upto, const std::vector<std::vector<nn::Tensor>>& received) const;

    SrArchitecture arch_;
    std::vector<vddib::DeviceEncoder> encoders_;
    std::vector<nn::Mlp> predictors_;
    std::vector<nn::Mlp> aux_;
    std::vector<std::vector<nn::Mlp>> gates_;  // [k][round - 2]
};

struct SrLoss {
    nn::Var total;
    nn::Var task;      // mean over rounds of the per-round mean CE
    nn::Var aux_ce;    // sum over devices of the per-device mean aux CE
    nn::Var rate_bits; // mean transmitted bits per example
};

SrLoss vddib_sr_loss(nn::Tape& tape, nn::ParamStore& params, const SrModel& model, const SrForward& fwd,
                     std::span<const std::uint32_t> labels, double beta);

struct SrTrainResult {
    std::vector<nn::StepRecord> trace;  // task = mean round CE, side = aux CE sum, bits = expected bits
};

SrTrainResult train_vddib_sr(const data::MultiViewDataset& features, const SrModel& model, nn::ParamStore& params,
                             const SrConfig& config, const nn::StepObserver& observer = {});

// Single-round model with the same encoder, joint head and auxiliary heads.
SrArchitecture single_round_architecture(const vddib::VddibArchitecture& arch);
void import_vddib(const vddib::VddibModel& source, const nn::ParamStore& source_params, const SrModel& target,
                  nn::ParamStore& target_params);

nlohmann::json to_json(const SrArchitecture& arch);
SrArchitecture sr_architecture_from_json(const nlohmann::json& j);

}  // namespace tocomm::sr
