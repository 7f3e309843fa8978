#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "json.hpp"
#include "tocomm/coding/quantizer.hpp"
#include "tocomm/nn/params.hpp"
#include "tocomm/sr/sr.hpp"
#include "tocomm/vib/vib.hpp"

namespace tocomm::sim {

enum class LatencyMode { serial, parallel };

LatencyMode parse_latency_mode(std::string_view s);
std::string to_string(LatencyMode m);

// Error-free uplink bit pipe. Downlink feedback is free.
struct ChannelModel {
    LatencyMode mode = LatencyMode::serial;
    double uplink_bytes_per_second = 18000.0;

    void validate() const;
};

// Serial: all devices share one pipe. Parallel: each device has its own.
double latency(std::span<const std::uint64_t> device_bits, const ChannelModel& channel);
double serial_latency(std::uint64_t total_bits, double uplink_bytes_per_second);

// Indices received from device k in round t; empty when the device was idle.
using ReceivedChunks = std::vector<std::vector<std::optional<std::vector<std::uint32_t>>>>;  // [t][k]

// Both halves of a multi-round protocol. Device methods see only their own
// observation; server methods see only what has been received.
class RetransmissionModel {
public:
    virtual ~RetransmissionModel() = default;

    virtual std::size_t devices() const = 0;
    virtual std::size_t rounds() const = 0;
    virtual coding::QuantizerSpec chunk_spec(std::size_t k) const = 0;

    // All `rounds()` chunks of device k's code, as level indices.
    virtual std::vector<std::vector<std::uint32_t>> device_chunks(std::size_t k,
                                                                  std::span<const double> observation) const = 0;
    // Class distribution of the round-`round` predictor (1-based).
    virtual std::vector<double> predict(std::size_t round, const ReceivedChunks& received) const = 0;
    // Which devices transmit in `round` >= 2.
    virtual std::vector<std::uint8_t> attention(std::size_t round, const ReceivedChunks& received) const = 0;
};

struct RoundState {
    std::size_t round = 0;
    std::vector<std::uint8_t> attention;
    std::uint64_t round_bits = 0;
    std::uint64_t cumulative_bits = 0;
    std::optional<double> confidence;  // absent in the last round
    std::uint32_t prediction = 0;

    bool operator==(const RoundState&) const = default;
};

struct EpisodeTrace {
    std::vector<RoundState> rounds;
    std::uint32_t prediction = 0;
    std::size_t rounds_used = 0;
    std::uint64_t total_bits = 0;
    std::vector<std::uint64_t> device_bits;
    std::size_t payload_bytes = 0;
    double latency_seconds = 0.0;

    bool operator==(const EpisodeTrace&) const = default;
};

nlohmann::json to_json(const EpisodeTrace& trace);

// Confidence-thresholded inference for one sample. `observations[k]` is
// device k's view. A threshold above 1 always runs every round.
EpisodeTrace run_inference_episode(const RetransmissionModel& model, std::span<const std::span<const double>> observations,
                                   double threshold, const ChannelModel& channel);

// VIB extractors followed by a VDDIB-SR model. Observations are raw views.
// `params` is borrowed and must outlive the pipeline.
class SrPipeline final : public RetransmissionModel {
public:
    SrPipeline(std::vector<vib::VibModel> extractors, sr::SrModel model, const nn::ParamStore& params);

    std::size_t devices() const override { return model_.devices(); }
    std::size_t rounds() const override { return model_.rounds(); }
    coding::QuantizerSpec chunk_spec(std::size_t k) const override;
    std::vector<std::vector<std::uint32_t>> device_chunks(std::size_t k,
                                                          std::span<const double> observation) const override;
    std::vector<double> predict(std::size_t round, const ReceivedChunks& received) const override;
    std::vector<std::uint8_t> attention(std::size_t round, const ReceivedChunks& received) const override;

    const sr::SrModel& model() const noexcept { return model_; }

private:
    std::vector<std::vector<nn::Tensor>> dequantize(std::size_t upto, const ReceivedChunks& received) const;

    std::vector<vib::VibModel> extractors_;
    sr::SrModel model_;
    const nn::ParamStore& params_;
};

// Stopping policy applied to batched all-round outputs. Equivalent to running
// one episode per row because later rounds never influence earlier ones.
struct StoppedBatch {
    std::vector<std::uint32_t> predictions;
    std::vector<std::size_t> rounds_used;
    std::vector<std::uint64_t> bits;
    std::vector<std::vector<std::uint64_t>> device_bits;  // [row][k]
};

StoppedBatch apply_stopping(const sr::SrArchitecture& arch, const sr::SrBatchResult& batch, double threshold);

}  // namespace tocomm::sim
