#pragma once

// A retransmission model whose server side replays fixed distributions and
// attention vectors, and whose devices send their observation values as
// level indices. It records every chunk the server received.

#include <stdexcept>
#include <vector>

#include "tocomm/sim/episode.hpp"

namespace tocomm::testing {

class ScriptedModel final : public sim::RetransmissionModel {
public:
    ScriptedModel(std::size_t devices, std::size_t rounds, unsigned bits, std::size_t chunk_dims)
        : devices_(devices), rounds_(rounds), spec_(bits, chunk_dims) {}

    // One distribution per round; rounds without a script are uniform.
    std::vector<std::vector<double>> distributions;
    // attention_script[round - 2] for rounds >= 2; missing entries mean all active.
    std::vector<std::vector<std::uint8_t>> attention_script;
    mutable sim::ReceivedChunks last_received;

    std::size_t devices() const override { return devices_; }
    std::size_t rounds() const override { return rounds_; }
    coding::QuantizerSpec chunk_spec(std::size_t) const override { return spec_; }

    std::vector<std::vector<std::uint32_t>> device_chunks(std::size_t, std::span<const double> obs) const override {
        if (obs.size() != rounds_ * spec_.dims()) throw std::invalid_argument("scripted: observation width");
        std::vector<std::vector<std::uint32_t>> out(rounds_);
        for (std::size_t i = 0; i < obs.size(); ++i) {
            out[i / spec_.dims()].push_back(static_cast<std::uint32_t>(obs[i]) % spec_.level_count());
        }
        return out;
    }

    std::vector<double> predict(std::size_t round, const sim::ReceivedChunks& received) const override {
        last_received = received;
        if (round - 1 < distributions.size()) return distributions[round - 1];
        return std::vector<double>(4, 0.25);
    }

    std::vector<std::uint8_t> attention(std::size_t round, const sim::ReceivedChunks&) const override {
        if (round - 2 < attention_script.size()) return attention_script[round - 2];
        return std::vector<std::uint8_t>(devices_, 1);
    }

private:
    std::size_t devices_, rounds_;
    coding::QuantizerSpec spec_;
};

}  // namespace tocomm::testing
