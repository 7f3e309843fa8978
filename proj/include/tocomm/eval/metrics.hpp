#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "json.hpp"
#include "tocomm/data/dataset.hpp"
#include "tocomm/nn/params.hpp"
#include "tocomm/sim/episode.hpp"
#include "tocomm/sr/sr.hpp"
#include "tocomm/vddib/vddib.hpp"

namespace tocomm::eval {

struct AccuracySummary {
    std::size_t examples = 0;
    double accuracy = 0.0;
    double avg_bits = 0.0;
    double avg_rounds = 0.0;
    double avg_latency_seconds = 0.0;
};

nlohmann::json to_json(const AccuracySummary& s);

// Throws on an empty or ragged input.
AccuracySummary summarize(std::span<const std::uint32_t> predictions, std::span<const std::uint32_t> labels,
                          std::span<const std::uint64_t> bits, std::span<const std::size_t> rounds);

// Fixed budget: every example costs sum_k n_k * d_k bits in one round.
AccuracySummary evaluate_vddib(const vddib::VddibModel& model, const nn::ParamStore& params,
                               const data::MultiViewDataset& features, const sim::ChannelModel& channel = {});

// Batched all-round evaluation followed by the stopping policy.
AccuracySummary evaluate_sr(const sr::SrModel& model, const nn::ParamStore& params,
                            const data::MultiViewDataset& features, double threshold,
                            const sim::ChannelModel& channel = {});

// Threshold whose average bits on `features` is closest to
// `target_bits`. Average bits are non-decreasing in the threshold, so this
// bisects on [0, 1].
double calibrate_threshold(const sr::SrModel& model, const nn::ParamStore& params,
                           const data::MultiViewDataset& features, double target_bits);

// Plug-in entropy in bits of the empirical distribution of whole code vectors.
double empirical_code_entropy(std::span<const std::vector<std::uint32_t>> codes);
// Plug-in entropy in bits of a label sample.
double empirical_label_entropy(std::span<const std::uint32_t> labels);

struct RateRelevancePoint {
    double delta_bits = 0.0;        // estimated I(Y; U_1..K)
    double rate_bits = 0.0;         // delta + sum_k [H(U_k) - I(Y; U_k)]
    double label_entropy_bits = 0.0;
    double joint_ce_bits = 0.0;
    std::vector<double> code_entropy_bits;   // per device, H(U_k) = I(Z_k; U_k)
    std::vector<double> aux_information_bits;  // per device, I(Y; U_k)
};

nlohmann::json to_json(const RateRelevancePoint& p);

// Composes the estimate from cross-entropies in nats. Negative information
// estimates (a predictor worse than the label marginal) are clamped to zero.
RateRelevancePoint compose_rate_relevance(double label_entropy_bits, double joint_ce_nats,
                                          std::span<const double> aux_ce_nats,
                                          std::span<const double> code_entropy_bits);

// Evaluates joint and auxiliary heads plus code entropies on `features`.
RateRelevancePoint estimate_rate_relevance(const vddib::VddibModel& model, const nn::ParamStore& params,
                                           const data::MultiViewDataset& features);

// Holds iff every device's code entropy is within its bit budget (+ tol).
bool code_entropy_within_budget(const RateRelevancePoint& point, std::span<const vddib::DeviceBudget> budgets,
                                double tol = 1e-9);

}  // namespace tocomm::eval
