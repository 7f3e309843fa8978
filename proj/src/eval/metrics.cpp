#include "tocomm/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <stdexcept>

#include "tocomm/nn/functions.hpp"

namespace tocomm::eval {

namespace {

double mean(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

template <class Key>
double plugin_entropy(const std::map<Key, std::size_t>& counts, std::size_t n) {
    double h = 0.0;
    for (const auto& [key, c] : counts) {
        const double p = static_cast<double>(c) / static_cast<double>(n);
        h -= p * std::log2(p);
    }
    return h == 0.0 ? 0.0 : h;  // normalise -0.0
}

std::vector<std::vector<std::uint32_t>> code_rows(const std::vector<std::uint32_t>& flat, std::size_t width) {
    std::vector<std::vector<std::uint32_t>> rows(flat.size() / width);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        rows[r].assign(flat.begin() + static_cast<std::ptrdiff_t>(r * width),
                       flat.begin() + static_cast<std::ptrdiff_t>((r + 1) * width));
    }
    return rows;
}

}  // namespace

nlohmann::json to_json(const AccuracySummary& s) {
    return {{"examples", s.examples},
            {"accuracy", s.accuracy},
            {"avg_bits", s.avg_bits},
            {"avg_rounds", s.avg_rounds},
            {"avg_latency_seconds", s.avg_latency_seconds}};
}

AccuracySummary summarize(std::span<const std::uint32_t> predictions, std::span<const std::uint32_t> labels,
                          std::span<const std::uint64_t> bits, std::span<const std::size_t> rounds) {
    const std::size_t n = labels.size();
    if (n == 0) throw std::invalid_argument("summarize: empty evaluation set");
    if (predictions.size() != n || bits.size() != n || rounds.size() != n) {
        throw std::invalid_argument("summarize: predictions, bits and rounds must match the labels");
    }
    AccuracySummary s;
    s.examples = n;
    std::size_t correct = 0;
    double total_bits = 0.0, total_rounds = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        correct += predictions[i] == labels[i];
        total_bits += static_cast<double>(bits[i]);
        total_rounds += static_cast<double>(rounds[i]);
    }
    s.accuracy = static_cast<double>(correct) / static_cast<double>(n);
    s.avg_bits = total_bits / static_cast<double>(n);
    s.avg_rounds = total_rounds / static_cast<double>(n);
    return s;
}

AccuracySummary evaluate_vddib(const vddib::VddibModel& model, const nn::ParamStore& params,
                               const data::MultiViewDataset& features, const sim::ChannelModel& channel) {
    if (features.empty()) throw std::invalid_argument("evaluate_vddib: empty evaluation set");
    if (features.devices() != model.devices()) throw std::invalid_argument("evaluate_vddib: device count mismatch");
    std::vector<nn::Tensor> z;
    for (std::size_t k = 0; k < model.devices(); ++k) z.push_back(features.view(k));
    const auto predictions = nn::argmax_rows(model.predict_logits(params, z));

    std::vector<std::uint64_t> device_bits;
    for (std::size_t k = 0; k < model.devices(); ++k) device_bits.push_back(coding::bit_cost(model.encoder(k).spec()));
    std::uint64_t total = 0;
    for (auto b : device_bits) total += b;
    const std::vector<std::uint64_t> bits(features.size(), total);
    const std::vector<std::size_t> rounds(features.size(), 1);
    AccuracySummary s = summarize(predictions, features.labels(), bits, rounds);
    s.avg_latency_seconds = sim::latency(device_bits, channel);
    return s;
}

AccuracySummary evaluate_sr(const sr::SrModel& model, const nn::ParamStore& params,
                            const data::MultiViewDataset& features, double threshold, const sim::ChannelModel& channel) {
    if (features.empty()) throw std::invalid_argument("evaluate_sr: empty evaluation set");
    if (features.devices() != model.devices()) throw std::invalid_argument("evaluate_sr: device count mismatch");
    std::vector<nn::Tensor> z;
    for (std::size_t k = 0; k < model.devices(); ++k) z.push_back(features.view(k));
    const auto stopped = sim::apply_stopping(model.architecture(), model.evaluate(params, z), threshold);
    AccuracySummary s = summarize(stopped.predictions, features.labels(), stopped.bits, stopped.rounds_used);
    double latency = 0.0;
    for (const auto& d : stopped.device_bits) latency += sim::latency(d, channel);
    s.avg_latency_seconds = latency / static_cast<double>(features.size());
    return s;
}

double calibrate_threshold(const sr::SrModel& model, const nn::ParamStore& params,
                           const data::MultiViewDataset& features, double target_bits) {
    if (features.empty()) throw std::invalid_argument("calibrate_threshold: empty calibration set");
    std::vector<nn::Tensor> z;
    for (std::size_t k = 0; k < model.devices(); ++k) z.push_back(features.view(k));
    const auto batch = model.evaluate(params, z);
    auto avg_bits = [&](double th) {
        const auto st = sim::apply_stopping(model.architecture(), batch, th);
        double b = 0.0;
        for (auto x : st.bits) b += static_cast<double>(x);
        return b / static_cast<double>(features.size());
    };
    double lo = 0.0, hi = 1.0;
    double best = lo, best_gap = std::abs(avg_bits(lo) - target_bits);
    if (const double g = std::abs(avg_bits(hi) - target_bits); g < best_gap) best = hi, best_gap = g;
    for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double b = avg_bits(mid);
        if (const double g = std::abs(b - target_bits); g < best_gap) best = mid, best_gap = g;
        (b < target_bits ? lo : hi) = mid;
    }
    return best;
}

double empirical_code_entropy(std::span<const std::vector<std::uint32_t>> codes) {
    if (codes.empty()) throw std::invalid_argument("empirical_code_entropy: empty code set");
    std::map<std::vector<std::uint32_t>, std::size_t> counts;
    for (const auto& c : codes) ++counts[c];
    return plugin_entropy(counts, codes.size());
}

double empirical_label_entropy(std::span<const std::uint32_t> labels) {
    if (labels.empty()) throw std::invalid_argument("empirical_label_entropy: empty label set");
    std::map<std::uint32_t, std::size_t> counts;
    for (auto y : labels) ++counts[y];
    return plugin_entropy(counts, labels.size());
}

nlohmann::json to_json(const RateRelevancePoint& p) {
    return {{"delta_bits", p.delta_bits},
            {"rate_bits", p.rate_bits},
            {"label_entropy_bits", p.label_entropy_bits},
            {"joint_ce_bits", p.joint_ce_bits},
            {"code_entropy_bits", p.code_entropy_bits},
            {"aux_information_bits", p.aux_information_bits}};
}

RateRelevancePoint compose_rate_relevance(double label_entropy_bits, double joint_ce_nats,
                                          std::span<const double> aux_ce_nats,
                                          std::span<const double> code_entropy_bits) {
    if (aux_ce_nats.size() != code_entropy_bits.size()) {
        throw std::invalid_argument("rate-relevance: one auxiliary cross-entropy per device code required");
    }
    RateRelevancePoint p;
    p.label_entropy_bits = label_entropy_bits;
    p.joint_ce_bits = joint_ce_nats / std::numbers::ln2;
    p.delta_bits = std::max(0.0, label_entropy_bits - p.joint_ce_bits);
    p.rate_bits = p.delta_bits;
    for (std::size_t k = 0; k < aux_ce_nats.size(); ++k) {
        const double info = std::max(0.0, label_entropy_bits - aux_ce_nats[k] / std::numbers::ln2);
        p.code_entropy_bits.push_back(code_entropy_bits[k]);
        p.aux_information_bits.push_back(info);
        p.rate_bits += code_entropy_bits[k] - info;
    }
    p.rate_bits = std::max(0.0, p.rate_bits);
    return p;
}

RateRelevancePoint estimate_rate_relevance(const vddib::VddibModel& model, const nn::ParamStore& params,
                                           const data::MultiViewDataset& features) {
    if (features.empty()) throw std::invalid_argument("estimate_rate_relevance: empty evaluation set");
    if (features.devices() != model.devices()) {
        throw std::invalid_argument("estimate_rate_relevance: device count mismatch");
    }
    const auto labels = features.labels();
    std::vector<nn::Tensor> codes;
    std::vector<double> aux_ce, entropy;
    for (std::size_t k = 0; k < model.devices(); ++k) {
        const auto& enc = model.encoder(k);
        const nn::Tensor z = features.view(k);
        codes.push_back(enc.code_values(params, z));
        aux_ce.push_back(mean(nn::cross_entropy_rows(model.aux(k).infer(params, codes.back()), labels)));
        const auto rows = code_rows(enc.code_indices(params, z), enc.spec().dims());
        entropy.push_back(empirical_code_entropy(rows));
    }
    const double joint_ce = mean(nn::cross_entropy_rows(model.joint_logits(params, codes), labels));
    return compose_rate_relevance(empirical_label_entropy(labels), joint_ce, aux_ce, entropy);
}

bool code_entropy_within_budget(const RateRelevancePoint& point, std::span<const vddib::DeviceBudget> budgets,
                                double tol) {
    if (point.code_entropy_bits.size() != budgets.size()) {
        throw std::invalid_argument("code entropy audit: one budget per device required");
    }
    for (std::size_t k = 0; k < budgets.size(); ++k) {
        if (point.code_entropy_bits[k] > static_cast<double>(coding::bit_cost(budgets[k].bits, budgets[k].dims)) + tol) {
            return false;
        }
    }
    return true;
}

}  // namespace tocomm::eval
