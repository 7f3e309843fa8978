#include "tocomm/sim/episode.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "tocomm/nn/functions.hpp"

namespace tocomm::sim {

namespace {

std::uint32_t argmax(std::span<const double> p) {
    return static_cast<std::uint32_t>(std::max_element(p.begin(), p.end()) - p.begin());  // first maximum
}

void require_params(const nn::ParamStore& params, const nn::Mlp& net) {
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
        if (!params.contains(net.weight_name(l)) || !params.contains(net.bias_name(l))) {
            throw std::invalid_argument("model is not trained: missing parameters under " + net.prefix());
        }
    }
}

}  // namespace

LatencyMode parse_latency_mode(std::string_view s) {
    if (s == "serial") return LatencyMode::serial;
    if (s == "parallel") return LatencyMode::parallel;
    throw std::invalid_argument("unknown latency mode '" + std::string(s) + "'");
}

std::string to_string(LatencyMode m) { return m == LatencyMode::serial ? "serial" : "parallel"; }

void ChannelModel::validate() const {
    if (!(uplink_bytes_per_second > 0.0) || !std::isfinite(uplink_bytes_per_second)) {
        throw std::invalid_argument("channel: uplink rate must be positive and finite");
    }
}

double serial_latency(std::uint64_t total_bits, double uplink_bytes_per_second) {
    return static_cast<double>(total_bits) / (8.0 * uplink_bytes_per_second);
}

double latency(std::span<const std::uint64_t> device_bits, const ChannelModel& channel) {
    channel.validate();
    std::uint64_t combined = 0;
    for (std::uint64_t b : device_bits) {
        combined = channel.mode == LatencyMode::serial ? combined + b : std::max(combined, b);
    }
    return serial_latency(combined, channel.uplink_bytes_per_second);
}

nlohmann::json to_json(const EpisodeTrace& t) {
    nlohmann::json rounds = nlohmann::json::array();
    for (const auto& r : t.rounds) {
        nlohmann::json j{{"round", r.round},
                         {"attention", r.attention},
                         {"round_bits", r.round_bits},
                         {"cumulative_bits", r.cumulative_bits},
                         {"prediction", r.prediction}};
        j["confidence"] = r.confidence ? nlohmann::json(*r.confidence) : nlohmann::json(nullptr);
        rounds.push_back(std::move(j));
    }
    return {{"rounds", rounds},           {"prediction", t.prediction},   {"rounds_used", t.rounds_used},
            {"total_bits", t.total_bits}, {"device_bits", t.device_bits}, {"payload_bytes", t.payload_bytes},
            {"latency_seconds", t.latency_seconds}};
}

EpisodeTrace run_inference_episode(const RetransmissionModel& model, std::span<const std::span<const double>> observations,
                                   double threshold, const ChannelModel& channel) {
    channel.validate();
    if (!(threshold >= 0.0)) throw std::invalid_argument("episode: threshold must be >= 0");
    const std::size_t K = model.devices(), T = model.rounds();
    if (observations.size() != K) throw std::invalid_argument("episode: one observation per device required");

    std::vector<std::vector<std::vector<std::uint32_t>>> chunks(K);
    for (std::size_t k = 0; k < K; ++k) {
        chunks[k] = model.device_chunks(k, observations[k]);
        if (chunks[k].size() != T) throw std::logic_error("episode: device produced the wrong number of chunks");
    }

    EpisodeTrace trace;
    trace.device_bits.assign(K, 0);
    ReceivedChunks received;
    for (std::size_t round = 1; round <= T; ++round) {
        RoundState state;
        state.round = round;
        state.attention = round == 1 ? std::vector<std::uint8_t>(K, 1) : model.attention(round, received);
        if (state.attention.size() != K) throw std::logic_error("episode: attention has the wrong width");

        auto& inbox = received.emplace_back(K);
        for (std::size_t k = 0; k < K; ++k) {
            if (!state.attention[k]) continue;
            const unsigned bits = model.chunk_spec(k).bits();
            const auto& idx = chunks[k][round - 1];
            const auto wire = coding::pack_bits(idx, bits);
            inbox[k] = coding::unpack_bits(wire, bits, idx.size());
            const std::uint64_t sent = coding::bit_cost(bits, idx.size());
            state.round_bits += sent;
            trace.device_bits[k] += sent;
            trace.payload_bytes += wire.size();
        }
        trace.total_bits += state.round_bits;
        state.cumulative_bits = trace.total_bits;

        const std::vector<double> probs = model.predict(round, received);
        state.prediction = argmax(probs);
        bool stop = round == T;
        if (!stop) {
            state.confidence = sr::confidence(probs);
            stop = *state.confidence >= threshold;
        }
        trace.rounds.push_back(std::move(state));
        if (stop) break;
    }
    trace.rounds_used = trace.rounds.size();
    trace.prediction = trace.rounds.back().prediction;
    trace.latency_seconds = latency(trace.device_bits, channel);
    return trace;
}

SrPipeline::SrPipeline(std::vector<vib::VibModel> extractors, sr::SrModel model, const nn::ParamStore& params)
    : extractors_(std::move(extractors)), model_(std::move(model)), params_(params) {
    if (extractors_.size() != model_.devices()) throw std::invalid_argument("pipeline: one extractor per device");
    for (std::size_t k = 0; k < extractors_.size(); ++k) {
        if (extractors_[k].architecture().feature_dim != model_.architecture().feature_dims[k]) {
            throw std::invalid_argument("pipeline: extractor feature width does not match the encoder");
        }
        require_params(params_, extractors_[k].trunk());
        require_params(params_, model_.encoder(k).net());
        for (std::size_t t = 2; t <= model_.rounds(); ++t) require_params(params_, model_.gate(k, t));
    }
    for (std::size_t t = 1; t <= model_.rounds(); ++t) require_params(params_, model_.predictor(t));
}

coding::QuantizerSpec SrPipeline::chunk_spec(std::size_t k) const {
    const auto& c = model_.architecture().chunks.at(k);
    return {c.bits, c.dims};
}

std::vector<std::vector<std::uint32_t>> SrPipeline::device_chunks(std::size_t k,
                                                                  std::span<const double> observation) const {
    const nn::Tensor x({1, observation.size()}, std::vector<double>(observation.begin(), observation.end()));
    const nn::Tensor z = extractors_.at(k).features(params_, x);
    const auto code = model_.encoder(k).encode_device(params_, z.data());
    std::vector<std::vector<std::uint32_t>> out;
    for (auto& c : sr::split_code(code, model_.rounds())) out.push_back(std::move(c.indices));
    return out;
}

std::vector<std::vector<nn::Tensor>> SrPipeline::dequantize(std::size_t upto, const ReceivedChunks& received) const {
    if (received.size() < upto) throw std::invalid_argument("pipeline: missing rounds");
    std::vector<std::vector<nn::Tensor>> out(upto);
    for (std::size_t t = 0; t < upto; ++t) {
        for (std::size_t k = 0; k < devices(); ++k) {
            const auto spec = chunk_spec(k);
            nn::Tensor chunk = nn::Tensor::matrix(1, spec.dims());  // idle device: zeros
            const auto& idx = received[t].at(k);
            if (idx) {
                if (idx->size() != spec.dims()) throw std::invalid_argument("pipeline: chunk width mismatch");
                for (std::size_t i = 0; i < idx->size(); ++i) chunk[i] = spec.level((*idx)[i]);
            }
            out[t].push_back(std::move(chunk));
        }
    }
    return out;
}

std::vector<double> SrPipeline::predict(std::size_t round, const ReceivedChunks& received) const {
    const nn::Tensor p = model_.predict_probabilities(params_, round, dequantize(round, received));
    return {p.data().begin(), p.data().end()};
}

std::vector<std::uint8_t> SrPipeline::attention(std::size_t round, const ReceivedChunks& received) const {
    const auto values = dequantize(round - 1, received);
    std::vector<std::uint8_t> a;
    for (std::size_t k = 0; k < devices(); ++k) {
        a.push_back(static_cast<std::uint8_t>(sr::binarize(model_.gate_scores(params_, k, round, values)[0])));
    }
    return a;
}

StoppedBatch apply_stopping(const sr::SrArchitecture& arch, const sr::SrBatchResult& batch, double threshold) {
    if (!(threshold >= 0.0)) throw std::invalid_argument("apply_stopping: threshold must be >= 0");
    const std::size_t T = batch.probabilities.size();
    if (T != arch.rounds || batch.attention.size() != T) throw std::invalid_argument("apply_stopping: round mismatch");
    const std::size_t rows = batch.probabilities[0].rows();
    std::vector<std::vector<std::uint32_t>> preds;
    for (const auto& p : batch.probabilities) preds.push_back(nn::argmax_rows(p));

    StoppedBatch out;
    for (std::size_t r = 0; r < rows; ++r) {
        std::uint64_t bits = 0;
        std::vector<std::uint64_t> per_device(arch.chunks.size(), 0);
        std::size_t round = 1;
        for (;; ++round) {
            for (std::size_t k = 0; k < arch.chunks.size(); ++k) {
                if (!batch.attention[round - 1][k][r]) continue;
                const std::uint64_t b = coding::bit_cost(arch.chunks[k].bits, arch.chunks[k].dims);
                bits += b;
                per_device[k] += b;
            }
            if (round == T || sr::confidence(batch.probabilities[round - 1].row(r)) >= threshold) break;
        }
        out.predictions.push_back(preds[round - 1][r]);
        out.rounds_used.push_back(round);
        out.bits.push_back(bits);
        out.device_bits.push_back(std::move(per_device));
    }
    return out;
}

}  // namespace tocomm::sim
