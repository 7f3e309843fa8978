#include "tocomm/sr/sr.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "tocomm/nn/functions.hpp"

namespace tocomm::sr {

namespace {

constexpr std::uint64_t kInitStream = 21;

}  // namespace

void SrArchitecture::validate() const {
    if (rounds == 0) throw std::invalid_argument("sr: at least one round");
    if (feature_dims.empty()) throw std::invalid_argument("sr: at least one device");
    if (chunks.size() != feature_dims.size()) throw std::invalid_argument("sr: one chunk budget per device");
    for (const auto& c : chunks) {
        if (c.dims == 0 || c.bits == 0) throw std::invalid_argument("sr: chunk budgets must be positive");
    }
    if (num_classes < 2) throw std::invalid_argument("sr: at least two classes");
}

std::size_t SrArchitecture::chunk_width() const {
    std::size_t w = 0;
    for (const auto& c : chunks) w += c.dims;
    return w;
}

std::uint64_t SrArchitecture::round_bits() const {
    std::uint64_t b = 0;
    for (const auto& c : chunks) b += coding::bit_cost(c.bits, c.dims);
    return b;
}

void SrConfig::validate() const {
    if (!(beta >= 0.0) || !std::isfinite(beta)) throw std::invalid_argument("sr: beta must be finite and >= 0");
    if (batch_size == 0) throw std::invalid_argument("sr: batch size must be positive");
}

double binarize(double s) noexcept { return s >= 0.0 ? 1.0 : 0.0; }

nn::Tensor binarize_backward(const nn::Tensor& upstream, const nn::Tensor& s) {
    if (upstream.size() != s.size()) throw std::invalid_argument("binarize_backward: shape mismatch");
    nn::Tensor g = upstream;
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (!(std::abs(s[i]) <= 1.0)) g[i] = 0.0;
    }
    return g;
}

nn::Var attention_ste(nn::Tape& tape, nn::Var s) {
    nn::Tensor a = tape.value(s);
    for (double& v : a.data()) v = binarize(v);
    return tape.surrogate(s, std::move(a), binarize_backward, "binarize");
}

std::vector<coding::QuantizedCode> split_code(const coding::QuantizedCode& code, std::size_t rounds) {
    if (rounds == 0) throw std::invalid_argument("split_code: at least one round");
    if (code.indices.size() % rounds != 0) {
        throw std::invalid_argument("split_code: code width " + std::to_string(code.indices.size()) +
                                    " is not divisible by " + std::to_string(rounds) + " rounds");
    }
    const std::size_t width = code.indices.size() / rounds;
    const std::uint64_t bits_per_dim = code.indices.empty() ? 0 : code.bit_cost / code.indices.size();
    std::vector<coding::QuantizedCode> out(rounds);
    for (std::size_t t = 0; t < rounds; ++t) {
        const auto b = static_cast<std::ptrdiff_t>(t * width);
        const auto e = static_cast<std::ptrdiff_t>((t + 1) * width);
        out[t].indices.assign(code.indices.begin() + b, code.indices.begin() + e);
        out[t].dequantized.assign(code.dequantized.begin() + b, code.dequantized.begin() + e);
        out[t].bit_cost = bits_per_dim * width;
    }
    return out;
}

double confidence(std::span<const double> probabilities) {
    if (probabilities.empty()) throw std::invalid_argument("confidence: empty distribution");
    double total = 0.0;
    for (double p : probabilities) {
        if (!(p >= 0.0)) throw std::invalid_argument("confidence: negative probability");
        total += p;
    }
    if (std::abs(total - 1.0) > 1e-6) throw std::invalid_argument("confidence: probabilities do not sum to 1");
    return *std::max_element(probabilities.begin(), probabilities.end());
}

SrModel::SrModel(SrArchitecture arch) : arch_(std::move(arch)) {
    arch_.validate();
    const std::size_t width = arch_.chunk_width();
    for (std::size_t k = 0; k < arch_.feature_dims.size(); ++k) {
        const auto& c = arch_.chunks[k];
        encoders_.emplace_back(encoder_prefix(k), arch_.feature_dims[k], arch_.encoder_hidden,
                               coding::QuantizerSpec(c.bits, c.dims * arch_.rounds));
        aux_.emplace_back(aux_prefix(k), nn::MlpShape{c.dims * arch_.rounds, arch_.aux_hidden, arch_.num_classes});
        std::vector<nn::Mlp> g;
        for (std::size_t round = 2; round <= arch_.rounds; ++round) {
            g.emplace_back(gate_prefix(k, round), nn::MlpShape{(round - 1) * width, arch_.gate_hidden, 1});
        }
        gates_.push_back(std::move(g));
    }
    for (std::size_t round = 1; round <= arch_.rounds; ++round) {
        predictors_.emplace_back(predictor_prefix(round),
                                 nn::MlpShape{round * width, arch_.predictor_hidden, arch_.num_classes});
    }
}

const nn::Mlp& SrModel::gate(std::size_t k, std::size_t round) const {
    if (round < 2 || round > arch_.rounds) {
        throw std::invalid_argument("sr: round 1 is unconditional; gates exist for rounds 2.." + std::to_string(arch_.rounds));
    }
    return gates_.at(k).at(round - 2);
}

void SrModel::init(nn::ParamStore& params, nn::Rng& rng) const {
    for (const auto& e : encoders_) e.init(params, rng);
    for (const auto& p : predictors_) p.init(params, rng);
    for (const auto& a : aux_) a.init(params, rng);
    for (const auto& per_device : gates_) {
        for (const auto& g : per_device) g.init(params, rng);
    }
}

SrForward SrModel::forward(nn::Tape& tape, nn::ParamStore& params, std::span<const nn::Var> z) const {
    if (z.size() != devices()) throw std::invalid_argument("sr: one feature batch per device required");
    SrForward f;
    for (std::size_t k = 0; k < devices(); ++k) f.codes.push_back(encoders_[k].encode(tape, params, z[k]));
    const std::size_t rows = tape.value(z[0]).rows();
    const nn::Var ones = tape.constant(nn::Tensor::matrix(rows, 1, 1.0));

    std::vector<nn::Var> received;  // round-major gated chunks
    for (std::size_t round = 1; round <= rounds(); ++round) {
        std::vector<nn::Var> a(devices()), s(devices());
        std::vector<nn::Var> gated(devices());
        for (std::size_t k = 0; k < devices(); ++k) {
            const std::size_t d = arch_.chunks[k].dims;
            const nn::Var chunk = rounds() == 1 ? f.codes[k] : tape.slice_cols(f.codes[k], (round - 1) * d, d);
            if (round == 1) {
                a[k] = ones;
                gated[k] = chunk;
            } else {
                s[k] = gate(k, round).forward(tape, params, tape.concat_cols(received));
                a[k] = attention_ste(tape, s[k]);
                gated[k] = tape.mul_rows(chunk, a[k]);
            }
        }
        received.insert(received.end(), gated.begin(), gated.end());
        f.round_logits.push_back(predictors_[round - 1].forward(tape, params, tape.concat_cols(received)));
        f.attention.push_back(std::move(a));
        f.pre_gate.push_back(std::move(s));
    }
    return f;
}

nn::Tensor SrModel::chunk_of(const nn::Tensor& code, std::size_t k, std::size_t round) const {
    const std::size_t d = arch_.chunks.at(k).dims;
    return nn::slice_cols(code, (round - 1) * d, d);
}

nn::Tensor SrModel::round_input(std::size_t upto, const std::vector<std::vector<nn::Tensor>>& received) const {
    if (received.size() < upto) throw std::invalid_argument("sr: missing received rounds");
    std::vector<nn::Tensor> parts;
    for (std::size_t t = 0; t < upto; ++t) {
        if (received[t].size() != devices()) throw std::invalid_argument("sr: one chunk per device per round");
        for (std::size_t k = 0; k < devices(); ++k) {
            if (received[t][k].cols() != arch_.chunks[k].dims) throw std::invalid_argument("sr: chunk width mismatch");
            parts.push_back(received[t][k]);
        }
    }
    return nn::concat_cols(parts);
}

nn::Tensor SrModel::predict_probabilities(const nn::ParamStore& params, std::size_t round,
                                          const std::vector<std::vector<nn::Tensor>>& received) const {
    if (round < 1 || round > rounds()) throw std::out_of_range("sr: round out of range");
    return nn::softmax_rows(predictors_[round - 1].infer(params, round_input(round, received)));
}

nn::Tensor SrModel::gate_scores(const nn::ParamStore& params, std::size_t k, std::size_t round,
                                const std::vector<std::vector<nn::Tensor>>& received) const {
    return gate(k, round).infer(params, round_input(round - 1, received));
}

SrBatchResult SrModel::evaluate(const nn::ParamStore& params, std::span<const nn::Tensor> z) const {
    if (z.size() != devices()) throw std::invalid_argument("sr: one feature batch per device required");
    std::vector<nn::Tensor> codes;
    for (std::size_t k = 0; k < devices(); ++k) codes.push_back(encoders_[k].code_values(params, z[k]));
    const std::size_t rows = z[0].rows();

    SrBatchResult out;
    std::vector<std::vector<nn::Tensor>> received;
    for (std::size_t round = 1; round <= rounds(); ++round) {
        std::vector<std::vector<std::uint8_t>> a(devices(), std::vector<std::uint8_t>(rows, 1));
        std::vector<nn::Tensor> gated;
        for (std::size_t k = 0; k < devices(); ++k) {
            nn::Tensor chunk = chunk_of(codes[k], k, round);
            if (round > 1) {
                const nn::Tensor s = gate_scores(params, k, round, received);
                for (std::size_t r = 0; r < rows; ++r) {
                    a[k][r] = static_cast<std::uint8_t>(binarize(s[r]));
                    if (!a[k][r]) std::fill(chunk.row(r).begin(), chunk.row(r).end(), 0.0);
                }
            }
            gated.push_back(std::move(chunk));
        }
        received.push_back(std::move(gated));
        out.probabilities.push_back(predict_probabilities(params, round, received));
        out.attention.push_back(std::move(a));
    }
    return out;
}

SrLoss vddib_sr_loss(nn::Tape& tape, nn::ParamStore& params, const SrModel& model, const SrForward& fwd,
                     std::span<const std::uint32_t> labels, double beta) {
    if (labels.empty()) throw std::invalid_argument("vddib_sr_loss: empty batch");
    if (fwd.round_logits.size() != model.rounds() || fwd.codes.size() != model.devices()) {
        throw std::invalid_argument("vddib_sr_loss: forward pass does not match the model");
    }
    const auto& arch = model.architecture();

    nn::Var task;
    for (const nn::Var logits : fwd.round_logits) {
        const nn::Var ce = tape.mean(tape.cross_entropy(logits, labels));
        task = task.valid() ? tape.add(task, ce) : ce;
    }
    task = tape.scale(task, 1.0 / static_cast<double>(model.rounds()));

    nn::Var aux;
    for (std::size_t k = 0; k < model.devices(); ++k) {
        const nn::Var ce = tape.mean(tape.cross_entropy(model.aux(k).forward(tape, params, fwd.codes[k]), labels));
        aux = aux.valid() ? tape.add(aux, ce) : ce;
    }

    // Round 1 is unconditional, so its bits are a constant; later rounds are
    // charged through the attention values and carry gradient.
    const double first_round = static_cast<double>(arch.round_bits());
    nn::Var side = tape.add_scalar(aux, first_round * std::numbers::ln2);
    nn::Var gated_bits;
    for (std::size_t round = 2; round <= model.rounds(); ++round) {
        for (std::size_t k = 0; k < model.devices(); ++k) {
            const double cost = static_cast<double>(coding::bit_cost(arch.chunks[k].bits, arch.chunks[k].dims));
            const nn::Var b = tape.scale(tape.mean(fwd.attention[round - 1][k]), cost);
            gated_bits = gated_bits.valid() ? tape.add(gated_bits, b) : b;
        }
    }
    nn::Var rate;
    if (gated_bits.valid()) {
        side = tape.add(side, tape.scale(gated_bits, std::numbers::ln2));
        rate = tape.add_scalar(gated_bits, first_round);
    } else {
        rate = tape.constant(nn::Tensor::scalar(first_round));
    }
    return {tape.add(task, tape.scale(side, beta)), task, aux, rate};
}

SrTrainResult train_vddib_sr(const data::MultiViewDataset& features, const SrModel& model, nn::ParamStore& params,
                             const SrConfig& config, const nn::StepObserver& observer) {
    config.validate();
    if (features.empty()) throw std::invalid_argument("train_vddib_sr: empty dataset");
    if (features.devices() != model.devices()) throw std::invalid_argument("train_vddib_sr: device count mismatch");

    nn::Rng init_rng = nn::make_rng(config.seed, kInitStream);
    model.init(params, init_rng);
    nn::Optimizer opt(config.optimizer, std::string(SrModel::kPrefix) + "/");
    data::BatchSampler sampler(features.size(), config.batch_size, config.seed);

    SrTrainResult result;
    result.trace.reserve(config.steps);
    for (std::size_t step = 0; step < config.steps; ++step) {
        const auto idx = sampler.next();
        const auto labels = features.batch_labels(idx);
        nn::StepRecord rec;
        rec.step = step;
        try {
            nn::Tape tape;
            std::vector<nn::Var> z;
            for (std::size_t k = 0; k < model.devices(); ++k) z.push_back(tape.constant(features.batch_view(k, idx)));
            const SrForward fwd = model.forward(tape, params, z);
            const SrLoss loss = vddib_sr_loss(tape, params, model, fwd, labels, config.beta);
            rec.loss = tape.value(loss.total).item();
            rec.task = tape.value(loss.task).item();
            rec.side = tape.value(loss.aux_ce).item();
            rec.bits = tape.value(loss.rate_bits).item();
            tape.backward(loss.total);
        } catch (const nn::NonFiniteError& e) {
            throw nn::TrainingDivergence(std::string("vddib-sr training diverged: ") + e.what(), step);
        }
        opt.step(params);
        result.trace.push_back(rec);
        if (observer) observer(rec);
    }
    return result;
}

SrArchitecture single_round_architecture(const vddib::VddibArchitecture& a) {
    SrArchitecture s;
    s.feature_dims = a.feature_dims;
    s.chunks = a.budgets;
    s.rounds = 1;
    s.encoder_hidden = a.encoder_hidden;
    s.predictor_hidden = a.joint_hidden;
    s.aux_hidden = a.aux_hidden;
    s.num_classes = a.num_classes;
    return s;
}

void import_vddib(const vddib::VddibModel& source, const nn::ParamStore& source_params, const SrModel& target,
                  nn::ParamStore& target_params) {
    if (target.rounds() != 1 || target.devices() != source.devices()) {
        throw std::invalid_argument("import_vddib: target must be a single-round model with the same devices");
    }
    for (std::size_t k = 0; k < source.devices(); ++k) {
        target_params.import_prefix(source_params, vddib::VddibModel::encoder_prefix(k) + "/",
                                    SrModel::encoder_prefix(k) + "/");
        target_params.import_prefix(source_params, vddib::VddibModel::aux_prefix(k) + "/", SrModel::aux_prefix(k) + "/");
    }
    target_params.import_prefix(source_params, vddib::VddibModel::joint_prefix() + "/", SrModel::predictor_prefix(1) + "/");
}

nlohmann::json to_json(const SrArchitecture& a) {
    nlohmann::json chunks = nlohmann::json::array();
    for (const auto& c : a.chunks) chunks.push_back({{"bits", c.bits}, {"dims", c.dims}});
    return {{"feature_dims", a.feature_dims},       {"chunks", chunks},
            {"rounds", a.rounds},                   {"encoder_hidden", a.encoder_hidden},
            {"predictor_hidden", a.predictor_hidden}, {"aux_hidden", a.aux_hidden},
            {"gate_hidden", a.gate_hidden},         {"num_classes", a.num_classes}};
}

SrArchitecture sr_architecture_from_json(const nlohmann::json& j) {
    SrArchitecture a;
    a.feature_dims = j.value("feature_dims", a.feature_dims);
    if (j.contains("chunks")) {
        a.chunks.clear();
        for (const auto& c : j.at("chunks")) a.chunks.push_back({c.at("bits").get<unsigned>(), c.at("dims").get<std::size_t>()});
    }
    a.rounds = j.value("rounds", a.rounds);
    a.encoder_hidden = j.value("encoder_hidden", a.encoder_hidden);
    a.predictor_hidden = j.value("predictor_hidden", a.predictor_hidden);
    a.aux_hidden = j.value("aux_hidden", a.aux_hidden);
    a.gate_hidden = j.value("gate_hidden", a.gate_hidden);
    a.num_classes = j.value("num_classes", a.num_classes);
    a.validate();
    return a;
}

}  // namespace tocomm::sr
