#include "tocomm/vddib/vddib.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace tocomm::vddib {

namespace {

constexpr std::uint64_t kInitStream = 11;

}  // namespace

DeviceEncoder::DeviceEncoder(std::string prefix, std::size_t feature_dim, std::vector<std::size_t> hidden,
                             coding::QuantizerSpec spec)
    : net_(std::move(prefix), {feature_dim, std::move(hidden), spec.dims()}), spec_(spec) {}

nn::Var DeviceEncoder::bounded(nn::Tape& tape, nn::ParamStore& params, nn::Var z) const {
    if (tape.value(z).cols() != net_.shape().input) {
        throw std::invalid_argument("device encoder " + net_.prefix() + ": feature width " +
                                    std::to_string(tape.value(z).cols()) + ", expected " +
                                    std::to_string(net_.shape().input));
    }
    return tape.tanh(net_.forward(tape, params, z));
}

nn::Var DeviceEncoder::encode(nn::Tape& tape, nn::ParamStore& params, nn::Var z) const {
    return coding::quantize_ste(tape, bounded(tape, params, z), spec_);
}

nn::Tensor DeviceEncoder::bounded(const nn::ParamStore& params, const nn::Tensor& z) const {
    nn::Tensor h = net_.infer(params, z);
    for (double& v : h.data()) v = std::tanh(v);
    return h;
}

nn::Tensor DeviceEncoder::code_values(const nn::ParamStore& params, const nn::Tensor& z) const {
    return coding::quantize_values(bounded(params, z), spec_);
}

std::vector<std::uint32_t> DeviceEncoder::code_indices(const nn::ParamStore& params, const nn::Tensor& z) const {
    return coding::quantize_indices(bounded(params, z), spec_);
}

coding::QuantizedCode DeviceEncoder::encode_device(const nn::ParamStore& params, std::span<const double> z) const {
    const nn::Tensor row({1, z.size()}, std::vector<double>(z.begin(), z.end()));
    const nn::Tensor b = bounded(params, row);
    return coding::quantize(b.data(), spec_);
}

void VddibArchitecture::validate() const {
    if (feature_dims.empty()) throw std::invalid_argument("vddib: at least one device");
    if (budgets.size() != feature_dims.size()) throw std::invalid_argument("vddib: one budget per device");
    if (num_classes < 2) throw std::invalid_argument("vddib: at least two classes");
}

std::uint64_t VddibArchitecture::total_bits() const {
    std::uint64_t total = 0;
    for (const auto& b : budgets) total += coding::bit_cost(b.bits, b.dims);
    return total;
}

void VddibConfig::validate() const {
    if (!(beta >= 0.0) || !std::isfinite(beta)) throw std::invalid_argument("vddib: beta must be finite and >= 0");
    if (batch_size == 0) throw std::invalid_argument("vddib: batch size must be positive");
}

VddibModel::VddibModel(VddibArchitecture arch) : arch_(std::move(arch)) {
    arch_.validate();
    std::size_t joint_in = 0;
    for (std::size_t k = 0; k < arch_.feature_dims.size(); ++k) {
        const auto& b = arch_.budgets[k];
        encoders_.emplace_back(encoder_prefix(k), arch_.feature_dims[k], arch_.encoder_hidden,
                               coding::QuantizerSpec(b.bits, b.dims));
        aux_.emplace_back(aux_prefix(k), nn::MlpShape{b.dims, arch_.aux_hidden, arch_.num_classes});
        joint_in += b.dims;
    }
    joint_ = nn::Mlp(joint_prefix(), {joint_in, arch_.joint_hidden, arch_.num_classes});
}

void VddibModel::init(nn::ParamStore& params, nn::Rng& rng) const {
    for (const auto& e : encoders_) e.init(params, rng);
    joint_.init(params, rng);
    for (const auto& a : aux_) a.init(params, rng);
}

std::vector<nn::Var> VddibModel::encode_all(nn::Tape& tape, nn::ParamStore& params, std::span<const nn::Var> z) const {
    if (z.size() != devices()) throw std::invalid_argument("vddib: one feature batch per device required");
    std::vector<nn::Var> codes;
    for (std::size_t k = 0; k < devices(); ++k) codes.push_back(encoders_[k].encode(tape, params, z[k]));
    return codes;
}

nn::Var VddibModel::joint_logits(nn::Tape& tape, nn::ParamStore& params, std::span<const nn::Var> codes) const {
    if (codes.size() != devices()) throw std::invalid_argument("vddib: missing device code");
    return joint_.forward(tape, params, tape.concat_cols(codes));
}

nn::Var VddibModel::aux_logits(nn::Tape& tape, nn::ParamStore& params, std::size_t k, nn::Var code) const {
    return aux_.at(k).forward(tape, params, code);
}

std::vector<nn::Tensor> VddibModel::code_values(const nn::ParamStore& params, std::span<const nn::Tensor> z) const {
    if (z.size() != devices()) throw std::invalid_argument("vddib: one feature batch per device required");
    std::vector<nn::Tensor> codes;
    for (std::size_t k = 0; k < devices(); ++k) codes.push_back(encoders_[k].code_values(params, z[k]));
    return codes;
}

nn::Tensor VddibModel::joint_logits(const nn::ParamStore& params, std::span<const nn::Tensor> codes) const {
    if (codes.size() != devices()) throw std::invalid_argument("vddib: missing device code");
    return joint_.infer(params, nn::concat_cols(codes));
}

nn::Tensor VddibModel::predict_logits(const nn::ParamStore& params, std::span<const nn::Tensor> z) const {
    return joint_logits(params, code_values(params, z));
}

VddibLoss vddib_loss(nn::Tape& tape, nn::ParamStore& params, const VddibModel& model, std::span<const nn::Var> codes,
                     std::span<const std::uint32_t> labels, double beta) {
    if (codes.size() != model.devices()) throw std::invalid_argument("vddib_loss: missing device code");
    if (labels.empty()) throw std::invalid_argument("vddib_loss: empty batch");
    const nn::Var joint = tape.mean(tape.cross_entropy(model.joint_logits(tape, params, codes), labels));
    nn::Var aux;
    double rate = 0.0;
    for (std::size_t k = 0; k < model.devices(); ++k) {
        const nn::Var ce = tape.mean(tape.cross_entropy(model.aux_logits(tape, params, k, codes[k]), labels));
        aux = aux.valid() ? tape.add(aux, ce) : ce;
        rate += static_cast<double>(coding::bit_cost(model.encoder(k).spec()));
    }
    const nn::Var side = tape.add_scalar(aux, rate * std::numbers::ln2);
    return {tape.add(joint, tape.scale(side, beta)), joint, aux, rate};
}

VddibTrainResult train_vddib(const data::MultiViewDataset& features, const VddibModel& model, nn::ParamStore& params,
                             const VddibConfig& config, const nn::StepObserver& observer) {
    config.validate();
    if (features.empty()) throw std::invalid_argument("train_vddib: empty dataset");
    if (features.devices() != model.devices()) throw std::invalid_argument("train_vddib: device count mismatch");

    nn::Rng init_rng = nn::make_rng(config.seed, kInitStream);
    model.init(params, init_rng);
    nn::Optimizer opt(config.optimizer, std::string(VddibModel::kPrefix) + "/");
    data::BatchSampler sampler(features.size(), config.batch_size, config.seed);

    VddibTrainResult result;
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
            const auto codes = model.encode_all(tape, params, z);
            const VddibLoss loss = vddib_loss(tape, params, model, codes, labels, config.beta);
            rec.loss = tape.value(loss.total).item();
            rec.task = tape.value(loss.joint_ce).item();
            rec.side = tape.value(loss.aux_ce).item();
            rec.bits = loss.rate_bits;
            tape.backward(loss.total);
        } catch (const nn::NonFiniteError& e) {
            throw nn::TrainingDivergence(std::string("vddib training diverged: ") + e.what(), step);
        }
        opt.step(params);
        result.trace.push_back(rec);
        if (observer) observer(rec);
    }
    return result;
}

nlohmann::json to_json(const VddibArchitecture& a) {
    nlohmann::json budgets = nlohmann::json::array();
    for (const auto& b : a.budgets) budgets.push_back({{"bits", b.bits}, {"dims", b.dims}});
    return {{"feature_dims", a.feature_dims},   {"budgets", budgets},
            {"encoder_hidden", a.encoder_hidden}, {"joint_hidden", a.joint_hidden},
            {"aux_hidden", a.aux_hidden},         {"num_classes", a.num_classes}};
}

VddibArchitecture vddib_architecture_from_json(const nlohmann::json& j) {
    VddibArchitecture a;
    a.feature_dims = j.value("feature_dims", a.feature_dims);
    if (j.contains("budgets")) {
        a.budgets.clear();
        for (const auto& b : j.at("budgets")) a.budgets.push_back({b.at("bits").get<unsigned>(), b.at("dims").get<std::size_t>()});
    }
    a.encoder_hidden = j.value("encoder_hidden", a.encoder_hidden);
    a.joint_hidden = j.value("joint_hidden", a.joint_hidden);
    a.aux_hidden = j.value("aux_hidden", a.aux_hidden);
    a.num_classes = j.value("num_classes", a.num_classes);
    a.validate();
    return a;
}

}  // namespace tocomm::vddib
