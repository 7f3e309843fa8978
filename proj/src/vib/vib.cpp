#include "tocomm/vib/vib.hpp"

#include <cmath>
#include <stdexcept>

#include "tocomm/data/dataset.hpp"
#include "tocomm/nn/functions.hpp"

namespace tocomm::vib {

namespace {

constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kNoiseStream = 2;

}  // namespace

void VibConfig::validate() const {
    if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw std::invalid_argument("vib: gamma must be finite and >= 0");
    if (batch_size == 0) throw std::invalid_argument("vib: batch size must be positive");
    if (samples_per_example == 0) throw std::invalid_argument("vib: samples per example must be positive");
}

VibModel::VibModel(std::string prefix, VibArchitecture arch)
    : prefix_(std::move(prefix)),
      arch_(std::move(arch)),
      trunk_(prefix_ + "/enc", {arch_.input, arch_.trunk_hidden, 2 * arch_.feature_dim}),
      classifier_(prefix_ + "/cls", {arch_.feature_dim, arch_.classifier_hidden, arch_.num_classes}) {}

void VibModel::init(nn::ParamStore& params, nn::Rng& rng) const {
    trunk_.init(params, rng);
    classifier_.init(params, rng);
}

GaussianVars VibModel::encode(nn::Tape& tape, nn::ParamStore& params, nn::Var x) const {
    const nn::Tensor& xv = tape.value(x);
    if (xv.cols() != arch_.input) {
        throw std::invalid_argument("vib encode: input width " + std::to_string(xv.cols()) + ", expected " +
                                    std::to_string(arch_.input));
    }
    const nn::Var h = trunk_.forward(tape, params, x);
    return {tape.slice_cols(h, 0, arch_.feature_dim),
            tape.softplus(tape.slice_cols(h, arch_.feature_dim, arch_.feature_dim))};
}

nn::Var VibModel::classify(nn::Tape& tape, nn::ParamStore& params, nn::Var z) const {
    return classifier_.forward(tape, params, z);
}

std::pair<nn::Tensor, nn::Tensor> VibModel::encode_gaussian(const nn::ParamStore& params, const nn::Tensor& x) const {
    const nn::Tensor h = trunk_.infer(params, x);
    nn::Tensor mu = nn::slice_cols(h, 0, arch_.feature_dim);
    nn::Tensor sigma = nn::slice_cols(h, arch_.feature_dim, arch_.feature_dim);
    for (double& s : sigma.data()) s = nn::softplus(s);
    return {std::move(mu), std::move(sigma)};
}

nn::Tensor VibModel::features(const nn::ParamStore& params, const nn::Tensor& x) const {
    return nn::slice_cols(trunk_.infer(params, x), 0, arch_.feature_dim);
}

nn::Tensor VibModel::logits_at_mean(const nn::ParamStore& params, const nn::Tensor& x) const {
    return classifier_.infer(params, features(params, x));
}

nn::Var reparameterize(nn::Tape& tape, nn::Var mu, nn::Var sigma, const nn::Tensor& eps) {
    const nn::Tensor& mv = tape.value(mu);
    if (mv.rows() != eps.rows() || mv.cols() != eps.cols() || tape.value(sigma).shape() != mv.shape()) {
        throw std::invalid_argument("reparameterize: mu, sigma and eps shapes differ");
    }
    return tape.add(mu, tape.mul(sigma, tape.constant(eps.reshaped(mv.shape()))));
}

nn::Tensor reparameterize(const nn::Tensor& mu, const nn::Tensor& sigma, const nn::Tensor& eps) {
    if (mu.shape() != sigma.shape() || mu.size() != eps.size()) {
        throw std::invalid_argument("reparameterize: mu, sigma and eps shapes differ");
    }
    nn::Tensor z = mu;
    for (std::size_t i = 0; i < z.size(); ++i) z[i] = mu[i] + sigma[i] * eps[i];
    return z;
}

double kl_std_normal(std::span<const double> mu, std::span<const double> sigma) {
    if (mu.size() != sigma.size()) throw std::invalid_argument("kl_std_normal: mu and sigma lengths differ");
    double acc = 0.0;
    for (std::size_t i = 0; i < mu.size(); ++i) {
        if (!(sigma[i] > 0.0)) throw std::domain_error("kl_std_normal: sigma must be positive");
        acc += (mu[i] * mu[i] + sigma[i] * sigma[i] - 1.0) / 2.0 - std::log(sigma[i]);
    }
    return acc;
}

VibLoss vib_loss(nn::Tape& tape, nn::ParamStore& params, const VibModel& model, const nn::Tensor& x,
                 std::span<const std::uint32_t> labels, const nn::Tensor& eps, double gamma) {
    if (labels.empty() || x.rows() == 0) throw std::invalid_argument("vib_loss: empty batch");
    if (labels.size() != x.rows()) throw std::invalid_argument("vib_loss: label count does not match batch");
    const GaussianVars g = model.encode(tape, params, tape.constant(x));
    const nn::Var z = reparameterize(tape, g.mu, g.sigma, eps);
    const nn::Var ce = tape.mean(tape.cross_entropy(model.classify(tape, params, z), labels));
    const nn::Var kl = tape.mean(tape.kl_std_normal(g.mu, g.sigma));
    return {tape.add(ce, tape.scale(kl, gamma)), ce, kl};
}

VibTrainResult train_vib(const nn::Tensor& x, std::span<const std::uint32_t> labels, const VibModel& model,
                         nn::ParamStore& params, const VibConfig& config, const nn::StepObserver& observer) {
    config.validate();
    if (x.rows() == 0) throw std::invalid_argument("train_vib: empty dataset");
    if (labels.size() != x.rows()) throw std::invalid_argument("train_vib: label count does not match data");

    nn::Rng init_rng = nn::make_rng(config.seed, kInitStream);
    nn::Rng noise_rng = nn::make_rng(config.seed, kNoiseStream);
    model.init(params, init_rng);
    nn::Optimizer opt(config.optimizer, model.prefix() + "/");
    data::BatchSampler sampler(x.rows(), config.batch_size, config.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const std::size_t d = model.architecture().feature_dim;
    const std::size_t reps = config.samples_per_example;

    VibTrainResult result;
    result.trace.reserve(config.steps);
    for (std::size_t step = 0; step < config.steps; ++step) {
        const auto idx = sampler.next();
        // L samples per example: the batch is tiled L times, so the mean over
        // rows is the mean over examples of the mean over samples.
        std::vector<std::size_t> rows;
        std::vector<std::uint32_t> batch_labels;
        rows.reserve(idx.size() * reps);
        for (std::size_t r = 0; r < reps; ++r) {
            for (std::size_t i : idx) {
                rows.push_back(i);
                batch_labels.push_back(labels[i]);
            }
        }
        const nn::Tensor xb = nn::gather_rows(x, rows);
        nn::Tensor eps = nn::Tensor::matrix(rows.size(), d);
        for (double& e : eps.data()) e = normal(noise_rng);

        nn::StepRecord rec;
        rec.step = step;
        try {
            nn::Tape tape;
            const VibLoss loss = vib_loss(tape, params, model, xb, batch_labels, eps, config.gamma);
            rec.loss = tape.value(loss.total).item();
            rec.task = tape.value(loss.ce).item();
            rec.side = tape.value(loss.kl).item();
            tape.backward(loss.total);
        } catch (const nn::NonFiniteError& e) {
            throw nn::TrainingDivergence(std::string("vib training diverged: ") + e.what(), step);
        }
        opt.step(params);
        result.trace.push_back(rec);
        if (observer) observer(rec);
    }
    return result;
}

data::MultiViewDataset extract_features(std::span<const VibModel> models, const nn::ParamStore& params,
                                        const data::MultiViewDataset& views) {
    if (models.size() != views.devices()) throw std::invalid_argument("extract_features: one model per device required");
    constexpr std::size_t kChunk = 2048;
    std::vector<nn::Tensor> out;
    for (std::size_t k = 0; k < models.size(); ++k) {
        const nn::Tensor& v = views.view(k);
        nn::Tensor z = nn::Tensor::matrix(v.rows(), models[k].architecture().feature_dim);
        for (std::size_t begin = 0; begin < v.rows(); begin += kChunk) {
            const std::size_t count = std::min(kChunk, v.rows() - begin);
            std::vector<std::size_t> idx(count);
            for (std::size_t i = 0; i < count; ++i) idx[i] = begin + i;
            const nn::Tensor f = models[k].features(params, nn::gather_rows(v, idx));
            std::copy(f.data().begin(), f.data().end(), z.row(begin).begin());
        }
        out.push_back(std::move(z));
    }
    return views.with_views(std::move(out));
}

nlohmann::json to_json(const VibArchitecture& a) {
    return {{"input", a.input},
            {"trunk_hidden", a.trunk_hidden},
            {"feature_dim", a.feature_dim},
            {"classifier_hidden", a.classifier_hidden},
            {"num_classes", a.num_classes}};
}

VibArchitecture architecture_from_json(const nlohmann::json& j) {
    VibArchitecture a;
    a.input = j.value("input", a.input);
    a.trunk_hidden = j.value("trunk_hidden", a.trunk_hidden);
    a.feature_dim = j.value("feature_dim", a.feature_dim);
    a.classifier_hidden = j.value("classifier_hidden", a.classifier_hidden);
    a.num_classes = j.value("num_classes", a.num_classes);
    return a;
}

}  // namespace tocomm::vib
