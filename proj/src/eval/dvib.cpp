#include "tocomm/eval/dvib.hpp"

#include <random>
#include <stdexcept>

namespace tocomm::eval {

namespace {

constexpr std::uint64_t kInitStream = 31;
constexpr std::uint64_t kNoiseStream = 32;

}  // namespace

DvibModel::DvibModel(vib::VibArchitecture trunk, vddib::VddibArchitecture coding) : coding_(std::move(coding)) {
    for (std::size_t k = 0; k < coding_.devices(); ++k) {
        vib::VibArchitecture a = trunk;
        a.feature_dim = coding_.architecture().feature_dims[k];
        trunks_.emplace_back(device_prefix(k), a);
    }
}

void DvibModel::init(nn::ParamStore& params, nn::Rng& rng) const {
    // Only the trunks: the extraction classifier has no role end to end.
    for (const auto& t : trunks_) t.trunk().init(params, rng);
    coding_.init(params, rng);
}

data::MultiViewDataset DvibModel::features(const nn::ParamStore& params, const data::MultiViewDataset& views) const {
    return vib::extract_features(trunks_, params, views);
}

DvibTrainResult train_dvib(const data::MultiViewDataset& views, const DvibModel& model, nn::ParamStore& params,
                           const DvibConfig& config, const nn::StepObserver& observer) {
    vddib::VddibConfig check;
    check.beta = config.beta;
    check.batch_size = config.batch_size;
    check.validate();
    if (views.empty()) throw std::invalid_argument("train_dvib: empty dataset");
    if (views.devices() != model.devices()) throw std::invalid_argument("train_dvib: device count mismatch");

    nn::Rng init_rng = nn::make_rng(config.seed, kInitStream);
    nn::Rng noise_rng = nn::make_rng(config.seed, kNoiseStream);
    model.init(params, init_rng);
    nn::Optimizer trunk_opt(config.optimizer, "dvib/");
    nn::Optimizer coding_opt(config.optimizer, std::string(vddib::VddibModel::kPrefix) + "/");
    data::BatchSampler sampler(views.size(), config.batch_size, config.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const auto& coding = model.coding();

    DvibTrainResult result;
    result.trace.reserve(config.steps);
    for (std::size_t step = 0; step < config.steps; ++step) {
        const auto idx = sampler.next();
        const auto labels = views.batch_labels(idx);
        std::vector<nn::Tensor> eps;
        for (std::size_t k = 0; k < model.devices(); ++k) {
            nn::Tensor e = nn::Tensor::matrix(idx.size(), model.trunk(k).architecture().feature_dim);
            for (double& v : e.data()) v = normal(noise_rng);
            eps.push_back(std::move(e));
        }
        nn::StepRecord rec;
        rec.step = step;
        try {
            nn::Tape tape;
            std::vector<nn::Var> z;
            for (std::size_t k = 0; k < model.devices(); ++k) {
                const vib::GaussianVars g = model.trunk(k).encode(tape, params, tape.constant(views.batch_view(k, idx)));
                z.push_back(vib::reparameterize(tape, g.mu, g.sigma, eps[k]));
            }
            const auto codes = coding.encode_all(tape, params, z);
            const vddib::VddibLoss loss = vddib::vddib_loss(tape, params, coding, codes, labels, config.beta);
            rec.loss = tape.value(loss.total).item();
            rec.task = tape.value(loss.joint_ce).item();
            rec.side = tape.value(loss.aux_ce).item();
            rec.bits = loss.rate_bits;
            tape.backward(loss.total);
        } catch (const nn::NonFiniteError& e) {
            throw nn::TrainingDivergence(std::string("d-vib training diverged: ") + e.what(), step);
        }
        trunk_opt.step(params);
        coding_opt.step(params);
        result.trace.push_back(rec);
        if (observer) observer(rec);
    }
    return result;
}

}  // namespace tocomm::eval
