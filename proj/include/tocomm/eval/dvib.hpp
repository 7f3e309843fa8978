#pragma once

#include <string>
#include <vector>

#include "tocomm/data/dataset.hpp"
#include "tocomm/nn/optimizer.hpp"
#include "tocomm/nn/params.hpp"
#include "tocomm/nn/training.hpp"
#include "tocomm/vddib/vddib.hpp"
#include "tocomm/vib/vib.hpp"

namespace tocomm::eval {

// Distributed coding directly on raw views: each device stacks a Gaussian
// encoder trunk and a quantizing device encoder, trained end to end with the
// distributed coding loss and no separate extraction stage. Layer widths
// match the extraction-first pipeline, so only the training procedure differs.
class DvibModel {
public:
    DvibModel(vib::VibArchitecture trunk, vddib::VddibArchitecture coding);

    static std::string device_prefix(std::size_t k) { return "dvib/k" + std::to_string(k); }

    void init(nn::ParamStore& params, nn::Rng& rng) const;

    std::size_t devices() const noexcept { return trunks_.size(); }
    const vib::VibModel& trunk(std::size_t k) const { return trunks_.at(k); }
    const vddib::VddibModel& coding() const noexcept { return coding_; }

    // Posterior means of every device trunk, ready for the coding model.
    data::MultiViewDataset features(const nn::ParamStore& params, const data::MultiViewDataset& views) const;

private:
    std::vector<vib::VibModel> trunks_;
    vddib::VddibModel coding_;
};

struct DvibConfig {
    double beta = 0.01;
    std::size_t batch_size = 100;
    std::size_t steps = 10000;
    nn::OptimizerConfig optimizer;
    std::uint64_t seed = 0;
};

struct DvibTrainResult {
    std::vector<nn::StepRecord> trace;  // task = joint CE, side = aux CE sum, bits = budget
};

DvibTrainResult train_dvib(const data::MultiViewDataset& views, const DvibModel& model, nn::ParamStore& params,
                           const DvibConfig& config, const nn::StepObserver& observer = {});

}  // namespace tocomm::eval
