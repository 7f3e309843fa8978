#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "tocomm/data/mnist.hpp"
#include "tocomm/eval/dvib.hpp"
#include "tocomm/eval/metrics.hpp"
#include "tocomm/sim/episode.hpp"
#include "tocomm/sr/sr.hpp"
#include "tocomm/vddib/vddib.hpp"
#include "tocomm/vib/vib.hpp"

namespace tocomm::eval {

enum class Family { vib, vddib, vddib_sr, dvib_baseline };

Family parse_family(std::string_view s);
std::string to_string(Family f);

struct VibStage {
    vib::VibArchitecture architecture;
    vib::VibConfig training;
};

struct VddibStage {
    vddib::VddibArchitecture architecture;
    vddib::VddibConfig training;
};

struct SrStage {
    sr::SrArchitecture architecture;
    sr::SrConfig training;
    // Inference stopping threshold. When absent it is calibrated on the
    // validation split so that average bits match `target_bits`.
    std::optional<double> threshold;
    std::optional<double> target_bits;
};

// One trainable and evaluable configuration. Stage seeds are derived from
// `seed`; the per-stage seed fields are ignored.
struct ExperimentConfig {
    Family family = Family::vddib;
    data::DatasetSpec dataset;
    VibStage vib;
    VddibStage vddib;
    SrStage sr;
    sim::ChannelModel channel;
    std::uint64_t seed = 0;
    std::filesystem::path output_dir;

    void validate() const;
};

nlohmann::json to_json(const ExperimentConfig& c);
ExperimentConfig experiment_from_json(const nlohmann::json& j);

// FNV-1a over the canonical (key-sorted, compact) JSON dump, so field order in
// the source document does not matter. The output directory is excluded.
std::uint64_t config_hash(const ExperimentConfig& c);
std::string hex64(std::uint64_t v);

// Seed for a named stage, e.g. ("vib", k).
std::uint64_t derive_seed(std::uint64_t seed, std::string_view stage, std::uint64_t index = 0);

struct ExperimentRecord {
    std::string run_id;
    std::uint64_t seed = 0;
    std::string config_hash;
    std::string family;
    nlohmann::json config;
    nlohmann::json metrics;  // empty object on failure
    std::string error;       // empty on success
    std::string started_at;
    std::string finished_at;

    bool ok() const noexcept { return error.empty(); }
};

nlohmann::json to_json(const ExperimentRecord& r);
ExperimentRecord record_from_json(const nlohmann::json& j);

// Append-only JSON-lines store `records.jsonl` in a directory. Appends take
// an exclusive advisory lock on the file.
class RecordStore {
public:
    explicit RecordStore(std::filesystem::path dir);

    void append(const ExperimentRecord& r) const;
    std::vector<ExperimentRecord> load() const;
    const std::filesystem::path& path() const noexcept { return path_; }

private:
    std::filesystem::path path_;
};

// Columns: avg_bits, accuracy, delta_bits, rate_bits, beta, T, delta0, seed.
void write_rate_relevance_csv(const std::filesystem::path& path, std::span<const ExperimentRecord> records);

// Trained artifacts of one run, all in one parameter store (D-VIB runs keep
// their own store because they reuse the coding prefixes).
struct TrainedRun {
    nn::ParamStore params;
    std::vector<vib::VibModel> extractors;
    std::optional<vddib::VddibModel> vddib;
    std::optional<sr::SrModel> sr;
    std::optional<DvibModel> dvib;
    std::vector<nn::StepRecord> trace;  // last trained stage
};

// Untrained extractor models of the config, one per device.
std::vector<vib::VibModel> make_extractors(const ExperimentConfig& c);

// Trains device k's extractor into `run.params` with the seed derived for
// ("vib", k); `run.extractors` must come from make_extractors.
void train_extractor_stage(const ExperimentConfig& c, const data::DataSplits& splits, std::size_t k, TrainedRun& run);

// Trains the coding stage of the config's family on top of trained
// extractors (or on raw views for the D-VIB baseline).
void train_coding_stage(const ExperimentConfig& c, const data::DataSplits& splits, TrainedRun& run);

// Rebuilds the models of the config's family around checkpointed parameters.
// Throws std::invalid_argument when a required parameter is missing.
TrainedRun restore_run(const ExperimentConfig& c, nn::ParamStore params);

// Trains and evaluates configurations. Datasets and trained extractors are
// cached, so sweeps over coding parameters train each extractor once.
class ExperimentRunner {
public:
    ExperimentRunner() = default;

    // Makes `splits` the data for `spec` instead of loading it.
    void register_dataset(const data::DatasetSpec& spec, data::DataSplits splits);
    const data::DataSplits& dataset(const data::DatasetSpec& spec);

    // Extractors for the config's dataset and VIB stage; trained on first use.
    const TrainedRun& extractors(const ExperimentConfig& c);

    TrainedRun train(const ExperimentConfig& c);
    nlohmann::json evaluate(const ExperimentConfig& c, const TrainedRun& run);

    // Train + evaluate; failures become records with `error` set.
    ExperimentRecord run(const ExperimentConfig& c, const std::string& run_id = {});
    // Evaluate-only record for restored models.
    ExperimentRecord evaluate_record(const ExperimentConfig& c, const TrainedRun& run, const std::string& run_id = {});

private:
    std::map<std::string, data::DataSplits> data_;
    std::map<std::string, TrainedRun> vib_;
};

struct SweepGrid {
    std::vector<double> betas;
    std::vector<std::size_t> rounds;
    std::vector<double> thresholds;
    std::vector<std::vector<vddib::DeviceBudget>> budgets;
    std::vector<std::uint64_t> seeds;

    bool empty() const noexcept;
};

nlohmann::json to_json(const SweepGrid& g);
SweepGrid sweep_grid_from_json(const nlohmann::json& j);

// Cartesian product over the non-empty axes; an all-empty grid has no points.
std::vector<ExperimentConfig> expand_grid(const ExperimentConfig& base, const SweepGrid& grid);

// One record per grid point, appended to `store` when given.
std::vector<ExperimentRecord> sweep(ExperimentRunner& runner, const ExperimentConfig& base, const SweepGrid& grid,
                                    const RecordStore* store = nullptr);

struct AblationResult {
    std::vector<ExperimentRecord> proposed;  // extraction first, then coding
    std::vector<ExperimentRecord> baseline;  // coding on raw views
};

// Paired runs per budget with identical seeds and data.
AblationResult ablate_dvib(ExperimentRunner& runner, const ExperimentConfig& base,
                           std::span<const std::vector<vddib::DeviceBudget>> budgets, const RecordStore* store = nullptr);

}  // namespace tocomm::eval
