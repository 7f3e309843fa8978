#include "tocomm/eval/experiment.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <charconv>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <functional>
#include <stdexcept>

#include "tocomm/nn/functions.hpp"

namespace tocomm::eval {

namespace {

using nlohmann::json;

json optimizer_json(const nn::OptimizerConfig& o) {
    return {{"kind", nn::to_string(o.kind)},
            {"learning_rate", o.learning_rate},
            {"beta1", o.beta1},
            {"beta2", o.beta2},
            {"epsilon", o.epsilon}};
}

nn::OptimizerConfig optimizer_from_json(const json& j) {
    nn::OptimizerConfig o;
    if (j.contains("kind")) o.kind = nn::parse_optimizer(j.at("kind").get<std::string>());
    o.learning_rate = j.value("learning_rate", o.learning_rate);
    o.beta1 = j.value("beta1", o.beta1);
    o.beta2 = j.value("beta2", o.beta2);
    o.epsilon = j.value("epsilon", o.epsilon);
    return o;
}

json dataset_json(const data::DatasetSpec& d) {
    json j{{"source", data::to_string(d.source)},
           {"data_dir", d.data_dir.string()},
           {"devices", d.devices},
           {"train_size", d.train_size},
           {"validation_size", d.validation_size},
           {"test_size", d.test_size},
           {"seed", d.seed}};
    j["corruption"] = d.corruption
                          ? json{{"mask_size", d.corruption->mask_size}, {"noise_max", d.corruption->noise_max}}
                          : json(nullptr);
    return j;
}

data::DatasetSpec dataset_from_json(const json& j) {
    data::DatasetSpec d;
    if (j.contains("source")) d.source = data::parse_data_source(j.at("source").get<std::string>());
    d.data_dir = j.value("data_dir", std::string{});
    d.devices = j.value("devices", d.devices);
    d.train_size = j.value("train_size", d.train_size);
    d.validation_size = j.value("validation_size", d.validation_size);
    d.test_size = j.value("test_size", d.test_size);
    d.seed = j.value("seed", d.seed);
    if (j.contains("corruption") && !j.at("corruption").is_null()) {
        data::CorruptionParams c;
        c.mask_size = j.at("corruption").value("mask_size", c.mask_size);
        c.noise_max = j.at("corruption").value("noise_max", c.noise_max);
        d.corruption = c;
    }
    return d;
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> optional_from_json(const json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<double>();
}

std::string utc_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::uint64_t trace_hash(const std::vector<nn::StepRecord>& trace) {
    std::uint64_t h = data::fnv1a({});
    for (const auto& r : trace) {
        const double v[4] = {r.loss, r.task, r.side, r.bits};
        h = data::fnv1a({reinterpret_cast<const unsigned char*>(v), sizeof v}, h);
    }
    return h;
}

std::string dataset_key(const data::DatasetSpec& spec) { return dataset_json(spec).dump(); }

std::uint64_t splits_hash(const data::DataSplits& s) {
    const std::uint64_t parts[3] = {s.train.content_hash(), s.validation.content_hash(), s.test.content_hash()};
    return data::fnv1a({reinterpret_cast<const unsigned char*>(parts), sizeof parts});
}

// Every parameter `init` would create must be present with the same shape.
template <class Model>
void require_params(const Model& model, const nn::ParamStore& params, const char* what) {
    nn::ParamStore fresh;
    nn::Rng rng(0);
    model.init(fresh, rng);
    for (const auto& name : fresh.names()) {
        if (!params.contains(name)) {
            throw std::invalid_argument(std::string(what) + " checkpoint lacks parameter '" + name + "'");
        }
        if (params.get(name).value.shape() != fresh.get(name).value.shape()) {
            throw std::invalid_argument(std::string(what) + " checkpoint has the wrong shape for '" + name + "'");
        }
    }
}

std::vector<vddib::DeviceBudget> budgets_of(const ExperimentConfig& c) {
    return c.family == Family::vddib_sr ? c.sr.architecture.chunks : c.vddib.architecture.budgets;
}

}  // namespace

Family parse_family(std::string_view s) {
    if (s == "vib") return Family::vib;
    if (s == "vddib") return Family::vddib;
    if (s == "vddib-sr") return Family::vddib_sr;
    if (s == "dvib-baseline") return Family::dvib_baseline;
    throw std::invalid_argument("unknown model family '" + std::string(s) + "'");
}

std::string to_string(Family f) {
    switch (f) {
        case Family::vib: return "vib";
        case Family::vddib: return "vddib";
        case Family::vddib_sr: return "vddib-sr";
        case Family::dvib_baseline: return "dvib-baseline";
    }
    return "unknown";
}

void ExperimentConfig::validate() const {
    dataset.validate();
    vib.training.validate();
    const std::size_t K = dataset.devices;
    auto check_dims = [&](const std::vector<std::size_t>& dims, const char* what) {
        if (dims.size() != K) throw std::invalid_argument(std::string(what) + ": one entry per device required");
        for (std::size_t d : dims) {
            if (d != vib.architecture.feature_dim) {
                throw std::invalid_argument(std::string(what) + ": feature width must equal the extractor feature width");
            }
        }
    };
    if (family == Family::vddib || family == Family::dvib_baseline) {
        vddib.architecture.validate();
        vddib.training.validate();
        check_dims(vddib.architecture.feature_dims, "vddib architecture");
    }
    if (family == Family::vddib_sr) {
        sr.architecture.validate();
        sr.training.validate();
        check_dims(sr.architecture.feature_dims, "sr architecture");
    } else if (sr.threshold || sr.target_bits) {
        throw std::invalid_argument("a stopping threshold applies only to the vddib-sr family");
    }
    if (sr.threshold && !(*sr.threshold >= 0.0)) throw std::invalid_argument("threshold must be >= 0");
    if (sr.target_bits && !(*sr.target_bits > 0.0)) throw std::invalid_argument("target bits must be positive");
    channel.validate();
}

json to_json(const ExperimentConfig& c) {
    return {
        {"family", to_string(c.family)},
        {"seed", c.seed},
        {"output_dir", c.output_dir.string()},
        {"dataset", dataset_json(c.dataset)},
        {"vib",
         {{"architecture", vib::to_json(c.vib.architecture)},
          {"gamma", c.vib.training.gamma},
          {"batch_size", c.vib.training.batch_size},
          {"steps", c.vib.training.steps},
          {"samples_per_example", c.vib.training.samples_per_example},
          {"optimizer", optimizer_json(c.vib.training.optimizer)}}},
        {"vddib",
         {{"architecture", vddib::to_json(c.vddib.architecture)},
          {"beta", c.vddib.training.beta},
          {"batch_size", c.vddib.training.batch_size},
          {"steps", c.vddib.training.steps},
          {"optimizer", optimizer_json(c.vddib.training.optimizer)}}},
        {"sr",
         {{"architecture", sr::to_json(c.sr.architecture)},
          {"beta", c.sr.training.beta},
          {"batch_size", c.sr.training.batch_size},
          {"steps", c.sr.training.steps},
          {"optimizer", optimizer_json(c.sr.training.optimizer)},
          {"threshold", optional_json(c.sr.threshold)},
          {"target_bits", optional_json(c.sr.target_bits)}}},
        {"channel",
         {{"mode", sim::to_string(c.channel.mode)}, {"uplink_bytes_per_second", c.channel.uplink_bytes_per_second}}},
    };
}

ExperimentConfig experiment_from_json(const json& j) {
    if (!j.is_object()) throw std::invalid_argument("experiment config must be a JSON object");
    ExperimentConfig c;
    if (j.contains("family")) c.family = parse_family(j.at("family").get<std::string>());
    c.seed = j.value("seed", c.seed);
    c.output_dir = j.value("output_dir", std::string{});
    if (j.contains("dataset")) c.dataset = dataset_from_json(j.at("dataset"));
    if (j.contains("vib")) {
        const json& v = j.at("vib");
        if (v.contains("architecture")) c.vib.architecture = vib::architecture_from_json(v.at("architecture"));
        auto& t = c.vib.training;
        t.gamma = v.value("gamma", t.gamma);
        t.batch_size = v.value("batch_size", t.batch_size);
        t.steps = v.value("steps", t.steps);
        t.samples_per_example = v.value("samples_per_example", t.samples_per_example);
        if (v.contains("optimizer")) t.optimizer = optimizer_from_json(v.at("optimizer"));
    }
    if (j.contains("vddib")) {
        const json& v = j.at("vddib");
        if (v.contains("architecture")) c.vddib.architecture = vddib::vddib_architecture_from_json(v.at("architecture"));
        auto& t = c.vddib.training;
        t.beta = v.value("beta", t.beta);
        t.batch_size = v.value("batch_size", t.batch_size);
        t.steps = v.value("steps", t.steps);
        if (v.contains("optimizer")) t.optimizer = optimizer_from_json(v.at("optimizer"));
    }
    if (j.contains("sr")) {
        const json& v = j.at("sr");
        if (v.contains("architecture")) c.sr.architecture = sr::sr_architecture_from_json(v.at("architecture"));
        auto& t = c.sr.training;
        t.beta = v.value("beta", t.beta);
        t.batch_size = v.value("batch_size", t.batch_size);
        t.steps = v.value("steps", t.steps);
        if (v.contains("optimizer")) t.optimizer = optimizer_from_json(v.at("optimizer"));
        c.sr.threshold = optional_from_json(v, "threshold");
        c.sr.target_bits = optional_from_json(v, "target_bits");
    }
    if (j.contains("channel")) {
        const json& v = j.at("channel");
        if (v.contains("mode")) c.channel.mode = sim::parse_latency_mode(v.at("mode").get<std::string>());
        c.channel.uplink_bytes_per_second = v.value("uplink_bytes_per_second", c.channel.uplink_bytes_per_second);
    }
    c.validate();
    return c;
}

std::uint64_t config_hash(const ExperimentConfig& c) {
    json j = to_json(c);
    j.erase("output_dir");
    const std::string s = j.dump();  // object keys are stored sorted
    return data::fnv1a({reinterpret_cast<const unsigned char*>(s.data()), s.size()});
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view stage, std::uint64_t index) {
    std::uint64_t h = data::fnv1a({reinterpret_cast<const unsigned char*>(&seed), sizeof seed});
    h = data::fnv1a({reinterpret_cast<const unsigned char*>(stage.data()), stage.size()}, h);
    return data::fnv1a({reinterpret_cast<const unsigned char*>(&index), sizeof index}, h);
}

json to_json(const ExperimentRecord& r) {
    return {{"run_id", r.run_id},         {"seed", r.seed},       {"config_hash", r.config_hash},
            {"family", r.family},         {"config", r.config},   {"metrics", r.metrics},
            {"error", r.error},           {"started_at", r.started_at}, {"finished_at", r.finished_at}};
}

ExperimentRecord record_from_json(const json& j) {
    ExperimentRecord r;
    r.run_id = j.at("run_id").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.config_hash = j.at("config_hash").get<std::string>();
    r.family = j.at("family").get<std::string>();
    r.config = j.at("config");
    r.metrics = j.at("metrics");
    r.error = j.value("error", std::string{});
    r.started_at = j.value("started_at", std::string{});
    r.finished_at = j.value("finished_at", std::string{});
    return r;
}

RecordStore::RecordStore(std::filesystem::path dir) : path_(std::move(dir) / "records.jsonl") {
    std::filesystem::create_directories(path_.parent_path());
}

void RecordStore::append(const ExperimentRecord& r) const {
    const std::string line = to_json(r).dump() + "\n";
    const int fd = ::open(path_.c_str(), O_WRONLY | O_APPEND | O_CREAT, 0644);
    if (fd < 0) throw std::runtime_error("record store: cannot open " + path_.string());
    struct Closer {
        int fd;
        ~Closer() {
            ::flock(fd, LOCK_UN);
            ::close(fd);
        }
    } closer{fd};
    if (::flock(fd, LOCK_EX) != 0) throw std::runtime_error("record store: cannot lock " + path_.string());
    std::size_t written = 0;
    while (written < line.size()) {
        const ssize_t n = ::write(fd, line.data() + written, line.size() - written);
        if (n < 0) throw std::runtime_error("record store: write failed for " + path_.string());
        written += static_cast<std::size_t>(n);
    }
}

std::vector<ExperimentRecord> RecordStore::load() const {
    std::vector<ExperimentRecord> out;
    std::ifstream in(path_);
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty()) out.push_back(record_from_json(json::parse(line)));
    }
    return out;
}

void write_rate_relevance_csv(const std::filesystem::path& path, std::span<const ExperimentRecord> records) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "avg_bits,accuracy,delta_bits,rate_bits,beta,T,delta0,seed\n";
    auto field = [](const json& j, const char* key) -> std::string {
        if (!j.contains(key) || j.at(key).is_null()) return "";
        char buf[32];
        const auto end = std::to_chars(buf, buf + sizeof buf, j.at(key).get<double>()).ptr;  // shortest round-trip
        return std::string(buf, end);
    };
    for (const auto& r : records) {
        if (!r.ok()) continue;
        const json& m = r.metrics;
        out << field(m, "avg_bits") << ',' << field(m, "accuracy") << ',' << field(m, "delta_bits") << ','
            << field(m, "rate_bits") << ',' << field(m, "beta") << ',' << m.value("rounds", 1) << ','
            << field(m, "threshold") << ',' << r.seed << '\n';
    }
}

void ExperimentRunner::register_dataset(const data::DatasetSpec& spec, data::DataSplits splits) {
    data_[dataset_key(spec)] = std::move(splits);
}

const data::DataSplits& ExperimentRunner::dataset(const data::DatasetSpec& spec) {
    const std::string key = dataset_key(spec);
    auto it = data_.find(key);
    if (it == data_.end()) it = data_.emplace(key, data::build_mnist_splits(spec)).first;
    return it->second;
}

std::vector<vib::VibModel> make_extractors(const ExperimentConfig& c) {
    std::vector<vib::VibModel> out;
    for (std::size_t k = 0; k < c.dataset.devices; ++k) out.emplace_back(vib::VibModel::device_prefix(k), c.vib.architecture);
    return out;
}

void train_extractor_stage(const ExperimentConfig& c, const data::DataSplits& splits, std::size_t k, TrainedRun& run) {
    if (k >= run.extractors.size()) throw std::out_of_range("device index out of range");
    if (splits.train.devices() != run.extractors.size()) throw std::invalid_argument("dataset device count mismatch");
    vib::VibConfig cfg = c.vib.training;
    cfg.seed = derive_seed(c.seed, "vib", k);
    run.trace = vib::train_vib(splits.train.view(k), splits.train.labels(), run.extractors[k], run.params, cfg).trace;
}

void train_coding_stage(const ExperimentConfig& c, const data::DataSplits& splits, TrainedRun& run) {
    if (splits.train.devices() != c.dataset.devices) throw std::invalid_argument("dataset device count mismatch");
    switch (c.family) {
        case Family::vib:
            return;
        case Family::dvib_baseline: {
            DvibConfig cfg;
            cfg.beta = c.vddib.training.beta;
            cfg.batch_size = c.vddib.training.batch_size;
            cfg.steps = c.vddib.training.steps;
            cfg.optimizer = c.vddib.training.optimizer;
            cfg.seed = derive_seed(c.seed, "dvib");
            run.dvib.emplace(c.vib.architecture, c.vddib.architecture);
            run.trace = train_dvib(splits.train, *run.dvib, run.params, cfg).trace;
            return;
        }
        case Family::vddib: {
            for (const auto& e : run.extractors) require_params(e, run.params, "extractor");
            const auto features = vib::extract_features(run.extractors, run.params, splits.train);
            vddib::VddibConfig cfg = c.vddib.training;
            cfg.seed = derive_seed(c.seed, "vddib");
            run.vddib.emplace(c.vddib.architecture);
            run.trace = vddib::train_vddib(features, *run.vddib, run.params, cfg).trace;
            return;
        }
        case Family::vddib_sr: {
            for (const auto& e : run.extractors) require_params(e, run.params, "extractor");
            const auto features = vib::extract_features(run.extractors, run.params, splits.train);
            sr::SrConfig cfg = c.sr.training;
            cfg.seed = derive_seed(c.seed, "vddib-sr");
            run.sr.emplace(c.sr.architecture);
            run.trace = sr::train_vddib_sr(features, *run.sr, run.params, cfg).trace;
            return;
        }
    }
}

TrainedRun restore_run(const ExperimentConfig& c, nn::ParamStore params) {
    c.validate();
    TrainedRun run;
    run.params = std::move(params);
    if (c.family == Family::dvib_baseline) {
        run.dvib.emplace(c.vib.architecture, c.vddib.architecture);
        require_params(*run.dvib, run.params, "d-vib");
        return run;
    }
    run.extractors = make_extractors(c);
    for (const auto& e : run.extractors) require_params(e, run.params, "extractor");
    if (c.family == Family::vddib) {
        run.vddib.emplace(c.vddib.architecture);
        require_params(*run.vddib, run.params, "vddib");
    } else if (c.family == Family::vddib_sr) {
        run.sr.emplace(c.sr.architecture);
        require_params(*run.sr, run.params, "vddib-sr");
    }
    return run;
}

const TrainedRun& ExperimentRunner::extractors(const ExperimentConfig& c) {
    json key = to_json(c);
    const std::string k = json{{"dataset", key["dataset"]}, {"vib", key["vib"]}, {"seed", c.seed}}.dump();
    if (auto it = vib_.find(k); it != vib_.end()) return it->second;

    const auto& splits = dataset(c.dataset);
    TrainedRun run;
    run.extractors = make_extractors(c);
    for (std::size_t d = 0; d < run.extractors.size(); ++d) train_extractor_stage(c, splits, d, run);
    return vib_.emplace(k, std::move(run)).first->second;
}

TrainedRun ExperimentRunner::train(const ExperimentConfig& c) {
    c.validate();
    const auto& splits = dataset(c.dataset);
    if (splits.train.devices() != c.dataset.devices) throw std::invalid_argument("dataset device count mismatch");

    TrainedRun run;
    if (c.family != Family::dvib_baseline) {
        const TrainedRun& ex = extractors(c);
        run.extractors = ex.extractors;
        run.params.import_prefix(ex.params, "vib/", "vib/");
        run.trace = ex.trace;
    }
    train_coding_stage(c, splits, run);
    return run;
}

json ExperimentRunner::evaluate(const ExperimentConfig& c, const TrainedRun& run) {
    const auto& splits = dataset(c.dataset);
    json m;
    m["dataset_hash"] = hex64(splits_hash(splits));
    m["trace_hash"] = hex64(trace_hash(run.trace));
    m["final_loss"] = run.trace.empty() ? json(nullptr) : json(run.trace.back().loss);
    m["rounds"] = 1;

    if (c.family == Family::vib) {
        std::vector<double> acc;
        for (std::size_t k = 0; k < run.extractors.size(); ++k) {
            const auto pred = nn::argmax_rows(run.extractors[k].logits_at_mean(run.params, splits.test.view(k)));
            std::size_t correct = 0;
            for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == splits.test.labels()[i];
            acc.push_back(static_cast<double>(correct) / static_cast<double>(pred.size()));
        }
        m["device_accuracy"] = acc;
        return m;
    }

    const vddib::VddibModel* coding = nullptr;
    data::MultiViewDataset test_features;
    if (c.family == Family::dvib_baseline) {
        coding = &run.dvib->coding();
        test_features = run.dvib->features(run.params, splits.test);
    } else {
        test_features = vib::extract_features(run.extractors, run.params, splits.test);
        if (run.vddib) coding = &*run.vddib;
    }

    AccuracySummary summary;
    if (c.family == Family::vddib_sr) {
        if (!c.sr.threshold && !c.sr.target_bits) {
            throw std::invalid_argument("vddib-sr evaluation needs a threshold or a target bit rate");
        }
        double threshold = 0.0;
        if (c.sr.threshold) {
            threshold = *c.sr.threshold;
        } else {
            const auto val = vib::extract_features(run.extractors, run.params, splits.validation);
            threshold = calibrate_threshold(*run.sr, run.params, val, *c.sr.target_bits);
            m["validation"] = to_json(evaluate_sr(*run.sr, run.params, val, threshold, c.channel));
        }
        summary = evaluate_sr(*run.sr, run.params, test_features, threshold, c.channel);
        m["threshold"] = threshold;
        m["beta"] = c.sr.training.beta;
        m["rounds"] = c.sr.architecture.rounds;
        m["delta_bits"] = nullptr;
        m["rate_bits"] = nullptr;
    } else {
        summary = evaluate_vddib(*coding, run.params, test_features, c.channel);
        const RateRelevancePoint rr = estimate_rate_relevance(*coding, run.params, test_features);
        m["beta"] = c.vddib.training.beta;
        m["delta_bits"] = rr.delta_bits;
        m["rate_bits"] = rr.rate_bits;
        m["rate_relevance"] = to_json(rr);
        m["code_entropy_within_budget"] = code_entropy_within_budget(rr, c.vddib.architecture.budgets);
        m["threshold"] = nullptr;
    }
    m.update(to_json(summary));
    m["budgets"] = json::array();
    for (const auto& b : budgets_of(c)) m["budgets"].push_back({{"bits", b.bits}, {"dims", b.dims}});
    return m;
}

namespace {

ExperimentRecord make_record(const ExperimentConfig& c, const std::string& run_id,
                             const std::function<json()>& work) {
    static std::uint64_t counter = 0;
    ExperimentRecord r;
    r.seed = c.seed;
    r.family = to_string(c.family);
    r.config = to_json(c);
    r.started_at = utc_now();
    r.metrics = json::object();
    r.config_hash = hex64(config_hash(c));
    if (run_id.empty()) {
        const auto stamp = std::chrono::duration_cast<std::chrono::microseconds>(
                               std::chrono::system_clock::now().time_since_epoch())
                               .count();
        r.run_id = r.config_hash.substr(0, 8) + "-" + std::to_string(stamp) + "-" + std::to_string(::getpid()) + "-" +
                   std::to_string(counter++);
    } else {
        r.run_id = run_id;
    }
    try {
        r.metrics = work();
    } catch (const std::exception& e) {
        r.metrics = json::object();
        r.error = e.what();
    }
    r.finished_at = utc_now();
    return r;
}

}  // namespace

ExperimentRecord ExperimentRunner::run(const ExperimentConfig& c, const std::string& run_id) {
    return make_record(c, run_id, [&] {
        const TrainedRun trained = train(c);
        return evaluate(c, trained);
    });
}

ExperimentRecord ExperimentRunner::evaluate_record(const ExperimentConfig& c, const TrainedRun& run,
                                                   const std::string& run_id) {
    return make_record(c, run_id, [&] { return evaluate(c, run); });
}

bool SweepGrid::empty() const noexcept {
    return betas.empty() && rounds.empty() && thresholds.empty() && budgets.empty() && seeds.empty();
}

json to_json(const SweepGrid& g) {
    json budgets = json::array();
    for (const auto& point : g.budgets) {
        json p = json::array();
        for (const auto& b : point) p.push_back({{"bits", b.bits}, {"dims", b.dims}});
        budgets.push_back(p);
    }
    return {{"beta", g.betas}, {"T", g.rounds}, {"delta0", g.thresholds}, {"budgets", budgets}, {"seeds", g.seeds}};
}

SweepGrid sweep_grid_from_json(const json& j) {
    SweepGrid g;
    g.betas = j.value("beta", g.betas);
    g.rounds = j.value("T", g.rounds);
    g.thresholds = j.value("delta0", g.thresholds);
    g.seeds = j.value("seeds", g.seeds);
    if (j.contains("budgets")) {
        for (const auto& point : j.at("budgets")) {
            std::vector<vddib::DeviceBudget> p;
            for (const auto& b : point) p.push_back({b.at("bits").get<unsigned>(), b.at("dims").get<std::size_t>()});
            g.budgets.push_back(std::move(p));
        }
    }
    return g;
}

std::vector<ExperimentConfig> expand_grid(const ExperimentConfig& base, const SweepGrid& grid) {
    if (grid.empty()) return {};
    std::vector<ExperimentConfig> points{base};
    auto axis = [&points](const auto& values, auto apply) {
        if (values.empty()) return;
        std::vector<ExperimentConfig> next;
        for (const auto& p : points) {
            for (const auto& v : values) {
                ExperimentConfig c = p;
                apply(c, v);
                next.push_back(std::move(c));
            }
        }
        points = std::move(next);
    };
    axis(grid.seeds, [](ExperimentConfig& c, std::uint64_t s) { c.seed = s; });
    axis(grid.budgets, [](ExperimentConfig& c, const std::vector<vddib::DeviceBudget>& b) {
        c.vddib.architecture.budgets = b;
        c.sr.architecture.chunks = b;
    });
    axis(grid.betas, [](ExperimentConfig& c, double b) {
        c.vddib.training.beta = b;
        c.sr.training.beta = b;
    });
    axis(grid.rounds, [](ExperimentConfig& c, std::size_t t) { c.sr.architecture.rounds = t; });
    axis(grid.thresholds, [](ExperimentConfig& c, double d) {
        c.sr.threshold = d;
        c.sr.target_bits.reset();
    });
    return points;
}

std::vector<ExperimentRecord> sweep(ExperimentRunner& runner, const ExperimentConfig& base, const SweepGrid& grid,
                                    const RecordStore* store) {
    std::vector<ExperimentRecord> out;
    for (const auto& c : expand_grid(base, grid)) {
        out.push_back(runner.run(c));
        if (store) store->append(out.back());
    }
    if (store) {
        const auto all = store->load();
        write_rate_relevance_csv(store->path().parent_path() / "rate_relevance.csv", all);
    }
    return out;
}

AblationResult ablate_dvib(ExperimentRunner& runner, const ExperimentConfig& base,
                           std::span<const std::vector<vddib::DeviceBudget>> budgets, const RecordStore* store) {
    AblationResult out;
    for (const auto& b : budgets) {
        ExperimentConfig proposed = base;
        proposed.family = Family::vddib;
        proposed.vddib.architecture.budgets = b;
        proposed.sr.threshold.reset();
        proposed.sr.target_bits.reset();
        ExperimentConfig baseline = proposed;
        baseline.family = Family::dvib_baseline;
        out.proposed.push_back(runner.run(proposed));
        out.baseline.push_back(runner.run(baseline));
        if (store) {
            store->append(out.proposed.back());
            store->append(out.baseline.back());
        }
    }
    if (store) {
        const auto all = store->load();
        write_rate_relevance_csv(store->path().parent_path() / "rate_relevance.csv", all);
    }
    return out;
}

}  // namespace tocomm::eval
