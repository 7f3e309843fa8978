#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include "doctest.h"
#include "tocomm/data/synthetic.hpp"
#include "tocomm/eval/experiment.hpp"
#include "tocomm/eval/metrics.hpp"

using namespace tocomm;

namespace {

struct TempDir {
    std::filesystem::path path;
    explicit TempDir(const std::string& tag) {
        path = std::filesystem::temp_directory_path() / ("tocomm_eval_" + tag + "_" + std::to_string(::getpid()));
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
};

data::DiscreteTask toy_task(std::uint64_t seed) {
    nn::Rng rng(seed);
    const std::vector<std::size_t> alphabets{4, 4};
    return data::random_discrete_task(4, alphabets, rng, 3.0);
}

// Synthetic two-device splits with one-hot views of width 4.
data::DataSplits toy_splits(const data::DiscreteTask& task, std::size_t n_train, std::size_t n_test) {
    nn::Rng rng(77);
    data::DataSplits s;
    s.train = data::synth_discrete(task, n_train, rng).one_hot;
    s.validation = data::synth_discrete(task, n_test, rng).one_hot;
    s.test = data::synth_discrete(task, n_test, rng).one_hot;
    return s;
}

eval::ExperimentConfig toy_config() {
    eval::ExperimentConfig c;
    c.dataset.source = data::DataSource::synthetic_discrete;
    c.dataset.devices = 2;
    c.vib.architecture = vib::VibArchitecture{4, {8}, 3, {6}, 4};
    c.vib.training.steps = 200;
    c.vib.training.batch_size = 32;
    c.vddib.architecture.feature_dims = {3, 3};
    c.vddib.architecture.budgets = {{1, 2}, {1, 2}};
    c.vddib.architecture.encoder_hidden = {8};
    c.vddib.architecture.joint_hidden = {8};
    c.vddib.architecture.aux_hidden = {6};
    c.vddib.architecture.num_classes = 4;
    c.vddib.training.steps = 200;
    c.vddib.training.batch_size = 32;
    c.sr.architecture.feature_dims = {3, 3};
    c.sr.architecture.chunks = {{1, 1}, {1, 1}};
    c.sr.architecture.encoder_hidden = {8};
    c.sr.architecture.predictor_hidden = {8};
    c.sr.architecture.aux_hidden = {6};
    c.sr.architecture.gate_hidden = {4};
    c.sr.architecture.num_classes = 4;
    c.sr.training.steps = 200;
    c.sr.training.batch_size = 32;
    c.seed = 3;
    return c;
}

}  // namespace

TEST_CASE("summarize") {
    const std::vector<std::uint32_t> labels{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
    const std::vector<std::uint64_t> bits{10, 10, 10, 10, 10, 20, 20, 20, 20, 20};
    const std::vector<std::size_t> rounds{1, 1, 1, 1, 1, 2, 2, 2, 2, 2};

    const auto perfect = eval::summarize(labels, labels, bits, rounds);
    CHECK(perfect.examples == 10);
    CHECK(perfect.accuracy == 1.0);
    CHECK(perfect.avg_bits == 15.0);
    CHECK(perfect.avg_rounds == 1.5);

    const std::vector<std::uint32_t> constant(10, 3);
    CHECK(eval::summarize(constant, labels, bits, rounds).accuracy == doctest::Approx(0.1));

    CHECK_THROWS_AS(eval::summarize({}, {}, {}, {}), std::invalid_argument);
    CHECK_THROWS_AS(eval::summarize(std::span(constant).first(9), labels, bits, rounds), std::invalid_argument);
}

TEST_CASE("empirical entropies") {
    const std::vector<std::vector<std::uint32_t>> codes{{0, 1}, {0, 1}, {1, 0}, {1, 1}};
    CHECK(eval::empirical_code_entropy(codes) == doctest::Approx(1.5));
    const std::vector<std::vector<std::uint32_t>> uniform{{0}, {1}, {2}, {3}};
    CHECK(eval::empirical_code_entropy(uniform) == doctest::Approx(2.0));
    const std::vector<std::vector<std::uint32_t>> same(5, {2, 2});
    CHECK(eval::empirical_code_entropy(same) == 0.0);
    CHECK_FALSE(std::signbit(eval::empirical_code_entropy(same)));

    const std::vector<std::uint32_t> labels{0, 1, 2, 3, 4, 5, 6, 7};
    CHECK(eval::empirical_label_entropy(labels) == doctest::Approx(3.0));
    CHECK_THROWS_AS(eval::empirical_label_entropy({}), std::invalid_argument);
}

TEST_CASE("rate-relevance composition") {
    const double hy = std::log2(10.0);
    SUBCASE("a perfect joint predictor recovers the label entropy") {
        const std::vector<double> aux{0.0, 0.0}, h{2.0, 3.0};
        const auto p = eval::compose_rate_relevance(hy, 0.0, aux, h);
        CHECK(p.delta_bits == doctest::Approx(hy));
        CHECK(p.rate_bits == doctest::Approx(hy + (2.0 - hy) + (3.0 - hy)));
    }
    SUBCASE("one device with a constant encoder and a chance-level helper") {
        const std::vector<double> aux{std::log(10.0)}, h{0.0};
        const auto p = eval::compose_rate_relevance(hy, std::log(10.0), aux, h);
        CHECK(p.delta_bits == doctest::Approx(0.0));
        CHECK(p.rate_bits == doctest::Approx(p.delta_bits));
        CHECK(p.aux_information_bits[0] == doctest::Approx(0.0));
    }
    SUBCASE("estimates below zero are clamped") {
        const std::vector<double> aux{5.0}, h{0.5};
        const auto p = eval::compose_rate_relevance(1.0, 5.0, aux, h);
        CHECK(p.delta_bits == 0.0);
        CHECK(p.aux_information_bits[0] == 0.0);
        CHECK(p.rate_bits == doctest::Approx(0.5));
    }
    SUBCASE("mismatched device lists") {
        const std::vector<double> aux{1.0}, h{1.0, 1.0};
        CHECK_THROWS_AS(eval::compose_rate_relevance(1.0, 1.0, aux, h), std::invalid_argument);
    }
    SUBCASE("budget audit") {
        const std::vector<double> aux{0.0, 0.0}, h{2.0, 3.0};
        const auto p = eval::compose_rate_relevance(hy, 0.0, aux, h);
        const std::vector<vddib::DeviceBudget> ok{{1, 2}, {1, 3}}, tight{{1, 2}, {1, 2}};
        CHECK(eval::code_entropy_within_budget(p, ok));
        CHECK_FALSE(eval::code_entropy_within_budget(p, tight));
    }
}

TEST_CASE("relevance estimate tracks the exact information of the learned code") {
    const auto task = toy_task(21);
    nn::Rng rng(5);
    const auto train = data::synth_discrete(task, 20000, rng).one_hot;
    const auto test = data::synth_discrete(task, 40000, rng).one_hot;

    vddib::VddibArchitecture a;
    a.feature_dims = {4, 4};
    a.budgets = {{1, 3}, {1, 3}};
    a.encoder_hidden = {16};
    a.joint_hidden = {32};
    a.aux_hidden = {16};
    a.num_classes = 4;
    const vddib::VddibModel m(a);
    vddib::VddibConfig cfg;
    cfg.beta = 1e-3;
    cfg.steps = 3000;
    cfg.batch_size = 100;
    cfg.seed = 4;
    nn::ParamStore p;
    vddib::train_vddib(train, m, p, cfg);

    // Code of every symbol, so I(Y; U_1, U_2) is available exactly.
    std::vector<std::vector<std::uint64_t>> symbol_code(2);
    for (std::size_t k = 0; k < 2; ++k) {
        nn::Tensor eye = nn::Tensor::matrix(4, 4);
        for (std::size_t x = 0; x < 4; ++x) eye.at(x, x) = 1.0;
        const auto idx = m.encoder(k).code_indices(p, eye);
        for (std::size_t x = 0; x < 4; ++x) symbol_code[k].push_back(idx[3 * x] * 4 + idx[3 * x + 1] * 2 + idx[3 * x + 2]);
    }
    const double exact_bits = data::exact_label_information(task, [&](std::span<const std::uint32_t> xs) {
                                  return symbol_code[0][xs[0]] * 8 + symbol_code[1][xs[1]];
                              }) /
                              std::numbers::ln2;

    const auto point = eval::estimate_rate_relevance(m, p, test);
    INFO("exact " << exact_bits << " estimate " << point.delta_bits);
    CHECK(std::abs(point.delta_bits - exact_bits) < 0.05);
    CHECK(eval::code_entropy_within_budget(point, a.budgets));
    CHECK(point.rate_bits >= 0.0);
}

TEST_CASE("stopping threshold calibration") {
    const auto task = toy_task(8);
    nn::Rng rng(9);
    const auto ds = data::synth_discrete(task, 2000, rng).one_hot;
    sr::SrArchitecture a;
    a.feature_dims = {4, 4};
    a.chunks = {{1, 2}, {1, 2}};
    a.rounds = 3;
    a.encoder_hidden = {8};
    a.predictor_hidden = {8};
    a.aux_hidden = {4};
    a.gate_hidden = {4};
    a.num_classes = 4;
    const sr::SrModel m(a);
    nn::ParamStore p;
    nn::Rng init(12);
    m.init(p, init);

    auto avg_bits = [&](double th) { return eval::evaluate_sr(m, p, ds, th).avg_bits; };
    for (double target : {4.5, 6.0, 8.7, 11.0}) {
        const double th = eval::calibrate_threshold(m, p, ds, target);
        CHECK(th >= 0.0);
        CHECK(th <= 1.0);
        const double gap = std::abs(avg_bits(th) - target);
        for (int i = 0; i <= 200; ++i) CHECK(gap <= std::abs(avg_bits(i / 200.0) - target) + 1e-12);
    }
}

TEST_CASE("experiment config") {
    const auto c = toy_config();
    SUBCASE("json round trip keeps the hash") {
        const auto back = eval::experiment_from_json(eval::to_json(c));
        CHECK(eval::config_hash(back) == eval::config_hash(c));
        CHECK(eval::to_json(back) == eval::to_json(c));
    }
    SUBCASE("hash ignores key order and the output directory") {
        const std::string dump = eval::to_json(c).dump();
        auto j = nlohmann::ordered_json::parse(dump);
        nlohmann::ordered_json reversed;
        std::vector<std::string> keys;
        for (auto& [k, v] : j.items()) keys.push_back(k);
        for (auto it = keys.rbegin(); it != keys.rend(); ++it) reversed[*it] = j[*it];
        auto moved = eval::experiment_from_json(nlohmann::json::parse(reversed.dump()));
        moved.output_dir = "/elsewhere";
        CHECK(eval::config_hash(moved) == eval::config_hash(c));
        auto other = c;
        other.vddib.training.beta = 0.5;
        CHECK(eval::config_hash(other) != eval::config_hash(c));
    }
    SUBCASE("invalid configurations") {
        auto bad = c;
        bad.vddib.architecture.feature_dims = {3, 5};
        CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
        bad = c;
        bad.sr.threshold = 0.5;
        CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
        CHECK_THROWS_AS(eval::parse_family("gnn"), std::invalid_argument);
        CHECK_THROWS_AS(eval::experiment_from_json(nlohmann::json::array()), std::invalid_argument);
    }
    SUBCASE("family names") {
        for (auto f : {eval::Family::vib, eval::Family::vddib, eval::Family::vddib_sr, eval::Family::dvib_baseline}) {
            CHECK(eval::parse_family(eval::to_string(f)) == f);
        }
    }
    SUBCASE("derived seeds differ per stage and index") {
        CHECK(eval::derive_seed(1, "vib", 0) != eval::derive_seed(1, "vib", 1));
        CHECK(eval::derive_seed(1, "vib", 0) != eval::derive_seed(1, "vddib", 0));
        CHECK(eval::derive_seed(1, "vib", 0) != eval::derive_seed(2, "vib", 0));
        CHECK(eval::derive_seed(1, "vib", 0) == eval::derive_seed(1, "vib", 0));
    }
}

TEST_CASE("sweep grid") {
    const auto base = toy_config();
    SUBCASE("an empty grid has no points") { CHECK(eval::expand_grid(base, {}).empty()); }
    SUBCASE("cartesian product over non-empty axes") {
        eval::SweepGrid g;
        g.betas = {0.001, 0.01, 0.1};
        g.seeds = {1, 2};
        const auto points = eval::expand_grid(base, g);
        REQUIRE(points.size() == 6);
        CHECK(points[0].seed == 1);
        CHECK(points[0].vddib.training.beta == 0.001);
        CHECK(points[5].seed == 2);
        CHECK(points[5].vddib.training.beta == 0.1);
    }
    SUBCASE("json round trip") {
        eval::SweepGrid g;
        g.betas = {0.1};
        g.rounds = {1, 2};
        g.thresholds = {0.9};
        g.budgets = {{{1, 2}, {2, 1}}};
        g.seeds = {4};
        const auto back = eval::sweep_grid_from_json(eval::to_json(g));
        CHECK(back.betas == g.betas);
        CHECK(back.rounds == g.rounds);
        CHECK(back.thresholds == g.thresholds);
        CHECK(back.budgets == g.budgets);
        CHECK(back.seeds == g.seeds);
    }
}

TEST_CASE("experiment runner") {
    const auto task = toy_task(31);
    auto base = toy_config();
    eval::ExperimentRunner runner;
    runner.register_dataset(base.dataset, toy_splits(task, 1000, 400));
    TempDir dir("runner");
    const eval::RecordStore store(dir.path);

    SUBCASE("beta sweep writes records and a csv") {
        eval::SweepGrid g;
        g.betas = {0.001, 0.01, 0.1};
        const auto records = eval::sweep(runner, base, g, &store);
        REQUIRE(records.size() == 3);
        for (const auto& r : records) {
            INFO(r.error);
            CHECK(r.ok());
            CHECK(r.metrics.at("accuracy").get<double>() > 0.25);
            CHECK(r.metrics.at("avg_bits").get<double>() == 4.0);
            CHECK(r.metrics.at("code_entropy_within_budget").get<bool>());
        }
        const auto loaded = store.load();
        REQUIRE(loaded.size() == 3);
        CHECK(eval::to_json(loaded[1]) == eval::to_json(records[1]));
        std::ifstream csv(dir.path / "rate_relevance.csv");
        std::string line;
        std::size_t lines = 0;
        while (std::getline(csv, line)) ++lines;
        CHECK(lines == 4);
    }
    SUBCASE("duplicate points get distinct ids and the same hash") {
        const auto a = runner.run(base);
        const auto b = runner.run(base);
        CHECK(a.run_id != b.run_id);
        CHECK(a.config_hash == b.config_hash);
        CHECK(a.metrics.at("trace_hash") == b.metrics.at("trace_hash"));
        CHECK(a.metrics.at("accuracy") == b.metrics.at("accuracy"));
    }
    SUBCASE("failures are recorded instead of thrown") {
        auto bad = base;
        bad.vddib.architecture.budgets = {{1, 2}};
        const auto r = runner.run(bad);
        CHECK_FALSE(r.ok());
        CHECK(r.metrics.empty());
        store.append(r);
        CHECK_FALSE(store.load().at(0).ok());
    }
    SUBCASE("sr family with a calibrated threshold") {
        auto c = base;
        c.family = eval::Family::vddib_sr;
        c.sr.target_bits = 3.0;
        const auto r = runner.run(c);
        INFO(r.error);
        REQUIRE(r.ok());
        CHECK(r.metrics.at("threshold").get<double>() >= 0.0);
        CHECK(r.metrics.at("avg_rounds").get<double>() >= 1.0);
        CHECK(r.metrics.at("avg_bits").get<double>() >= 2.0);
        CHECK(r.metrics.at("avg_bits").get<double>() <= 4.0);
    }
    SUBCASE("sr evaluation without a stopping rule is a recorded failure") {
        auto c = base;
        c.family = eval::Family::vddib_sr;
        CHECK_NOTHROW(c.validate());
        const auto r = runner.run(c);
        CHECK_FALSE(r.ok());
        CHECK(r.error.find("threshold") != std::string::npos);
    }
    SUBCASE("evaluation of a restored run matches the trained run") {
        const auto trained = runner.train(base);
        nn::ParamStore copy;
        copy.import_prefix(trained.params, "", "");
        const auto restored = eval::restore_run(base, std::move(copy));
        const auto a = runner.evaluate_record(base, trained);
        const auto b = runner.evaluate_record(base, restored);
        REQUIRE(a.ok());
        CHECK(a.metrics.at("accuracy") == b.metrics.at("accuracy"));
        CHECK(a.metrics.at("rate_relevance") == b.metrics.at("rate_relevance"));
        CHECK_THROWS_AS(eval::restore_run(base, nn::ParamStore{}), std::invalid_argument);
    }
    SUBCASE("vib family reports per-device accuracy") {
        auto c = base;
        c.family = eval::Family::vib;
        const auto r = runner.run(c);
        REQUIRE(r.ok());
        CHECK(r.metrics.at("device_accuracy").size() == 2);
    }
    SUBCASE("paired ablation") {
        const std::vector<std::vector<vddib::DeviceBudget>> budgets{{{1, 1}, {1, 1}}, {{1, 3}, {1, 3}}};
        const auto ab = eval::ablate_dvib(runner, base, budgets, &store);
        REQUIRE(ab.proposed.size() == 2);
        REQUIRE(ab.baseline.size() == 2);
        for (std::size_t i = 0; i < 2; ++i) {
            INFO(ab.baseline[i].error);
            CHECK(ab.proposed[i].ok());
            CHECK(ab.baseline[i].ok());
            CHECK(ab.proposed[i].metrics.at("avg_bits") == ab.baseline[i].metrics.at("avg_bits"));
            CHECK(ab.baseline[i].family == "dvib-baseline");
        }
        CHECK(store.load().size() == 4);
    }
}

TEST_CASE("d-vib baseline") {
    const auto task = toy_task(41);
    nn::Rng rng(2);
    const auto ds = data::synth_discrete(task, 600, rng).one_hot;
    vddib::VddibArchitecture coding;
    coding.feature_dims = {3, 3};
    coding.budgets = {{1, 2}, {1, 2}};
    coding.encoder_hidden = {8};
    coding.joint_hidden = {8};
    coding.aux_hidden = {4};
    coding.num_classes = 4;
    const eval::DvibModel m(vib::VibArchitecture{4, {8}, 5, {6}, 4}, coding);
    CHECK(m.trunk(0).architecture().feature_dim == 3);

    SUBCASE("zero steps predicts near chance") {
        eval::DvibConfig cfg;
        cfg.steps = 0;
        nn::ParamStore p;
        eval::train_dvib(ds, m, p, cfg);
        const auto s = eval::evaluate_vddib(m.coding(), p, m.features(p, ds));
        CHECK(s.accuracy < 0.7);
        CHECK(s.avg_bits == 4.0);
    }
    SUBCASE("training lowers the loss and is deterministic") {
        eval::DvibConfig cfg;
        cfg.steps = 300;
        cfg.batch_size = 32;
        cfg.seed = 6;
        nn::ParamStore a, b;
        const auto ra = eval::train_dvib(ds, m, a, cfg);
        const auto rb = eval::train_dvib(ds, m, b, cfg);
        CHECK(ra.trace == rb.trace);
        CHECK(a.values_equal(b));
        double head = 0.0, tail = 0.0;
        for (std::size_t i = 0; i < 30; ++i) head += ra.trace[i].task, tail += ra.trace[ra.trace.size() - 1 - i].task;
        CHECK(tail < head);
        CHECK(a.contains(m.trunk(0).trunk().weight_name(0)));
        CHECK(m.trunk(0).trunk().weight_name(0).starts_with("dvib/k0/"));
        CHECK_FALSE(a.contains(vib::VibModel(vib::VibModel::device_prefix(0), m.trunk(0).architecture()).trunk().weight_name(0)));
    }
    SUBCASE("device mismatch") {
        const auto one = ds.with_views({ds.view(0)});
        nn::ParamStore p;
        CHECK_THROWS_AS(eval::train_dvib(one, m, p, {}), std::invalid_argument);
    }
}
