// Experiment command line: data ingestion, staged training with checkpoints,
// evaluation, sweeps and the D-VIB ablation.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "tocomm/eval/experiment.hpp"
#include "tocomm/nn/archive.hpp"

using namespace tocomm;
using nlohmann::json;

namespace {

struct Globals {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::string data_dir;
};

json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    return json::parse(in);
}

// The config file is one ExperimentConfig document; an optional top-level
// "grid" object drives sweep and ablate-dvib.
struct LoadedConfig {
    eval::ExperimentConfig experiment;
    json grid = json::object();
};

LoadedConfig load_config(const Globals& g) {
    json doc = g.config_path.empty() ? json::object() : read_json(g.config_path);
    LoadedConfig out;
    if (doc.contains("grid")) {
        out.grid = doc.at("grid");
        doc.erase("grid");
    }
    if (!g.data_dir.empty()) doc["dataset"]["data_dir"] = g.data_dir;
    if (g.seed) doc["seed"] = *g.seed;
    if (!g.out.empty()) doc["output_dir"] = g.out;
    out.experiment = eval::experiment_from_json(doc);
    return out;
}

void require_out(const Globals& g, const char* what) {
    if (g.out.empty()) throw std::invalid_argument(std::string(what) + " needs --out");
}

nn::ParamStore merge_checkpoints(const std::vector<std::string>& paths) {
    nn::ParamStore params;
    for (const auto& p : paths) params.import_prefix(nn::load_archive(p).params, "", "");
    return params;
}

json stage_metadata(const eval::ExperimentConfig& c, const std::string& stage,
                    const std::vector<nn::StepRecord>& trace) {
    return {{"stage", stage},
            {"config", eval::to_json(c)},
            {"config_hash", eval::hex64(eval::config_hash(c))},
            {"steps", trace.size()},
            {"final_loss", trace.empty() ? json(nullptr) : json(trace.back().loss)}};
}

// Stage functions own the seeds, so progress is replayed from the trace.
void print_progress(const std::string& stage, const nn::StepRecord& r, std::size_t every) {
    if (every != 0 && r.step % every == 0) {
        std::fprintf(stderr, "%s step %zu loss %.6f task %.6f side %.6f\n", stage.c_str(),
                     static_cast<std::size_t>(r.step), r.loss, r.task, r.side);
    }
}

int cmd_ingest(const Globals& g) {
    const auto cfg = load_config(g).experiment;
    eval::ExperimentRunner runner;
    const auto& s = runner.dataset(cfg.dataset);
    json summary{{"source", data::to_string(cfg.dataset.source)}};
    for (const auto& [name, ds] : {std::pair{"train", &s.train}, {"validation", &s.validation}, {"test", &s.test}}) {
        json views = json::array();
        for (std::size_t k = 0; k < ds->devices(); ++k) views.push_back(ds->view_dim(k));
        summary[name] = {{"examples", ds->size()}, {"view_dims", views}, {"content_hash", eval::hex64(ds->content_hash())}};
    }
    std::cout << summary.dump(2) << "\n";
    if (!g.out.empty()) {
        std::filesystem::create_directories(g.out);
        std::ofstream(std::filesystem::path(g.out) / "dataset.json") << summary.dump(2) << "\n";
    }
    return 0;
}

int cmd_train_vib(const Globals& g, std::size_t device, std::size_t log_every) {
    require_out(g, "train-vib");
    auto cfg = load_config(g).experiment;
    cfg.family = eval::Family::vib;
    cfg.validate();
    eval::ExperimentRunner runner;
    const auto& splits = runner.dataset(cfg.dataset);
    eval::TrainedRun run;
    run.extractors = eval::make_extractors(cfg);
    eval::train_extractor_stage(cfg, splits, device, run);
    for (const auto& r : run.trace) print_progress("vib", r, log_every);
    nn::save_archive(g.out, run.params, stage_metadata(cfg, "vib/k" + std::to_string(device), run.trace));
    std::fprintf(stderr, "saved %s\n", g.out.c_str());
    return 0;
}

int cmd_train_coding(const Globals& g, eval::Family family, const std::vector<std::string>& vib_ckpts,
                     std::size_t log_every) {
    require_out(g, "training");
    auto cfg = load_config(g).experiment;
    cfg.family = family;
    cfg.validate();
    eval::ExperimentRunner runner;
    const auto& splits = runner.dataset(cfg.dataset);
    eval::TrainedRun run;
    run.extractors = eval::make_extractors(cfg);
    run.params = merge_checkpoints(vib_ckpts);
    const std::string stage = eval::to_string(family);
    eval::train_coding_stage(cfg, splits, run);
    for (const auto& r : run.trace) print_progress(stage, r, log_every);
    nn::save_archive(g.out, run.params, stage_metadata(cfg, stage, run.trace));
    std::fprintf(stderr, "saved %s\n", g.out.c_str());
    return 0;
}

int cmd_eval(const Globals& g, const std::vector<std::string>& ckpts, std::optional<double> threshold) {
    auto cfg = load_config(g).experiment;
    if (threshold) {
        cfg.sr.threshold = *threshold;
        cfg.sr.target_bits.reset();
    }
    eval::ExperimentRunner runner;
    const auto run = eval::restore_run(cfg, merge_checkpoints(ckpts));
    const auto record = runner.evaluate_record(cfg, run);
    std::cout << eval::to_json(record).dump(2) << "\n";
    if (!g.out.empty()) {
        const eval::RecordStore store(g.out);
        store.append(record);
        const auto all = store.load();
        eval::write_rate_relevance_csv(std::filesystem::path(g.out) / "rate_relevance.csv", all);
    }
    return record.ok() ? 0 : 1;
}

int print_records(const std::vector<eval::ExperimentRecord>& records) {
    bool ok = true;
    for (const auto& r : records) {
        json line{{"run_id", r.run_id}, {"family", r.family}, {"error", r.error}};
        for (const char* key : {"accuracy", "avg_bits", "avg_rounds", "delta_bits", "rate_bits", "beta", "threshold"}) {
            if (r.metrics.contains(key)) line[key] = r.metrics.at(key);
        }
        std::cout << line.dump() << "\n";
        ok = ok && r.ok();
    }
    return ok ? 0 : 1;
}

int cmd_sweep(const Globals& g, const std::string& grid_path) {
    require_out(g, "sweep");
    const auto loaded = load_config(g);
    const json grid_json = grid_path.empty() ? loaded.grid : read_json(grid_path);
    const auto grid = eval::sweep_grid_from_json(grid_json);
    eval::ExperimentRunner runner;
    const eval::RecordStore store(g.out);
    return print_records(eval::sweep(runner, loaded.experiment, grid, &store));
}

int cmd_ablate(const Globals& g, const std::string& grid_path) {
    require_out(g, "ablate-dvib");
    const auto loaded = load_config(g);
    const json grid_json = grid_path.empty() ? loaded.grid : read_json(grid_path);
    auto budgets = eval::sweep_grid_from_json(grid_json).budgets;
    if (budgets.empty()) budgets.push_back(loaded.experiment.vddib.architecture.budgets);
    eval::ExperimentRunner runner;
    const eval::RecordStore store(g.out);
    const auto result = eval::ablate_dvib(runner, loaded.experiment, budgets, &store);
    std::vector<eval::ExperimentRecord> all = result.proposed;
    all.insert(all.end(), result.baseline.begin(), result.baseline.end());
    return print_records(all);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Task-oriented multi-device edge inference experiments"};
    app.require_subcommand(1);
    app.fallthrough();  // global flags may follow the subcommand
    Globals g;
    app.add_option("--config", g.config_path, "Experiment config (JSON)")->check(CLI::ExistingFile);
    app.add_option("--seed", g.seed, "Override the config seed");
    app.add_option("--out", g.out, "Output checkpoint file or directory");
    app.add_option("--data-dir", g.data_dir, "Directory holding the MNIST IDX files");

    std::size_t device = 0, log_every = 1000;
    std::vector<std::string> vib_ckpts, ckpts;
    std::string grid_path;
    std::optional<double> threshold;

    auto* ingest = app.add_subcommand("ingest", "Load the configured dataset and print a summary");
    auto* train_vib = app.add_subcommand("train-vib", "Train one device's feature extractor");
    train_vib->add_option("--device-index", device, "Device index")->required();
    train_vib->add_option("--log-every", log_every, "Progress interval in steps (0 = silent)");
    auto* train_vddib = app.add_subcommand("train-vddib", "Train distributed coding on frozen extractors");
    auto* train_sr = app.add_subcommand("train-vddib-sr", "Train selective retransmission on frozen extractors");
    for (auto* sub : {train_vddib, train_sr}) {
        sub->add_option("--vib-ckpt", vib_ckpts, "Extractor checkpoints, one per device")->required()->check(CLI::ExistingFile);
        sub->add_option("--log-every", log_every, "Progress interval in steps (0 = silent)");
    }
    auto* evaluate = app.add_subcommand("eval", "Evaluate checkpoints and append a record");
    evaluate->add_option("--ckpt", ckpts, "Checkpoints holding every parameter of the model")->required()->check(CLI::ExistingFile);
    evaluate->add_option("--threshold", threshold, "Stopping threshold for vddib-sr");
    auto* sweep = app.add_subcommand("sweep", "Train and evaluate every grid point");
    auto* ablate = app.add_subcommand("ablate-dvib", "Paired extraction-first vs D-VIB runs per budget");
    for (auto* sub : {sweep, ablate}) sub->add_option("--grid", grid_path, "Grid JSON (defaults to the config's grid)");

    CLI11_PARSE(app, argc, argv);
    try {
        if (*ingest) return cmd_ingest(g);
        if (*train_vib) return cmd_train_vib(g, device, log_every);
        if (*train_vddib) return cmd_train_coding(g, eval::Family::vddib, vib_ckpts, log_every);
        if (*train_sr) return cmd_train_coding(g, eval::Family::vddib_sr, vib_ckpts, log_every);
        if (*evaluate) return cmd_eval(g, ckpts, threshold);
        if (*sweep) return cmd_sweep(g, grid_path);
        if (*ablate) return cmd_ablate(g, grid_path);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
