// Command-line front end: synthetic benchmark generation, architecture
// search, filter training, protocol evaluation, model inspection, and
// feature extraction.

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "spoofbench/pipeline.hpp"
#include "spoofbench/synth.hpp"

namespace {

using namespace spoofbench;

unsigned resolve_workers(int flag_value) {
    if (flag_value > 0) return static_cast<unsigned>(flag_value);
    if (const char* env = std::getenv("SPOOFBENCH_WORKERS")) {
        const int v = std::atoi(env);
        if (v > 0) return static_cast<unsigned>(v);
    }
    return default_workers();
}

nlohmann::ordered_json report_to_json(const EvalReport& r, std::uint64_t seed,
                                      const std::string& model_path,
                                      const std::string& manifest_path) {
    nlohmann::ordered_json j;
    j["format_version"] = kModelFormatVersion;
    j["seed"] = seed;
    j["model"] = model_path;
    j["manifest"] = manifest_path;
    j["threshold_rule"] = r.threshold_rule;
    j["tau"] = r.tau;
    j["acc_percent"] = r.acc_percent;
    j["hter_percent"] = r.hter_percent;
    j["far_percent"] = r.far_percent;
    j["frr_percent"] = r.frr_percent;
    j["counts"] = {{"real", r.n_real},
                   {"fake", r.n_fake},
                   {"false_accepts", r.false_accepts},
                   {"false_rejects", r.false_rejects}};
    return j;
}

// Renders one band (or an RGB triple) normalized to [0,255] independently.
void save_normalized(const MultibandImage& img, const std::string& path) {
    double mn = img.data.empty() ? 0.0 : img.data[0];
    double mx = mn;
    for (double v : img.data) {
        mn = std::min(mn, v);
        mx = std::max(mx, v);
    }
    const double span = mx - mn > 1e-12 ? mx - mn : 1.0;
    MultibandImage out = img;
    for (double& v : out.data) v = (v - mn) / span;
    save_pnm(out, path);
}

int cmd_synth(const SynthParams& params, const std::string& out_dir) {
    generate_synthetic_benchmark(params, out_dir);
    std::cerr << "wrote synthetic benchmark to " << out_dir << "\n";
    return 0;
}

int cmd_search(const std::string& manifest_path, std::size_t budget, std::uint64_t seed,
               const std::string& out_path, const std::string& trace_path, int workers_flag) {
    const BenchmarkManifest manifest = load_manifest(manifest_path);
    const unsigned workers = resolve_workers(workers_flag);
    AoSearchResult res = run_ao_search(manifest, budget, seed, workers, trace_path);
    save_model(res.model, out_path);
    std::cerr << "best objective " << res.outcome.best.objective << " after "
              << res.outcome.attempts << " attempts (" << res.outcome.trace.size()
              << " valid candidates); model saved to " << out_path << "\n";
    return 0;
}

int cmd_train_net(const std::string& manifest_path, int input_size,
                  const std::string& schedule_name, int epochs_div, double lr_mult,
                  std::uint64_t seed, const std::string& out_path, const std::string& log_path,
                  int workers_flag) {
    const BenchmarkManifest manifest = load_manifest(manifest_path);
    TrainingSchedule schedule =
        schedule_name == "cf10" ? TrainingSchedule::cf10() : TrainingSchedule::spoofnet();
    if (epochs_div > 1 || lr_mult != 1.0) schedule = schedule.scaled(epochs_div, lr_mult);
    const unsigned workers = resolve_workers(workers_flag);
    FoTrainResult res = run_fo_training(manifest, input_size, schedule, seed, workers, log_path);
    save_model(res.model, out_path);
    std::cerr << "final train loss " << res.log.back().train_loss << "; model saved to "
              << out_path << "\n";
    return 0;
}

int cmd_eval(const std::string& model_path, const std::string& manifest_path,
             const std::string& rule_name, const std::string& report_path, int workers_flag) {
    const ModelContainer model = load_model(model_path);
    const BenchmarkManifest manifest = load_manifest(manifest_path);
    const ThresholdRule rule = threshold_rule_from_string(rule_name);
    const EvalOutcome outcome = run_eval(model, manifest, rule, resolve_workers(workers_flag));
    const nlohmann::ordered_json j =
        report_to_json(outcome.report, model.seed, model_path, manifest_path);
    if (report_path.empty()) {
        std::cout << j.dump(1) << "\n";
    } else {
        std::ofstream out(report_path);
        if (!out) throw IoError("cannot write report: " + report_path);
        out << j.dump(1) << "\n";
    }
    std::cerr << "ACC " << outcome.report.acc_percent << "% HTER " << outcome.report.hter_percent
              << "% at tau " << outcome.report.tau << " (" << outcome.report.threshold_rule
              << ")\n";
    return 0;
}

int cmd_extract(const std::string& model_path, const std::string& manifest_path,
                const std::string& split, const std::string& out_path, int workers_flag) {
    const ModelContainer model = load_model(model_path);
    if (model.kind != ModelContainer::Kind::AoRandomFilter)
        throw std::invalid_argument("extract requires an AO model");
    const BenchmarkManifest manifest = load_manifest(manifest_path);
    const LabeledImages data = load_split_images(manifest, split);
    std::vector<FeatureVector> feats(data.records.size());
    parallel_for(data.records.size(), resolve_workers(workers_flag), [&](std::size_t i) {
        feats[i] = forward(prepare_input(data.images[i], model.spec), model.spec.layers,
                           model.filters);
    });
    std::ofstream out(out_path);
    if (!out) throw IoError("cannot write features: " + out_path);
    out.precision(17);
    for (std::size_t i = 0; i < data.records.size(); ++i) {
        out << data.records[i].path << "," << (data.records[i].is_fake ? "fake" : "real");
        for (double v : feats[i].values) out << "," << v;
        out << "\n";
    }
    std::cerr << "wrote " << data.records.size() << " feature rows (" << feats[0].values.size()
              << " dims) to " << out_path << "\n";
    return 0;
}

// Dumps first-layer filters, per-class mean inputs, and per-class mean
// first-layer activation maps, each normalized to [0,255] independently.
int cmd_inspect(const std::string& model_path, const std::string& manifest_path,
                const std::string& out_dir, int workers_flag) {
    const ModelContainer model = load_model(model_path);
    const BenchmarkManifest manifest = load_manifest(manifest_path);
    std::filesystem::create_directories(out_dir);

    const FilterBank* bank = nullptr;
    if (model.kind == ModelContainer::Kind::AoRandomFilter) {
        if (model.filters.banks.empty()) throw ParseError("inspect: model has no filters");
        bank = &model.filters.banks.front();
    } else {
        bank = &model.net.conv1;
    }

    char name[128];
    for (int i = 0; i < bank->count; ++i) {
        MultibandImage f(bank->size, bank->size, bank->in_bands == 3 ? 3 : 1);
        for (int dy = 0; dy < bank->size; ++dy)
            for (int dx = 0; dx < bank->size; ++dx)
                for (int b = 0; b < f.bands; ++b)
                    f.at(dx, dy, b) = bank->w(i, dy, dx, std::min(b, bank->in_bands - 1));
        std::snprintf(name, sizeof name, "filter_%03d.%s", i, f.bands == 3 ? "ppm" : "pgm");
        save_normalized(f, (std::filesystem::path(out_dir) / name).string());
    }

    const std::string split = manifest.has_split("test") ? "test" : "train";
    const LabeledImages data = load_split_images(manifest, split);
    const unsigned workers = resolve_workers(workers_flag);

    for (int cls = 0; cls < 2; ++cls) {
        const bool want_fake = cls == 1;
        // Mean preprocessed input and mean first-layer activation per class.
        MultibandImage mean_input;
        MultibandImage mean_act;
        long count = 0;
        std::vector<MultibandImage> inputs(data.records.size());
        std::vector<MultibandImage> acts(data.records.size());
        std::vector<char> keep(data.records.size(), 0);
        parallel_for(data.records.size(), workers, [&](std::size_t i) {
            if (data.records[i].is_fake != want_fake) return;
            MultibandImage prepared;
            MultibandImage act;
            if (model.kind == ModelContainer::Kind::AoRandomFilter) {
                prepared = prepare_input(data.images[i], model.spec);
                act = relu(convolve(prepared, model.filters.banks.front()));
            } else {
                ModelContainer tmp = model;
                prepared = center_crop(prepare_fo_input(tmp, data.images[i]),
                                       model.net.cfg.input_size);
                act = relu(add_bias(convolve(prepared, model.net.conv1), model.net.bias1));
            }
            inputs[i] = std::move(prepared);
            acts[i] = std::move(act);
            keep[i] = 1;
        });
        for (std::size_t i = 0; i < data.records.size(); ++i) {
            if (!keep[i]) continue;
            if (count == 0) {
                mean_input = inputs[i];
                mean_act = acts[i];
            } else {
                for (std::size_t k = 0; k < mean_input.data.size(); ++k)
                    mean_input.data[k] += inputs[i].data[k];
                for (std::size_t k = 0; k < mean_act.data.size(); ++k)
                    mean_act.data[k] += acts[i].data[k];
            }
            ++count;
        }
        if (count == 0) continue;
        for (double& v : mean_input.data) v /= count;
        for (double& v : mean_act.data) v /= count;

        const char* cls_name = want_fake ? "fake" : "real";
        std::snprintf(name, sizeof name, "mean_%s.%s", cls_name,
                      mean_input.bands == 3 ? "ppm" : "pgm");
        save_normalized(mean_input, (std::filesystem::path(out_dir) / name).string());
        for (int b = 0; b < mean_act.bands; ++b) {
            MultibandImage map(mean_act.width, mean_act.height, 1);
            for (int y = 0; y < mean_act.height; ++y)
                for (int x = 0; x < mean_act.width; ++x) map.at(x, y, 0) = mean_act.at(x, y, b);
            std::snprintf(name, sizeof name, "mean_act_%s_%03d.pgm", cls_name, b);
            save_normalized(map, (std::filesystem::path(out_dir) / name).string());
        }
    }
    std::cerr << "inspection images written to " << out_dir << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"spoofbench: spoofing-detection pipelines (architecture search, "
                 "filter learning, biometric evaluation protocol)"};
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand("synth", "generate a synthetic recapture benchmark");
    SynthParams params;
    std::string synth_out;
    synth->add_option("--out", synth_out, "output directory")->required();
    synth->add_option("--seed", params.seed, "rng seed")->required();
    synth->add_option("--individuals", params.individuals, "number of individuals");
    synth->add_option("--per-individual", params.samples_per_individual,
                      "real/fake pairs per individual");
    synth->add_option("--image-size", params.image_size, "square image size in pixels");
    synth->add_option("--blur-sigma", params.blur_sigma, "fake-class Gaussian blur sigma");
    synth->add_option("--noise-std", params.noise_std, "fake-class recapture noise std");
    synth->add_option("--contrast-jitter", params.contrast_jitter,
                      "fake-class contrast jitter amplitude");
    synth->add_option("--train-fraction", params.train_fraction, "fraction of individuals in train");
    synth->add_option("--dev-fraction", params.dev_fraction, "fraction of individuals in dev");

    // search
    auto* search = app.add_subcommand("search", "architecture optimization by random search");
    std::string search_manifest, search_out, search_trace;
    std::size_t budget = kDefaultSearchBudget;
    std::uint64_t search_seed = 0;
    int search_workers = 0;
    search->add_option("--manifest", search_manifest, "benchmark manifest (JSON Lines)")->required();
    search->add_option("--budget", budget, "valid candidates to evaluate (default 2000)");
    search->add_option("--seed", search_seed, "rng seed")->required();
    search->add_option("--out", search_out, "output model container path")->required();
    search->add_option("--trace", search_trace, "search trace path (JSON Lines)");
    search->add_option("--workers", search_workers, "worker threads (default: machine parallelism)");

    // train-net
    auto* train = app.add_subcommand("train-net", "filter optimization: train the spoofnet topology");
    std::string train_manifest, train_out, train_log, schedule_name = "spoofnet";
    int input_size = 128, epochs_div = 1, train_workers = 0;
    double lr_mult = 1.0;
    std::uint64_t train_seed = 0;
    train->add_option("--manifest", train_manifest, "benchmark manifest")->required();
    train->add_option("--input-size", input_size, "source image size (crops are 7/8 of it)");
    train->add_option("--schedule", schedule_name, "training schedule: spoofnet | cf10")
        ->check(CLI::IsMember({"spoofnet", "cf10"}));
    train->add_option("--epochs-div", epochs_div, "divide every phase's epochs by this factor");
    train->add_option("--lr-mult", lr_mult, "multiply every phase's learning rate");
    train->add_option("--seed", train_seed, "rng seed")->required();
    train->add_option("--out", train_out, "output model container path")->required();
    train->add_option("--log", train_log, "per-epoch log path (JSON Lines)");
    train->add_option("--workers", train_workers, "worker threads");

    // eval
    auto* eval = app.add_subcommand("eval", "evaluation protocol: threshold + ACC/HTER");
    std::string eval_model, eval_manifest, eval_rule = "fixed-0.5", eval_report;
    int eval_workers = 0;
    eval->add_option("--model", eval_model, "model container path")->required();
    eval->add_option("--manifest", eval_manifest, "benchmark manifest")->required();
    eval->add_option("--threshold", eval_rule, "threshold rule: dev-eer | cv-eer | fixed-0.5")
        ->check(CLI::IsMember({"dev-eer", "cv-eer", "fixed-0.5"}));
    eval->add_option("--report", eval_report, "report path (JSON; stdout if omitted)");
    eval->add_option("--workers", eval_workers, "worker threads");

    // extract
    auto* extract = app.add_subcommand("extract", "extract deep representations to CSV");
    std::string ex_model, ex_manifest, ex_split = "train", ex_out;
    int ex_workers = 0;
    extract->add_option("--model", ex_model, "AO model container path")->required();
    extract->add_option("--manifest", ex_manifest, "benchmark manifest")->required();
    extract->add_option("--split", ex_split, "split to extract (train|test|dev)");
    extract->add_option("--out", ex_out, "output CSV path")->required();
    extract->add_option("--workers", ex_workers, "worker threads");

    // inspect
    auto* inspect = app.add_subcommand("inspect", "dump filters and mean activation maps as images");
    std::string in_model, in_manifest, in_out;
    int in_workers = 0;
    inspect->add_option("--model", in_model, "model container path")->required();
    inspect->add_option("--manifest", in_manifest, "benchmark manifest")->required();
    inspect->add_option("--out-dir", in_out, "output directory")->required();
    inspect->add_option("--workers", in_workers, "worker threads");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        app.exit(e);
        return 2;
    }

    try {
        if (synth->parsed()) return cmd_synth(params, synth_out);
        if (search->parsed())
            return cmd_search(search_manifest, budget, search_seed, search_out, search_trace,
                              search_workers);
        if (train->parsed())
            return cmd_train_net(train_manifest, input_size, schedule_name, epochs_div, lr_mult,
                                 train_seed, train_out, train_log, train_workers);
        if (eval->parsed())
            return cmd_eval(eval_model, eval_manifest, eval_rule, eval_report, eval_workers);
        if (extract->parsed())
            return cmd_extract(ex_model, ex_manifest, ex_split, ex_out, ex_workers);
        if (inspect->parsed()) return cmd_inspect(in_model, in_manifest, in_out, in_workers);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const spoofbench::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const spoofbench::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
