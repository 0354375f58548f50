#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "spoofbench/errors.hpp"
#include "spoofbench/image.hpp"
#include "spoofbench/manifest.hpp"
#include "spoofbench/model_io.hpp"
#include "spoofbench/net.hpp"
#include "spoofbench/parallel.hpp"
#include "spoofbench/protocol.hpp"
#include "spoofbench/search.hpp"

namespace spoofbench {

inline LabeledImages load_split_images(const BenchmarkManifest& manifest,
                                       const std::string& split) {
    LabeledImages out;
    out.records = manifest.split(split);
    if (out.records.empty())
        throw std::invalid_argument("manifest has no '" + split + "' samples");
    out.images.resize(out.records.size());
    for (std::size_t i = 0; i < out.records.size(); ++i)
        out.images[i] = load_pnm(out.records[i].path);
    return out;
}

// ---- architecture-optimization pipeline ---------------------------------

struct AoSearchResult {
    ModelContainer model;
    SearchOutcome outcome;
};

inline nlohmann::ordered_json candidate_to_json(const CandidateResult& r) {
    nlohmann::ordered_json j;
    j["candidate_index"] = r.candidate_index;
    j["attempt_index"] = r.attempt_index;
    j["objective"] = r.objective;
    j["fold_accuracies"] = r.fold_accuracies;
    nlohmann::ordered_json dims = nlohmann::ordered_json::array();
    for (const auto& d : r.layer_dims) dims.push_back({d[0], d[1], d[2]});
    j["layer_dims"] = dims;
    j["degenerate_fold"] = r.degenerate_fold;
    nlohmann::ordered_json spec;
    spec["input_max_axis"] = r.spec.input_max_axis;
    spec["use_color"] = r.spec.use_color;
    spec["input_prenorm"] = r.spec.input_prenorm;
    spec["filter_seed"] = r.spec.filter_seed;
    spec["layers"] = nlohmann::ordered_json::array();
    for (const auto& ls : r.spec.layers) spec["layers"].push_back(detail::layer_to_json(ls));
    j["spec"] = spec;
    return j;
}

// Full AO flow: random search over the train split, then a final classifier
// on the whole train split and pooled 10-fold CV scores for the cv-eer rule.
inline AoSearchResult run_ao_search(const BenchmarkManifest& manifest, std::size_t budget,
                                    std::uint64_t seed, unsigned workers,
                                    const std::string& trace_path = "") {
    const LabeledImages train = load_split_images(manifest, "train");
    BenchmarkManifest train_manifest;
    train_manifest.records = train.records;
    const FoldAssignment folds = make_folds(train_manifest, 10, seed);

    AoSearchResult res;
    res.outcome = random_search(SearchSpace{}, train, budget, seed, folds, workers);

    if (!trace_path.empty()) {
        std::ofstream out(trace_path);
        if (!out) throw IoError("cannot write trace: " + trace_path);
        for (const auto& r : res.outcome.trace) out << candidate_to_json(r).dump() << "\n";
    }

    const ArchitectureSpec& best = res.outcome.best.spec;
    const FilterSet filters = generate_random_filters(best, best.filter_seed);

    std::vector<std::vector<double>> feats(train.records.size());
    parallel_for(train.records.size(), workers, [&](std::size_t i) {
        feats[i] = forward(prepare_input(train.images[i], best), best.layers, filters).values;
    });

    // Pooled CV scores: each sample is scored by the 9 rounds in which it
    // validates; all (sample, score) pairs are joined into one set.
    ScoreSet cv_scores;
    for (int f = 0; f < folds.k; ++f) {
        std::vector<std::vector<double>> train_x;
        std::vector<int> train_y;
        std::vector<std::size_t> val_idx;
        for (std::size_t i = 0; i < train.records.size(); ++i) {
            if (folds.sample_to_fold.at(train.records[i].path) == f) {
                train_x.push_back(feats[i]);
                train_y.push_back(train.records[i].is_fake ? 1 : -1);
            } else {
                val_idx.push_back(i);
            }
        }
        const bool has_pos = std::find(train_y.begin(), train_y.end(), 1) != train_y.end();
        const bool has_neg = std::find(train_y.begin(), train_y.end(), -1) != train_y.end();
        if (!has_pos || !has_neg || val_idx.empty()) continue;
        const LinearModel fold_model = train_svm(train_x, train_y);
        for (std::size_t i : val_idx) {
            const SampleRecord& rec = train.records[i];
            cv_scores.push_back(
                {rec.path, rec.group_id, rec.is_fake, score(fold_model, feats[i])});
        }
    }

    std::vector<int> labels;
    for (const auto& r : train.records) labels.push_back(r.is_fake ? 1 : -1);
    const LinearModel final_model = train_svm(feats, labels);

    res.model.kind = ModelContainer::Kind::AoRandomFilter;
    res.model.seed = seed;
    res.model.spec = best;
    res.model.filters = filters;
    res.model.classifier = final_model;
    res.model.cv_scores = cv_scores;
    return res;
}

// ---- scoring and evaluation ----------------------------------------------

inline double score_sample_ao(const ModelContainer& model, const MultibandImage& img) {
    const FeatureVector fv =
        forward(prepare_input(img, model.spec), model.spec.layers, model.filters);
    return score(model.classifier, fv);
}

inline MultibandImage prepare_fo_input(const ModelContainer& model, const MultibandImage& img) {
    const int S = spoofnet_source_size(model.net);
    MultibandImage cur = img;
    if (model.net.cfg.in_bands == 1 && cur.bands == 3) cur = to_grayscale(cur);
    if (model.net.cfg.in_bands == 3 && cur.bands == 1) {
        MultibandImage rgb(cur.width, cur.height, 3);
        for (std::size_t p = 0; p < cur.size(); ++p)
            for (int b = 0; b < 3; ++b) rgb.data[p * 3 + b] = cur.data[p];
        cur = rgb;
    }
    return resize_exact(cur, S, S);
}

inline ScoreSet score_split(const ModelContainer& model, const BenchmarkManifest& manifest,
                            const std::string& split, unsigned workers) {
    const LabeledImages data = load_split_images(manifest, split);
    ScoreSet scores(data.records.size());
    parallel_for(data.records.size(), workers, [&](std::size_t i) {
        const SampleRecord& rec = data.records[i];
        double s;
        if (model.kind == ModelContainer::Kind::AoRandomFilter)
            s = score_sample_ao(model, data.images[i]);
        else
            s = predict_prob(model.net, prepare_fo_input(model, data.images[i]));
        scores[i] = {rec.path, rec.group_id, rec.is_fake, s};
    });
    return scores;
}

struct EvalOutcome {
    EvalReport report;
    ScoreSet test_scores;  // after max-rule fusion
};

// Evaluation protocol: score the test split, fuse per group with the max
// rule, select tau per the requested rule, compute ACC/HTER.
inline EvalOutcome run_eval(const ModelContainer& model, const BenchmarkManifest& manifest,
                            ThresholdRule rule, unsigned workers) {
    EvalOutcome out;
    out.test_scores = fuse_max(score_split(model, manifest, "test", workers));

    double tau = 0.0;
    switch (rule) {
        case ThresholdRule::DevEer: {
            const ScoreSet dev = fuse_max(score_split(model, manifest, "dev", workers));
            tau = select_threshold(rule, &dev, nullptr);
            break;
        }
        case ThresholdRule::CvEer: {
            if (model.kind != ModelContainer::Kind::AoRandomFilter)
                throw std::invalid_argument("cv-eer threshold requires an AO model");
            const ScoreSet pooled = fuse_max(model.cv_scores);
            tau = select_threshold(rule, nullptr, &pooled);
            break;
        }
        case ThresholdRule::Fixed05:
            tau = 0.5;
            break;
    }
    out.report = compute_metrics(out.test_scores, tau);
    out.report.threshold_rule = to_string(rule);
    return out;
}

// ---- filter-optimization pipeline -----------------------------------------

struct FoTrainResult {
    ModelContainer model;
    std::vector<EpochLogEntry> log;
};

inline FoTrainResult run_fo_training(const BenchmarkManifest& manifest, int source_size,
                                     const TrainingSchedule& schedule, std::uint64_t seed,
                                     unsigned workers, const std::string& log_path = "",
                                     int in_bands = 1) {
    const LabeledImages train = load_split_images(manifest, "train");

    TrainableNet net = build_spoofnet(source_size, in_bands, seed);

    std::vector<int> labels;
    for (const auto& r : train.records) labels.push_back(r.is_fake ? 1 : 0);
    const std::vector<int> batches = make_batch_split(labels, seed);

    ModelContainer container;
    container.kind = ModelContainer::Kind::FoTrained;
    container.seed = seed;

    std::vector<LabeledCrop> crops;
    crops.reserve(train.records.size() * 10);
    for (std::size_t i = 0; i < train.records.size(); ++i) {
        container.net = net;  // reuse band conversion helper below
        MultibandImage prepared = prepare_fo_input(container, train.images[i]);
        for (MultibandImage& c : augment(prepared, net.cfg.input_size))
            crops.push_back({std::move(c), labels[i], batches[i]});
    }

    std::ofstream log_stream;
    if (!log_path.empty()) {
        log_stream.open(log_path);
        if (!log_stream) throw IoError("cannot write training log: " + log_path);
    }
    auto on_epoch = [&](const EpochLogEntry& e) {
        if (!log_stream.is_open()) return;
        nlohmann::ordered_json j;
        j["epoch"] = e.epoch;
        j["phase"] = e.phase;
        j["lr"] = e.learning_rate;
        j["train_loss"] = e.train_loss;
        if (e.val_acc >= 0.0) j["val_acc"] = e.val_acc;
        log_stream << j.dump() << "\n";
    };

    FoTrainResult res;
    res.log = train_net(net, crops, schedule, seed, workers, on_epoch);
    container.net = net;
    container.tau = 0.5;
    container.threshold_rule = "fixed-0.5";
    res.model = std::move(container);
    return res;
}

}  // namespace spoofbench
