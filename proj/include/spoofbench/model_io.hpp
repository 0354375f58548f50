#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "spoofbench/convops.hpp"
#include "spoofbench/errors.hpp"
#include "spoofbench/net.hpp"
#include "spoofbench/protocol.hpp"
#include "spoofbench/search.hpp"
#include "spoofbench/svm.hpp"

namespace spoofbench {

constexpr int kModelFormatVersion = 1;

// Single-JSON model container. Tensors are stored as decimal arrays;
// nlohmann serializes doubles with max_digits10 precision, so save/load
// round-trips are value-exact and predictions stay bit-identical.
struct ModelContainer {
    enum class Kind { AoRandomFilter, FoTrained };

    int format_version = kModelFormatVersion;
    Kind kind = Kind::AoRandomFilter;
    std::uint64_t seed = 0;

    // kind == AoRandomFilter
    ArchitectureSpec spec;
    FilterSet filters;
    LinearModel classifier;
    ScoreSet cv_scores;  // pooled 10-fold predictions on the training set

    // kind == FoTrained
    TrainableNet net;

    // present when a threshold has been frozen into the model
    std::optional<double> tau;
    std::optional<std::string> threshold_rule;
};

namespace detail {

using json = nlohmann::ordered_json;

inline json layer_to_json(const LayerSpec& ls) {
    return json{{"n_filters", ls.n_filters},       {"filter_size", ls.filter_size},
                {"pool_size", ls.pool_size},       {"pool_stride", ls.pool_stride},
                {"pool_exponent", ls.pool_exponent}, {"use_norm", ls.use_norm},
                {"norm_size", ls.norm_size}};
}

inline LayerSpec layer_from_json(const nlohmann::json& j) {
    LayerSpec ls;
    ls.n_filters = j.at("n_filters").get<int>();
    ls.filter_size = j.at("filter_size").get<int>();
    ls.pool_size = j.at("pool_size").get<int>();
    ls.pool_stride = j.at("pool_stride").get<int>();
    ls.pool_exponent = j.at("pool_exponent").get<double>();
    ls.use_norm = j.at("use_norm").get<bool>();
    ls.norm_size = j.at("norm_size").get<int>();
    return ls;
}

inline json bank_to_json(const FilterBank& b) {
    return json{{"count", b.count},
                {"size", b.size},
                {"in_bands", b.in_bands},
                {"weights", b.weights}};
}

inline FilterBank bank_from_json(const nlohmann::json& j) {
    FilterBank b(j.at("count").get<int>(), j.at("size").get<int>(), j.at("in_bands").get<int>());
    b.weights = j.at("weights").get<std::vector<double>>();
    if (b.weights.size() != static_cast<std::size_t>(b.count) * b.size * b.size * b.in_bands)
        throw ParseError("model: filter bank weight count mismatch");
    return b;
}

inline json scores_to_json(const ScoreSet& scores) {
    json arr = json::array();
    for (const auto& e : scores)
        arr.push_back(json{{"sample_id", e.sample_id},
                           {"group_id", e.group_id},
                           {"label", e.is_fake ? "fake" : "real"},
                           {"score", e.score}});
    return arr;
}

inline ScoreSet scores_from_json(const nlohmann::json& arr) {
    ScoreSet out;
    for (const auto& j : arr) {
        ScoreEntry e;
        e.sample_id = j.at("sample_id").get<std::string>();
        e.group_id = j.at("group_id").get<std::string>();
        e.is_fake = j.at("label").get<std::string>() == "fake";
        e.score = j.at("score").get<double>();
        out.push_back(std::move(e));
    }
    return out;
}

}  // namespace detail

inline nlohmann::ordered_json to_json(const ModelContainer& m) {
    using detail::json;
    json j;
    j["format_version"] = m.format_version;
    j["kind"] = m.kind == ModelContainer::Kind::AoRandomFilter ? "ao-random-filter" : "fo-trained";
    j["seed"] = m.seed;
    if (m.kind == ModelContainer::Kind::AoRandomFilter) {
        json spec;
        spec["input_max_axis"] = m.spec.input_max_axis;
        spec["use_color"] = m.spec.use_color;
        spec["input_prenorm"] = m.spec.input_prenorm;
        spec["filter_seed"] = m.spec.filter_seed;
        spec["layers"] = json::array();
        for (const auto& ls : m.spec.layers) spec["layers"].push_back(detail::layer_to_json(ls));
        j["spec"] = spec;
        j["filters"] = json::array();
        for (const auto& b : m.filters.banks) j["filters"].push_back(detail::bank_to_json(b));
        j["classifier"] = json{{"weights", m.classifier.weights},
                               {"bias", m.classifier.bias},
                               {"C", m.classifier.C},
                               {"scaler_mean", m.classifier.scaler.mean},
                               {"scaler_inv_std", m.classifier.scaler.inv_std}};
        j["cv_scores"] = detail::scores_to_json(m.cv_scores);
    } else {
        json net;
        net["input_size"] = m.net.cfg.input_size;
        net["in_bands"] = m.net.cfg.in_bands;
        net["layer1"] = detail::layer_to_json(m.net.cfg.layer1);
        net["layer2"] = detail::layer_to_json(m.net.cfg.layer2);
        net["conv1"] = detail::bank_to_json(m.net.conv1);
        net["bias1"] = m.net.bias1;
        net["conv2"] = detail::bank_to_json(m.net.conv2);
        net["bias2"] = m.net.bias2;
        net["fc_w"] = m.net.fc_w;
        net["fc_b"] = m.net.fc_b;
        net["feat_mean"] = m.net.feat_mean;
        net["feat_inv_std"] = m.net.feat_inv_std;
        j["net"] = net;
    }
    if (m.tau) {
        j["threshold"] = detail::json{{"rule", m.threshold_rule.value_or("")}, {"tau", *m.tau}};
    }
    return j;
}

inline ModelContainer model_from_json(const nlohmann::json& j) {
    ModelContainer m;
    m.format_version = j.at("format_version").get<int>();
    if (m.format_version != kModelFormatVersion)
        throw ParseError("model: unsupported format_version " +
                         std::to_string(m.format_version));
    const std::string kind = j.at("kind").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    if (kind == "ao-random-filter") {
        m.kind = ModelContainer::Kind::AoRandomFilter;
        const auto& spec = j.at("spec");
        m.spec.input_max_axis = spec.at("input_max_axis").get<int>();
        m.spec.use_color = spec.at("use_color").get<bool>();
        m.spec.input_prenorm = spec.at("input_prenorm").get<bool>();
        m.spec.filter_seed = spec.at("filter_seed").get<std::uint64_t>();
        for (const auto& lj : spec.at("layers")) m.spec.layers.push_back(detail::layer_from_json(lj));
        for (const auto& bj : j.at("filters")) m.filters.banks.push_back(detail::bank_from_json(bj));
        const auto& cls = j.at("classifier");
        m.classifier.weights = cls.at("weights").get<std::vector<double>>();
        m.classifier.bias = cls.at("bias").get<double>();
        m.classifier.C = cls.at("C").get<double>();
        m.classifier.scaler.mean = cls.at("scaler_mean").get<std::vector<double>>();
        m.classifier.scaler.inv_std = cls.at("scaler_inv_std").get<std::vector<double>>();
        m.cv_scores = detail::scores_from_json(j.at("cv_scores"));
    } else if (kind == "fo-trained") {
        m.kind = ModelContainer::Kind::FoTrained;
        const auto& net = j.at("net");
        m.net.cfg.input_size = net.at("input_size").get<int>();
        m.net.cfg.in_bands = net.at("in_bands").get<int>();
        m.net.cfg.layer1 = detail::layer_from_json(net.at("layer1"));
        m.net.cfg.layer2 = detail::layer_from_json(net.at("layer2"));
        m.net.shapes = compute_net_shapes(m.net.cfg);
        m.net.conv1 = detail::bank_from_json(net.at("conv1"));
        m.net.bias1 = net.at("bias1").get<std::vector<double>>();
        m.net.conv2 = detail::bank_from_json(net.at("conv2"));
        m.net.bias2 = net.at("bias2").get<std::vector<double>>();
        m.net.fc_w = net.at("fc_w").get<std::vector<double>>();
        m.net.fc_b = net.at("fc_b").get<std::vector<double>>();
        m.net.feat_mean = net.at("feat_mean").get<std::vector<double>>();
        m.net.feat_inv_std = net.at("feat_inv_std").get<std::vector<double>>();
    } else {
        throw ParseError("model: unknown kind '" + kind + "'");
    }
    if (j.contains("threshold")) {
        m.tau = j.at("threshold").at("tau").get<double>();
        m.threshold_rule = j.at("threshold").at("rule").get<std::string>();
    }
    return m;
}

inline void save_model(const ModelContainer& m, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write model: " + path);
    out << to_json(m).dump(1) << "\n";
    if (!out) throw IoError("write failed: " + path);
}

inline ModelContainer load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open model: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("model: ") + e.what());
    }
    return model_from_json(j);
}

}  // namespace spoofbench
