// End-to-end acceptance checks. Each criterion prints exactly one PASS/FAIL
// line; the process exits nonzero if any criterion fails.

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "oracles.hpp"
#include "spoofbench/model_io.hpp"
#include "spoofbench/net.hpp"
#include "spoofbench/pipeline.hpp"
#include "spoofbench/protocol.hpp"
#include "spoofbench/rng.hpp"
#include "spoofbench/search.hpp"
#include "spoofbench/svm.hpp"

#ifndef SPOOFBENCH_CLI_PATH
#error "SPOOFBENCH_CLI_PATH must point at the command-line binary"
#endif

namespace fs = std::filesystem;
using namespace spoofbench;

namespace {

int g_failures = 0;

class Timer {
  public:
    Timer() : start_(std::chrono::steady_clock::now()) {}
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

  private:
    std::chrono::steady_clock::time_point start_;
};

void report(int index, const std::string& name, bool pass, double secs,
            const std::string& detail = "") {
    std::printf("criterion %02d %-28s %s (%.1f s)%s%s\n", index, name.c_str(),
                pass ? "PASS" : "FAIL", secs, detail.empty() ? "" : " -- ", detail.c_str());
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

bool run_cmd(const std::string& dir, const std::string& args) {
    const std::string cmd = "cd \"" + dir + "\" && \"" + std::string(SPOOFBENCH_CLI_PATH) +
                            "\" " + args + " >> cli_stdout.txt 2>> cli_stderr.txt";
    return std::system(cmd.c_str()) == 0;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

bool same_bytes(const std::string& a, const std::string& b, std::string& why) {
    const std::string ca = read_file(a);
    const std::string cb = read_file(b);
    if (ca.empty() || cb.empty()) {
        why = "missing or empty artifact: " + (ca.empty() ? a : b);
        return false;
    }
    if (ca != cb) {
        why = fs::path(a).filename().string() + " differs between reruns";
        return false;
    }
    return true;
}

// ---- criterion 1: operation oracles ---------------------------------------

void criterion_operation_oracles() {
    Timer t;
    Rng rng(1001);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const int w = 7 + static_cast<int>(rng.uniform_index(10));   // <= 16
        const int h = 7 + static_cast<int>(rng.uniform_index(10));
        const int m = 1 + static_cast<int>(rng.uniform_index(3));    // <= 3 bands
        const MultibandImage img = oracle::random_image(w, h, m, rng);

        FilterBank bank(3, 3, m);
        for (double& v : bank.weights) v = rng.uniform(-1.0, 1.0);
        worst = std::max(worst,
                         oracle::max_rel_error(convolve(img, bank), oracle::naive_convolve(img, bank)));

        const MultibandImage act = relu(convolve(img, bank));
        if (act.width >= 3 && act.height >= 3) {
            const double alpha = trial % 3 == 0 ? 1.0 : (trial % 3 == 1 ? 2.0 : 10.0);
            worst = std::max(worst, oracle::max_rel_error(pool(act, 3, 2, alpha),
                                                          oracle::naive_pool(act, 3, 2, alpha)));
            worst = std::max(worst,
                             oracle::max_rel_error(divnorm(act, 3), oracle::naive_divnorm(act, 3)));
        }
    }
    const double secs = t.seconds();
    std::ostringstream d;
    d << "max rel err " << worst;
    report(1, "operation-oracles", worst < 1e-9 && secs < 10.0, secs, d.str());
}

// ---- criterion 2: gradient correctness ------------------------------------

void criterion_gradients() {
    Timer t;
    // Two-layer network on an 8x8 input covering conv, relu, pool, divnorm.
    NetConfig cfg;
    cfg.input_size = 8;
    cfg.layer1 = LayerSpec{2, 3, 3, 1, 2.0, false, 1};
    cfg.layer2 = LayerSpec{2, 3, 1, 1, 2.0, true, 1};
    TrainableNet net = build_net(cfg, 77);
    Rng wrng(78);
    for (double& w : net.conv1.weights) w = wrng.uniform(-0.5, 0.5);
    for (double& w : net.conv2.weights) w = wrng.uniform(-0.5, 0.5);
    for (double& w : net.fc_w) w = wrng.uniform(-0.2, 0.2);
    for (double& b : net.bias1) b = wrng.uniform(-0.1, 0.1);
    for (double& b : net.bias2) b = wrng.uniform(-0.1, 0.1);

    Rng rng(79);
    std::vector<LabeledCrop> batch{{oracle::random_image(8, 8, 1, rng), 1, 0},
                                   {oracle::random_image(8, 8, 1, rng), 0, 1}};
    NetGrads analytic = NetGrads::zeros(net);
    for (const LabeledCrop& s : batch) {
        const ForwardCache c = net_forward(net, s.image);
        analytic.add(net_backward(net, c, s.label_fake));
    }
    analytic.scale(1.0 / static_cast<double>(batch.size()));

    struct View {
        std::vector<double>* value;
        const std::vector<double>* grad;
    };
    const std::vector<View> views{{&net.conv1.weights, &analytic.conv1_w},
                                  {&net.bias1, &analytic.bias1},
                                  {&net.conv2.weights, &analytic.conv2_w},
                                  {&net.bias2, &analytic.bias2},
                                  {&net.fc_w, &analytic.fc_w},
                                  {&net.fc_b, &analytic.fc_b}};
    const double h = 1e-5;
    double worst = 0.0;
    long checked = 0;
    for (const View& v : views) {
        for (std::size_t i = 0; i < v.value->size(); ++i) {
            const double orig = (*v.value)[i];
            (*v.value)[i] = orig + h;
            const double up = forward_loss(net, batch);
            (*v.value)[i] = orig - h;
            const double down = forward_loss(net, batch);
            (*v.value)[i] = orig;
            const double fd = (up - down) / (2.0 * h);
            const double an = (*v.grad)[i];
            const double denom = std::max({std::abs(fd), std::abs(an), 1e-6});
            worst = std::max(worst, std::abs(fd - an) / denom);
            ++checked;
        }
    }
    const double secs = t.seconds();
    std::ostringstream d;
    d << checked << " parameters, max rel err " << worst;
    report(2, "gradient-correctness", worst < 1e-4 && secs < 60.0, secs, d.str());
}

// ---- criterion 3: relu sparsity --------------------------------------------

void criterion_relu_sparsity() {
    Timer t;
    Rng rng(1003);
    long zeros = 0, total = 0;
    // 100 random filter draws, 10 patches each = 1,000 activations.
    for (int i = 0; i < 100; ++i) {
        ArchitectureSpec spec;
        spec.layers = {LayerSpec{1, 5, 1, 1, 2.0, false, 1}};
        spec.filter_seed = 2000 + i;
        const FilterSet fs = generate_random_filters(spec, spec.filter_seed);
        for (int p = 0; p < 10; ++p) {
            const MultibandImage patch = oracle::random_image(5, 5, 1, rng);
            const MultibandImage out = relu(convolve(patch, fs.banks[0]));
            if (out.data[0] == 0.0) ++zeros;
            ++total;
        }
    }
    const double frac = static_cast<double>(zeros) / total;
    std::ostringstream d;
    d << "zero-activation fraction " << frac << " over " << total << " patches";
    report(3, "relu-sparsity", std::abs(frac - 0.5) <= 0.05, t.seconds(), d.str());
}

// ---- criterion 4: search-space cardinality and validity ---------------------

void criterion_search_space() {
    Timer t;
    const SearchSpace space;
    bool ok = space.per_layer_combinations() == 3840;
    std::string detail = "per-layer combinations " + std::to_string(space.per_layer_combinations());

    long mismatches = 0;
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
        ArchitectureSpec spec = sample_architecture(space, seed);
        spec.input_max_axis = 0;  // feed raw dimensions to both calculators
        const int w = 32 + static_cast<int>(seed % 97);
        const int h = 32 + static_cast<int>((seed * 7) % 97);

        std::vector<oracle::LayerShapeParams> layers;
        for (const LayerSpec& ls : spec.layers)
            layers.push_back({ls.n_filters, ls.filter_size, ls.pool_size, ls.pool_stride,
                              ls.use_norm, ls.norm_size});
        const oracle::ShapeChainResult chain =
            oracle::chain_shapes(w, h, spec.use_color ? 3 : 1, layers);
        const bool expect = chain.feasible && chain.max_intermediate <= kMaxIntermediateElements &&
                            chain.output <= kMaxOutputElements;
        const ValidationResult got = validate_architecture(spec, w, h);
        if (got.valid != expect) ++mismatches;
        if (got.valid && got.output_elements != chain.output) ++mismatches;
    }
    ok = ok && mismatches == 0;
    detail += ", validity mismatches " + std::to_string(mismatches) + "/1000";
    report(4, "search-space", ok, t.seconds(), detail);
}

// ---- criterion 5: max-margin solver vs QP oracle ----------------------------

void criterion_svm_oracle() {
    Timer t;
    Rng rng(1005);
    long instances = 0, decision_errors = 0;
    double worst_w = 0.0;
    for (int trial = 0; trial < 60; ++trial) {
        const std::size_t n = 3 + rng.uniform_index(6);  // 3..8 points
        const std::size_t d = 1 + rng.uniform_index(3);  // 1..3 dims
        std::vector<std::vector<double>> X;
        std::vector<int> y;
        bool pos = false, neg = false;
        for (std::size_t i = 0; i < n; ++i) {
            const int label = rng.uniform_index(2) == 0 ? 1 : -1;
            (label == 1 ? pos : neg) = true;
            std::vector<double> x(d);
            for (double& v : x) v = rng.uniform(-1, 1);
            x[0] += (trial % 2 == 0 ? 2.0 : 0.6) * label;
            X.push_back(x);
            y.push_back(label);
        }
        if (!pos || !neg) continue;
        const double C = trial % 3 == 0 ? 1.0 : kDefaultSvmC;
        const oracle::QpSolution ref = oracle::qp_svm(X, y, C);
        if (!ref.found) continue;

        SvmOptions opts;
        opts.standardize = false;
        opts.C = C;
        const LinearModel m = train_svm(X, y, opts);
        for (std::size_t k = 0; k < d; ++k) {
            const double scale = std::max(1.0, std::abs(ref.w[k]));
            worst_w = std::max(worst_w, std::abs(m.weights[k] - ref.w[k]) / scale);
        }
        for (std::size_t i = 0; i < n; ++i) {
            double f_ref = ref.b;
            for (std::size_t k = 0; k < d; ++k) f_ref += ref.w[k] * X[i][k];
            if (std::abs(f_ref) < 1e-8) continue;  // on the boundary
            if ((score(m, X[i]) > 0) != (f_ref > 0)) ++decision_errors;
        }
        ++instances;
    }
    const double secs = t.seconds();
    std::ostringstream d;
    d << instances << " instances, decision errors " << decision_errors << ", worst weight gap "
      << worst_w;
    report(5, "max-margin-solver",
           instances >= 40 && decision_errors == 0 && worst_w < 1e-3 && secs < 10.0, secs,
           d.str());
}

// ---- criterion 6: protocol (EER optimality, HTER arithmetic, folds) ---------

void criterion_protocol() {
    Timer t;
    Rng rng(1006);
    long eer_failures = 0, hter_failures = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        ScoreSet s;
        const std::size_t n = 4 + rng.uniform_index(40);
        bool pos = false, neg = false;
        for (std::size_t i = 0; i < n; ++i) {
            const bool fake = rng.uniform_index(2) == 1;
            (fake ? pos : neg) = true;
            const double v = trial % 2 == 0 ? rng.u01() : std::round(rng.u01() * 10.0) / 10.0;
            s.push_back({"s" + std::to_string(i), "g" + std::to_string(i), fake, v});
        }
        if (!pos || !neg) continue;
        const double tau = eer_threshold(s);
        if (oracle::far_frr_gap_at(s, tau) > oracle::min_far_frr_gap(s) + 1e-12) ++eer_failures;
        const EvalReport r = compute_metrics(s, rng.uniform(-0.2, 1.2));
        if (r.hter_percent != (r.far_percent + r.frr_percent) / 2.0) ++hter_failures;
    }

    long fold_failures = 0;
    for (int trial = 0; trial < 100; ++trial) {
        BenchmarkManifest m;
        const int individuals = 20 + static_cast<int>(rng.uniform_index(21));
        for (int ind = 0; ind < individuals; ++ind) {
            const std::string type = rng.uniform_index(2) == 0 ? "print" : "replay";
            for (int s = 0; s < 2; ++s) {
                SampleRecord rec;
                rec.individual_id = "i" + std::to_string(ind);
                rec.path = rec.individual_id + "_" + std::to_string(s);
                rec.is_fake = s == 1;
                rec.attack_type = s == 1 ? type : "";
                rec.split = "train";
                rec.group_id = rec.path;
                m.records.push_back(rec);
            }
        }
        const int k = 10;
        const FoldAssignment fa = make_folds(m, k, static_cast<std::uint64_t>(trial));

        bool ok = true;
        std::map<std::string, std::map<std::string, long>> type_per_fold;  // type -> fold -> n
        std::map<std::string, long> type_total;
        for (const auto& rec : m.records) {
            const int f = fa.sample_to_fold.at(rec.path);
            if (f != fa.individual_to_fold.at(rec.individual_id)) ok = false;  // disjointness
            const std::string type = rec.is_fake ? rec.attack_type : std::string("real");
            type_per_fold[type][std::to_string(f)]++;
            type_total[type]++;
        }
        for (const auto& [type, per_fold] : type_per_fold) {
            const double even = static_cast<double>(type_total[type]) / k;
            for (int f = 0; f < k; ++f) {
                auto it = per_fold.find(std::to_string(f));
                const long cnt = it == per_fold.end() ? 0 : it->second;
                if (std::abs(cnt - even) > 1.0 + 1e-9) ok = false;  // stratified +-1
            }
        }
        if (!ok) ++fold_failures;
    }

    std::ostringstream d;
    d << "eer failures " << eer_failures << ", hter failures " << hter_failures
      << ", fold failures " << fold_failures << "/100";
    report(6, "evaluation-protocol",
           eer_failures == 0 && hter_failures == 0 && fold_failures == 0, t.seconds(), d.str());
}

// ---- criteria 7-9: end-to-end runs through the command-line tool ------------

struct E2eArtifacts {
    bool ok = false;
    double synth_secs = 0.0, ao_secs = 0.0, fo_secs = 0.0;
    double ao_acc = -1.0, fo_acc = -1.0;
    std::string error;
};

double read_acc(const std::string& report_path, std::string& error) {
    std::ifstream in(report_path);
    if (!in) {
        error = "missing report " + report_path;
        return -1.0;
    }
    nlohmann::json j;
    try {
        in >> j;
        return j.at("acc_percent").get<double>();
    } catch (const std::exception& e) {
        error = std::string("bad report: ") + e.what();
        return -1.0;
    }
}

E2eArtifacts run_pipelines(const std::string& dir) {
    E2eArtifacts a;
    fs::create_directories(dir);
    Timer synth_t;
    if (!run_cmd(dir, "synth --out data --seed 7")) {
        a.error = "synth failed";
        return a;
    }
    a.synth_secs = synth_t.seconds();

    Timer ao_t;
    if (!run_cmd(dir, "search --manifest data/manifest.jsonl --budget 50 --seed 7 "
                      "--out ao_model.json --trace ao_trace.jsonl")) {
        a.error = "search failed";
        return a;
    }
    if (!run_cmd(dir, "eval --model ao_model.json --manifest data/manifest.jsonl "
                      "--threshold cv-eer --report ao_report.json")) {
        a.error = "ao eval failed";
        return a;
    }
    a.ao_secs = ao_t.seconds();
    a.ao_acc = read_acc(dir + "/ao_report.json", a.error);
    if (a.ao_acc < 0.0) return a;

    Timer fo_t;
    if (!run_cmd(dir, "train-net --manifest data/manifest.jsonl --input-size 64 "
                      "--schedule cf10 --epochs-div 5 --seed 7 --out fo_model.json "
                      "--log fo_log.jsonl")) {
        a.error = "train-net failed";
        return a;
    }
    if (!run_cmd(dir, "eval --model fo_model.json --manifest data/manifest.jsonl "
                      "--threshold fixed-0.5 --report fo_report.json")) {
        a.error = "fo eval failed";
        return a;
    }
    a.fo_secs = fo_t.seconds();
    a.fo_acc = read_acc(dir + "/fo_report.json", a.error);
    if (a.fo_acc < 0.0) return a;
    a.ok = true;
    return a;
}

void criteria_end_to_end(const std::string& base) {
    // criterion 7: AO pipeline quality + leakage control
    const std::string run1 = base + "/run1";
    const E2eArtifacts first = run_pipelines(run1);

    {
        Timer control_t;
        double control_acc = -1.0;
        std::string error = first.error;
        if (first.ok) {
            const std::string control = base + "/control";
            fs::create_directories(control);
            const bool ok =
                run_cmd(control, "synth --out data --seed 7 --blur-sigma 0 --noise-std 0") &&
                run_cmd(control, "search --manifest data/manifest.jsonl --budget 50 --seed 7 "
                                 "--out ao_model.json") &&
                run_cmd(control, "eval --model ao_model.json --manifest data/manifest.jsonl "
                                 "--threshold cv-eer --report ao_report.json");
            if (ok) control_acc = read_acc(control + "/ao_report.json", error);
            else error = "control pipeline failed";
        }
        const double main_secs = first.synth_secs + first.ao_secs;
        const bool pass = first.ok && first.ao_acc >= 95.0 && main_secs < 900.0 &&
                          control_acc >= 45.0 && control_acc <= 55.0;
        std::ostringstream d;
        d << "test ACC " << first.ao_acc << "%, control ACC " << control_acc << "%, search wall "
          << main_secs << " s";
        if (!error.empty()) d << ", " << error;
        report(7, "end-to-end-search", pass, main_secs + control_t.seconds(), d.str());
    }

    {
        const bool pass = first.ok && first.fo_acc >= 95.0 && first.fo_secs < 900.0;
        std::ostringstream d;
        d << "test ACC " << first.fo_acc << "% at tau 0.5";
        if (!first.error.empty()) d << ", " << first.error;
        report(8, "end-to-end-training", pass, first.fo_secs, d.str());
    }

    {
        Timer t;
        bool pass = first.ok;
        std::string why = first.error;
        if (pass) {
            const std::string run2 = base + "/run2";
            const E2eArtifacts second = run_pipelines(run2);
            pass = second.ok;
            why = second.error;
            if (pass) {
                for (const char* f : {"ao_model.json", "ao_trace.jsonl", "ao_report.json",
                                      "fo_model.json", "fo_log.jsonl", "fo_report.json"}) {
                    if (!same_bytes(run1 + "/" + f, run2 + "/" + f, why)) {
                        pass = false;
                        break;
                    }
                }
                // The generated benchmarks themselves must also repeat.
                if (pass &&
                    !same_bytes(run1 + "/data/manifest.jsonl", run2 + "/data/manifest.jsonl", why))
                    pass = false;
            }
        }
        report(9, "determinism", pass, t.seconds(),
               pass ? "models, traces, logs, and reports are bit-identical" : why);
    }
}

// ---- criterion 10: reference network structure -------------------------------

void criterion_structure() {
    Timer t;
    bool ok = true;
    std::string why;
    const TrainableNet net = build_spoofnet();
    if (net.conv1.count != 16) { ok = false; why = "layer-1 filter count"; }
    if (net.conv1.size != 5 || net.conv2.size != 5) { ok = false; why = "filter size"; }
    if (spoofnet_source_size(net) != 128) { ok = false; why = "source size"; }
    if (net.cfg.input_size != 112) { ok = false; why = "crop size"; }
    if (augment(MultibandImage(128, 128, 1, 0.0), 112).size() != 10) {
        ok = false;
        why = "augmentation count";
    }
    const TrainingSchedule s = TrainingSchedule::spoofnet();
    const std::array<int, 4> epochs{200, 80, 20, 20};
    const std::array<double, 4> rates{1e-4, 1e-4, 1e-5, 1e-6};
    if (s.phases.size() != 4) { ok = false; why = "phase count"; }
    for (std::size_t i = 0; ok && i < 4; ++i) {
        if (s.phases[i].epochs != epochs[i] || s.phases[i].learning_rate != rates[i]) {
            ok = false;
            why = "schedule phase " + std::to_string(i + 1);
        }
    }
    report(10, "network-structure", ok, t.seconds(),
           ok ? "16 filters, 128/112 geometry, 10 crops, 4-phase schedule" : why);
}

}  // namespace

int main() {
    const std::string base =
        (fs::temp_directory_path() / "spoofbench_acceptance").string();
    std::error_code ec;
    fs::remove_all(base, ec);
    fs::create_directories(base);

    criterion_operation_oracles();
    criterion_gradients();
    criterion_relu_sparsity();
    criterion_search_space();
    criterion_svm_oracle();
    criterion_protocol();
    criteria_end_to_end(base);
    criterion_structure();

    if (g_failures > 0) {
        std::printf("%d criterion(s) failed\n", g_failures);
        return 1;
    }
    std::printf("all criteria passed\n");
    return 0;
}
