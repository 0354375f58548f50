#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "spoofbench/errors.hpp"
#include "spoofbench/manifest.hpp"
#include "spoofbench/rng.hpp"

namespace spoofbench {

struct ScoreEntry {
    std::string sample_id;
    std::string group_id;
    bool is_fake = false;
    double score = 0.0;
};

using ScoreSet = std::vector<ScoreEntry>;

// FAR/FRR orientation, fixed repo-wide: the positive class is the attack.
//   FAR = fraction of fake (attack) samples accepted as real,
//   FRR = fraction of real samples rejected (classified as attack).
// A sample is predicted as attack iff score > tau.
struct EvalReport {
    double tau = 0.0;
    std::string threshold_rule;
    double acc_percent = 0.0;
    double hter_percent = 0.0;
    double far_percent = 0.0;
    double frr_percent = 0.0;
    long n_real = 0;
    long n_fake = 0;
    long false_accepts = 0;  // fakes predicted real
    long false_rejects = 0;  // reals predicted fake
};

inline EvalReport compute_metrics(const ScoreSet& scores, double tau) {
    EvalReport r;
    r.tau = tau;
    long correct = 0;
    for (const auto& e : scores) {
        const bool predicted_fake = e.score > tau;
        if (e.is_fake) {
            ++r.n_fake;
            if (!predicted_fake) ++r.false_accepts;
            else ++correct;
        } else {
            ++r.n_real;
            if (predicted_fake) ++r.false_rejects;
            else ++correct;
        }
    }
    r.far_percent = r.n_fake > 0 ? 100.0 * r.false_accepts / r.n_fake : 0.0;
    r.frr_percent = r.n_real > 0 ? 100.0 * r.false_rejects / r.n_real : 0.0;
    r.hter_percent = (r.far_percent + r.frr_percent) / 2.0;
    r.acc_percent = scores.empty() ? 0.0 : 100.0 * correct / static_cast<double>(scores.size());
    return r;
}

// Threshold at the equal error rate: candidate cuts are midpoints of adjacent
// distinct scores plus one cut below and above all scores; the cut minimizing
// |FAR - FRR| wins, ties resolved toward the lower tau.
inline double eer_threshold(const ScoreSet& scores) {
    long n_fake = 0, n_real = 0;
    for (const auto& e : scores) (e.is_fake ? n_fake : n_real)++;
    if (n_fake == 0 || n_real == 0)
        throw DegenerateLabelsError("eer_threshold: both classes required");

    std::vector<double> values;
    values.reserve(scores.size());
    for (const auto& e : scores) values.push_back(e.score);
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());

    std::vector<double> cuts;
    cuts.push_back(values.front() - 0.5);
    for (std::size_t i = 0; i + 1 < values.size(); ++i)
        cuts.push_back((values[i] + values[i + 1]) / 2.0);
    cuts.push_back(values.back() + 0.5);

    double best_tau = cuts.front();
    double best_diff = std::numeric_limits<double>::infinity();
    for (double tau : cuts) {
        long fa = 0, fr = 0;
        for (const auto& e : scores) {
            const bool predicted_fake = e.score > tau;
            if (e.is_fake && !predicted_fake) ++fa;
            if (!e.is_fake && predicted_fake) ++fr;
        }
        const double diff =
            std::abs(static_cast<double>(fa) / n_fake - static_cast<double>(fr) / n_real);
        if (diff < best_diff) {
            best_diff = diff;
            best_tau = tau;
        }
    }
    return best_tau;
}

// Max-rule fusion: one fused entry per group, score = max over members.
// Output order follows the first appearance of each group.
inline ScoreSet fuse_max(const ScoreSet& scores) {
    ScoreSet fused;
    std::map<std::string, std::size_t> index;
    for (const auto& e : scores) {
        auto it = index.find(e.group_id);
        if (it == index.end()) {
            index.emplace(e.group_id, fused.size());
            ScoreEntry g = e;
            g.sample_id = e.group_id;
            fused.push_back(g);
        } else {
            ScoreEntry& g = fused[it->second];
            if (g.is_fake != e.is_fake)
                throw ManifestError("fuse_max: mixed labels in group " + e.group_id);
            g.score = std::max(g.score, e.score);
        }
    }
    return fused;
}

enum class ThresholdRule { DevEer, CvEer, Fixed05 };

inline std::string to_string(ThresholdRule r) {
    switch (r) {
        case ThresholdRule::DevEer: return "dev-eer";
        case ThresholdRule::CvEer: return "cv-eer";
        case ThresholdRule::Fixed05: return "fixed-0.5";
    }
    return "?";
}

inline ThresholdRule threshold_rule_from_string(const std::string& s) {
    if (s == "dev-eer") return ThresholdRule::DevEer;
    if (s == "cv-eer") return ThresholdRule::CvEer;
    if (s == "fixed-0.5") return ThresholdRule::Fixed05;
    throw std::invalid_argument("unknown threshold rule: " + s);
}

inline double select_threshold(ThresholdRule rule, const ScoreSet* dev_scores,
                               const ScoreSet* cv_scores) {
    switch (rule) {
        case ThresholdRule::DevEer:
            if (!dev_scores || dev_scores->empty())
                throw std::invalid_argument("select_threshold: dev-eer requires dev scores");
            return eer_threshold(*dev_scores);
        case ThresholdRule::CvEer:
            if (!cv_scores || cv_scores->empty())
                throw std::invalid_argument("select_threshold: cv-eer requires pooled CV scores");
            return eer_threshold(*cv_scores);
        case ThresholdRule::Fixed05:
            return 0.5;
    }
    throw std::invalid_argument("select_threshold: bad rule");
}

// ---- fold construction -------------------------------------------------

struct FoldAssignment {
    int k = 10;
    std::map<std::string, int> sample_to_fold;      // sample path -> fold
    std::map<std::string, int> individual_to_fold;  // individual -> fold
};

// All samples of one individual land in one fold; attack types and fold
// sizes are balanced greedily after a seeded shuffle of the individuals.
inline FoldAssignment make_folds(const BenchmarkManifest& manifest, int k = 10,
                                 std::uint64_t rng_seed = 0) {
    if (k < 2) throw std::invalid_argument("make_folds: k must be >= 2");

    struct IndividualInfo {
        std::string id;
        std::map<std::string, int> type_counts;  // attack type ("" for real) -> samples
        int total = 0;
    };
    std::map<std::string, IndividualInfo> by_individual;
    for (const auto& rec : manifest.records) {
        auto& info = by_individual[rec.individual_id];
        info.id = rec.individual_id;
        info.type_counts[rec.is_fake ? rec.attack_type : std::string()]++;
        info.total++;
    }
    if (static_cast<int>(by_individual.size()) < k)
        throw std::invalid_argument("make_folds: fewer individuals than folds");

    std::vector<IndividualInfo> individuals;
    for (auto& [id, info] : by_individual) individuals.push_back(info);
    Rng rng(derive_seed(rng_seed, 0xf01d));
    shuffle(individuals, rng);
    std::stable_sort(individuals.begin(), individuals.end(),
                     [](const IndividualInfo& a, const IndividualInfo& b) {
                         return a.total > b.total;
                     });

    std::vector<long> fold_sizes(k, 0);
    std::vector<std::map<std::string, long>> fold_types(k);
    FoldAssignment fa;
    fa.k = k;
    for (const auto& ind : individuals) {
        // Smallest squared per-type counts spread types evenly; fold size
        // squared keeps overall sizes balanced. Lowest index wins ties.
        int best = 0;
        double best_cost = std::numeric_limits<double>::infinity();
        for (int f = 0; f < k; ++f) {
            double cost = 0.0;
            for (const auto& [type, cnt] : ind.type_counts) {
                const double c = static_cast<double>(fold_types[f][type]) + cnt;
                cost += c * c;
            }
            const double sz = static_cast<double>(fold_sizes[f]) + ind.total;
            cost += sz * sz;
            if (cost < best_cost) {
                best_cost = cost;
                best = f;
            }
        }
        fa.individual_to_fold[ind.id] = best;
        fold_sizes[best] += ind.total;
        for (const auto& [type, cnt] : ind.type_counts) fold_types[best][type] += cnt;
    }
    for (const auto& rec : manifest.records)
        fa.sample_to_fold[rec.path] = fa.individual_to_fold.at(rec.individual_id);
    return fa;
}

}  // namespace spoofbench
