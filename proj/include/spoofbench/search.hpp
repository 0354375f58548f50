#pragma once

#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "spoofbench/convops.hpp"
#include "spoofbench/errors.hpp"
#include "spoofbench/image.hpp"
#include "spoofbench/manifest.hpp"
#include "spoofbench/parallel.hpp"
#include "spoofbench/protocol.hpp"
#include "spoofbench/rng.hpp"
#include "spoofbench/svm.hpp"

namespace spoofbench {

// Discrete hyperparameter grids. Per-layer combinations:
// 4 * 4 * 4 * 4 * 3 * (1 + 4) = 3840.
struct SearchSpace {
    std::vector<int> n_filters{32, 64, 128, 256};
    std::vector<int> filter_sizes{3, 5, 7, 9};
    std::vector<int> pool_sizes{3, 5, 7, 9};
    std::vector<int> pool_strides{1, 2, 4, 8};
    std::vector<double> pool_exponents{1.0, 2.0, 10.0};
    std::vector<int> norm_sizes{3, 5, 7, 9};  // plus the "off" choice
    std::vector<int> num_layers{1, 2, 3};
    std::vector<int> input_max_axes{64, 128, 256, 0};  // 0 = keep original size
    bool search_color = true;    // gray vs color as a searched dimension
    bool search_prenorm = true;  // per-image standardization on/off

    std::size_t per_layer_combinations() const {
        return n_filters.size() * filter_sizes.size() * pool_sizes.size() * pool_strides.size() *
               pool_exponents.size() * (1 + norm_sizes.size());
    }
};

struct ArchitectureSpec {
    std::vector<LayerSpec> layers;
    int input_max_axis = 0;  // 0 = original size
    bool use_color = false;
    bool input_prenorm = false;
    std::uint64_t filter_seed = 0;
};

inline ArchitectureSpec sample_architecture(const SearchSpace& space, std::uint64_t rng_seed) {
    Rng rng(derive_seed(rng_seed, 0xa5c1));
    ArchitectureSpec spec;
    const int nl = space.num_layers[rng.uniform_index(space.num_layers.size())];
    spec.input_max_axis = space.input_max_axes[rng.uniform_index(space.input_max_axes.size())];
    spec.use_color = space.search_color && rng.uniform_index(2) == 1;
    spec.input_prenorm = space.search_prenorm && rng.uniform_index(2) == 1;
    spec.filter_seed = derive_seed(rng_seed, 0xf117);
    for (int l = 0; l < nl; ++l) {
        LayerSpec ls;
        ls.n_filters = space.n_filters[rng.uniform_index(space.n_filters.size())];
        ls.filter_size = space.filter_sizes[rng.uniform_index(space.filter_sizes.size())];
        ls.pool_size = space.pool_sizes[rng.uniform_index(space.pool_sizes.size())];
        ls.pool_stride = space.pool_strides[rng.uniform_index(space.pool_strides.size())];
        ls.pool_exponent = space.pool_exponents[rng.uniform_index(space.pool_exponents.size())];
        const std::size_t norm_choice = rng.uniform_index(1 + space.norm_sizes.size());
        if (norm_choice == 0) {
            ls.use_norm = false;
            ls.norm_size = 1;
        } else {
            ls.use_norm = true;
            ls.norm_size = space.norm_sizes[norm_choice - 1];
        }
        spec.layers.push_back(ls);
    }
    return spec;
}

enum class RejectionReason { None, ShapeCollapse, IntermediateTooLarge, OutputTooLarge };

inline std::string to_string(RejectionReason r) {
    switch (r) {
        case RejectionReason::None: return "valid";
        case RejectionReason::ShapeCollapse: return "shape-collapse";
        case RejectionReason::IntermediateTooLarge: return "intermediate-too-large";
        case RejectionReason::OutputTooLarge: return "output-too-large";
    }
    return "?";
}

struct ValidationResult {
    bool valid = false;
    RejectionReason reason = RejectionReason::None;
    // Representation dimensions after each layer (w, h, bands).
    std::vector<std::array<int, 3>> layer_dims;
    long output_elements = 0;
};

constexpr long kMaxIntermediateElements = 600000;
constexpr long kMaxOutputElements = 30000;

// Chains the layer shape arithmetic on the (already resized) input
// dimensions and applies the element-count caps. Never throws.
inline ValidationResult validate_architecture(const ArchitectureSpec& spec, int input_w,
                                              int input_h) {
    ValidationResult res;
    int w = input_w, h = input_h;
    if (spec.input_max_axis > 0) {
        const int major = std::max(w, h);
        const int minor = std::min(w, h);
        const int new_minor = std::max(
            1,
            static_cast<int>(std::floor(static_cast<double>(minor) * spec.input_max_axis / major + 0.5)));
        if (w >= h) { w = spec.input_max_axis; h = new_minor; }
        else { w = new_minor; h = spec.input_max_axis; }
    }
    int bands = spec.use_color ? 3 : 1;
    for (std::size_t li = 0; li < spec.layers.size(); ++li) {
        const LayerSpec& ls = spec.layers[li];
        const bool last_layer = li + 1 == spec.layers.size();
        auto check_stage = [&](int sw, int sh, int sb, bool final_stage) -> bool {
            if (sw < 1 || sh < 1) {
                res.reason = RejectionReason::ShapeCollapse;
                return false;
            }
            const long count = static_cast<long>(sw) * sh * sb;
            if (final_stage) {
                if (count > kMaxOutputElements) {
                    res.reason = RejectionReason::OutputTooLarge;
                    return false;
                }
            } else if (count > kMaxIntermediateElements) {
                res.reason = RejectionReason::IntermediateTooLarge;
                return false;
            }
            return true;
        };
        // convolution
        w = w - ls.filter_size + 1;
        h = h - ls.filter_size + 1;
        bands = ls.n_filters;
        if (!check_stage(w, h, bands, false)) return res;
        // pooling
        const int vw = w - ls.pool_size + 1;
        const int vh = h - ls.pool_size + 1;
        if (vw < 1 || vh < 1) {
            res.reason = RejectionReason::ShapeCollapse;
            return res;
        }
        w = (vw - 1) / ls.pool_stride + 1;
        h = (vh - 1) / ls.pool_stride + 1;
        if (!check_stage(w, h, bands, last_layer && !ls.use_norm)) return res;
        // normalization
        if (ls.use_norm) {
            w = w - ls.norm_size + 1;
            h = h - ls.norm_size + 1;
            if (!check_stage(w, h, bands, last_layer)) return res;
        }
        res.layer_dims.push_back({w, h, bands});
    }
    res.valid = true;
    res.output_elements = static_cast<long>(w) * h * bands;
    return res;
}

// Filters drawn i.i.d. U(0,1), then shifted to zero mean and scaled to unit
// Euclidean norm. Degenerate draws (norm ~ 0 after centering) are resampled.
inline FilterSet generate_random_filters(const ArchitectureSpec& spec, std::uint64_t rng_seed) {
    FilterSet set;
    int in_bands = spec.use_color ? 3 : 1;
    Rng rng(derive_seed(rng_seed, 0x5eed));
    for (const LayerSpec& ls : spec.layers) {
        FilterBank bank(ls.n_filters, ls.filter_size, in_bands);
        const std::size_t per_filter =
            static_cast<std::size_t>(ls.filter_size) * ls.filter_size * in_bands;
        for (int i = 0; i < ls.n_filters; ++i) {
            double* wptr = &bank.weights[static_cast<std::size_t>(i) * per_filter];
            for (;;) {
                double mean = 0.0;
                for (std::size_t k = 0; k < per_filter; ++k) {
                    wptr[k] = rng.u01();
                    mean += wptr[k];
                }
                mean /= static_cast<double>(per_filter);
                double norm2 = 0.0;
                for (std::size_t k = 0; k < per_filter; ++k) {
                    wptr[k] -= mean;
                    norm2 += wptr[k] * wptr[k];
                }
                if (norm2 > 1e-20) {
                    const double inv = 1.0 / std::sqrt(norm2);
                    for (std::size_t k = 0; k < per_filter; ++k) wptr[k] *= inv;
                    break;
                }
            }
        }
        set.banks.push_back(std::move(bank));
        in_bands = ls.n_filters;
    }
    return set;
}

// Network-level input handling shared by search, eval, and extract.
inline MultibandImage prepare_input(const MultibandImage& img, const ArchitectureSpec& spec) {
    MultibandImage cur = img;
    if (!spec.use_color && cur.bands == 3) cur = to_grayscale(cur);
    if (spec.use_color && cur.bands == 1) {
        MultibandImage rgb(cur.width, cur.height, 3);
        for (int y = 0; y < cur.height; ++y)
            for (int x = 0; x < cur.width; ++x)
                for (int b = 0; b < 3; ++b) rgb.at(x, y, b) = cur.at(x, y, 0);
        cur = rgb;
    }
    if (spec.input_max_axis > 0) cur = resize_keep_aspect(cur, spec.input_max_axis);
    if (spec.input_prenorm) cur = standardize_image(cur);
    return cur;
}

struct CandidateResult {
    ArchitectureSpec spec;
    std::size_t candidate_index = 0;  // index in the valid-candidate sequence
    std::uint64_t attempt_index = 0;  // sampling attempt that produced it
    double objective = 0.0;
    std::vector<double> fold_accuracies;
    std::vector<std::array<int, 3>> layer_dims;
    bool degenerate_fold = false;  // some training fold had a single class
    double wall_time_seconds = 0.0;
};

// In-memory dataset for candidate evaluation: records plus loaded images.
struct LabeledImages {
    std::vector<SampleRecord> records;
    std::vector<MultibandImage> images;
};

// Adapted 10-fold objective: train the max-margin classifier on fold i,
// score the union of the other folds, average the detection accuracies.
inline CandidateResult evaluate_candidate(const ArchitectureSpec& spec,
                                          const LabeledImages& dataset,
                                          const FoldAssignment& folds, unsigned workers = 1) {
    const auto t0 = std::chrono::steady_clock::now();
    if (dataset.records.empty()) throw std::invalid_argument("evaluate_candidate: empty dataset");

    CandidateResult result;
    result.spec = spec;
    const FilterSet filters = generate_random_filters(spec, spec.filter_seed);

    const std::size_t n = dataset.records.size();
    std::vector<std::vector<double>> feats(n);
    parallel_for(n, workers, [&](std::size_t i) {
        feats[i] = forward(prepare_input(dataset.images[i], spec), spec.layers, filters).values;
    });

    const int k = folds.k;
    result.fold_accuracies.assign(k, 0.0);
    bool degenerate = false;
    for (int f = 0; f < k; ++f) {
        std::vector<std::vector<double>> train_x;
        std::vector<int> train_y;
        std::vector<std::size_t> val_idx;
        for (std::size_t i = 0; i < n; ++i) {
            if (folds.sample_to_fold.at(dataset.records[i].path) == f) {
                train_x.push_back(feats[i]);
                train_y.push_back(dataset.records[i].is_fake ? 1 : -1);
            } else {
                val_idx.push_back(i);
            }
        }
        long correct = 0;
        if (train_x.empty() || val_idx.empty()) {
            degenerate = true;
            result.fold_accuracies[f] = 0.5;
            continue;
        }
        const bool has_pos = std::find(train_y.begin(), train_y.end(), 1) != train_y.end();
        const bool has_neg = std::find(train_y.begin(), train_y.end(), -1) != train_y.end();
        if (!has_pos || !has_neg) {
            // Single-class fold: constant classifier at the training prior.
            degenerate = true;
            const bool predict_fake = has_pos;
            for (std::size_t i : val_idx)
                if (dataset.records[i].is_fake == predict_fake) ++correct;
        } else {
            SvmOptions opts;
            const LinearModel model = train_svm(train_x, train_y, opts);
            for (std::size_t i : val_idx) {
                const bool predicted_fake = score(model, feats[i]) > 0.0;
                if (predicted_fake == dataset.records[i].is_fake) ++correct;
            }
        }
        result.fold_accuracies[f] = static_cast<double>(correct) / val_idx.size();
    }
    result.degenerate_fold = degenerate;
    double sum = 0.0;
    for (double a : result.fold_accuracies) sum += a;
    result.objective = sum / k;

    const ValidationResult vr =
        validate_architecture(spec, dataset.images.front().width, dataset.images.front().height);
    result.layer_dims = vr.layer_dims;
    result.wall_time_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return result;
}

struct SearchOutcome {
    CandidateResult best;
    std::vector<CandidateResult> trace;  // valid candidates, in sampling order
    std::uint64_t attempts = 0;          // total sampling attempts, invalid included
};

constexpr std::size_t kDefaultSearchBudget = 2000;

// Random search: sample, skip invalid candidates (they never consume budget),
// evaluate valid ones, return the argmax objective (ties: earliest index).
// Candidate i's spec and filters derive from (seed, attempt index), so the
// trace is identical for any worker count and any shared-prefix budget.
inline SearchOutcome random_search(const SearchSpace& space, const LabeledImages& dataset,
                                   std::size_t budget, std::uint64_t rng_seed,
                                   const FoldAssignment& folds, unsigned workers = 1) {
    if (budget < 1) throw std::invalid_argument("random_search: budget must be >= 1");
    if (dataset.records.empty()) throw std::invalid_argument("random_search: empty dataset");

    const int w0 = dataset.images.front().width;
    const int h0 = dataset.images.front().height;

    SearchOutcome out;
    std::uint64_t attempt = 0;
    std::vector<ArchitectureSpec> specs;
    std::vector<std::uint64_t> attempt_idx;
    while (specs.size() < budget) {
        ArchitectureSpec spec = sample_architecture(space, derive_seed(rng_seed, attempt));
        const ValidationResult vr = validate_architecture(spec, w0, h0);
        if (vr.valid) {
            specs.push_back(spec);
            attempt_idx.push_back(attempt);
        }
        ++attempt;
    }
    out.attempts = attempt;

    out.trace.resize(budget);
    // One candidate per task; per-image parallelism stays inside when the
    // pool is otherwise idle (single candidate).
    parallel_for(budget, workers, [&](std::size_t i) {
        CandidateResult r = evaluate_candidate(specs[i], dataset, folds, 1);
        r.candidate_index = i;
        r.attempt_index = attempt_idx[i];
        out.trace[i] = std::move(r);
    });

    std::size_t best_i = 0;
    for (std::size_t i = 1; i < budget; ++i)
        if (out.trace[i].objective > out.trace[best_i].objective) best_i = i;
    out.best = out.trace[best_i];
    return out;
}

}  // namespace spoofbench
