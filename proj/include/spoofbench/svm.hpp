#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "spoofbench/errors.hpp"
#include "spoofbench/image.hpp"

namespace spoofbench {

constexpr double kDefaultSvmC = 1e5;  // hard-margin behavior on separable data

// Per-dimension standardization fitted on the training fold and stored with
// the model so scoring applies the identical transform.
struct FeatureScaler {
    std::vector<double> mean;
    std::vector<double> inv_std;

    static FeatureScaler identity(std::size_t dims) {
        FeatureScaler s;
        s.mean.assign(dims, 0.0);
        s.inv_std.assign(dims, 1.0);
        return s;
    }

    static FeatureScaler fit(const std::vector<std::vector<double>>& rows) {
        const std::size_t d = rows.front().size();
        FeatureScaler s;
        s.mean.assign(d, 0.0);
        s.inv_std.assign(d, 1.0);
        for (const auto& r : rows)
            for (std::size_t j = 0; j < d; ++j) s.mean[j] += r[j];
        for (double& m : s.mean) m /= static_cast<double>(rows.size());
        std::vector<double> var(d, 0.0);
        for (const auto& r : rows)
            for (std::size_t j = 0; j < d; ++j) {
                const double c = r[j] - s.mean[j];
                var[j] += c * c;
            }
        for (std::size_t j = 0; j < d; ++j) {
            const double v = var[j] / static_cast<double>(rows.size());
            s.inv_std[j] = v > 1e-24 ? 1.0 / std::sqrt(v) : 1.0;
        }
        return s;
    }

    std::vector<double> apply(const std::vector<double>& x) const {
        std::vector<double> out(x.size());
        for (std::size_t j = 0; j < x.size(); ++j) out[j] = (x[j] - mean[j]) * inv_std[j];
        return out;
    }
};

struct LinearModel {
    std::vector<double> weights;
    double bias = 0.0;
    double C = kDefaultSvmC;
    FeatureScaler scaler;
    long iterations = 0;
    double objective = 0.0;  // primal value at the solution
};

struct SvmOptions {
    double C = kDefaultSvmC;
    bool standardize = true;
    double gap_tol = 1e-6;  // relative duality gap target
    long max_iterations = 2000000;
};

// Score in standardized feature space: w . scale(x) + b.
// Positive scores mean the attack (fake) class under the repo-wide
// convention fake = +1, real = -1.
inline double score(const LinearModel& model, const std::vector<double>& x) {
    if (x.size() != model.weights.size())
        throw ShapeError("score: feature dimensionality mismatch");
    double s = model.bias;
    for (std::size_t j = 0; j < x.size(); ++j)
        s += model.weights[j] * (x[j] - model.scaler.mean[j]) * model.scaler.inv_std[j];
    return s;
}

inline double score(const LinearModel& model, const FeatureVector& x) {
    return score(model, x.values);
}

// L1-loss linear SVM trained in the dual with SMO-style maximally violating
// pair updates. Minimizes 0.5 |w|^2 + C sum hinge(y (w.x + b)) with a true
// (unregularized) bias, stopping at the requested relative duality gap.
inline LinearModel train_svm(const std::vector<std::vector<double>>& features,
                             const std::vector<int>& labels, const SvmOptions& opts = {}) {
    const std::size_t n = features.size();
    if (n == 0 || labels.size() != n)
        throw std::invalid_argument("train_svm: empty data or label count mismatch");
    const std::size_t d = features.front().size();
    bool has_pos = false, has_neg = false;
    for (std::size_t i = 0; i < n; ++i) {
        if (features[i].size() != d) throw ShapeError("train_svm: ragged feature dimensions");
        if (labels[i] == 1) has_pos = true;
        else if (labels[i] == -1) has_neg = true;
        else throw std::invalid_argument("train_svm: labels must be +1/-1");
    }
    if (!has_pos || !has_neg)
        throw DegenerateLabelsError("train_svm: need at least one sample of each class");

    LinearModel model;
    model.C = opts.C;
    model.scaler = opts.standardize ? FeatureScaler::fit(features) : FeatureScaler::identity(d);

    std::vector<std::vector<double>> X(n);
    for (std::size_t i = 0; i < n; ++i) X[i] = model.scaler.apply(features[i]);

    // Q_ij = y_i y_j x_i . x_j, dense; training folds are small.
    std::vector<double> Q(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i; j < n; ++j) {
            double dot = 0.0;
            for (std::size_t k = 0; k < d; ++k) dot += X[i][k] * X[j][k];
            const double q = labels[i] * labels[j] * dot;
            Q[i * n + j] = q;
            Q[j * n + i] = q;
        }
    }

    std::vector<double> alpha(n, 0.0);
    std::vector<double> grad(n, -1.0);  // gradient of 0.5 a'Qa - sum a
    const double C = opts.C;

    auto in_up = [&](std::size_t t) {
        return (labels[t] == 1 && alpha[t] < C) || (labels[t] == -1 && alpha[t] > 0.0);
    };
    auto in_low = [&](std::size_t t) {
        return (labels[t] == 1 && alpha[t] > 0.0) || (labels[t] == -1 && alpha[t] < C);
    };

    auto compute_bias = [&]() {
        double sum = 0.0;
        int free_count = 0;
        for (std::size_t t = 0; t < n; ++t)
            if (alpha[t] > 1e-12 * C && alpha[t] < C * (1.0 - 1e-12)) {
                sum += -labels[t] * grad[t];
                ++free_count;
            }
        if (free_count > 0) return sum / free_count;
        double up = -std::numeric_limits<double>::infinity();
        double low = std::numeric_limits<double>::infinity();
        for (std::size_t t = 0; t < n; ++t) {
            const double v = -labels[t] * grad[t];
            if (in_up(t)) up = std::max(up, v);
            if (in_low(t)) low = std::min(low, v);
        }
        return (up + low) / 2.0;
    };

    auto duality_gap = [&](double b, double* primal_out) {
        // primal: 0.5|w|^2 + C sum hinge; dual: sum a - 0.5 a'Qa.
        double wnorm2 = 0.0, dual_lin = 0.0;
        for (std::size_t t = 0; t < n; ++t) {
            // a'Qa = sum_t a_t (grad_t + 1)
            wnorm2 += alpha[t] * (grad[t] + 1.0);
            dual_lin += alpha[t];
        }
        double hinge = 0.0;
        for (std::size_t t = 0; t < n; ++t) {
            // y_t w.x_t = (Q a)_t / y_t ... note grad_t = (Qa)_t - 1 and
            // (Qa)_t = y_t * (w.x_t), so margin = (grad_t + 1) + y_t b.
            const double margin = (grad[t] + 1.0) + labels[t] * b;
            hinge += std::max(0.0, 1.0 - margin);
        }
        const double primal = 0.5 * wnorm2 + C * hinge;
        const double dual = dual_lin - 0.5 * wnorm2;
        if (primal_out) *primal_out = primal;
        return primal - dual;
    };

    long iter = 0;
    const double pair_tol = 1e-10;
    while (iter < opts.max_iterations) {
        // Maximally violating pair selection.
        std::size_t i = n, j = n;
        double up = -std::numeric_limits<double>::infinity();
        double low = std::numeric_limits<double>::infinity();
        for (std::size_t t = 0; t < n; ++t) {
            const double v = -labels[t] * grad[t];
            if (in_up(t) && v > up) {
                up = v;
                i = t;
            }
            if (in_low(t) && v < low) {
                low = v;
                j = t;
            }
        }
        if (i == n || j == n || up - low < pair_tol) break;
        if (iter % 64 == 0) {
            double primal = 0.0;
            const double gap = duality_gap(compute_bias(), &primal);
            if (gap <= opts.gap_tol * (1.0 + std::abs(primal))) break;
        }

        // Two-variable analytic update (LibSVM-style, Q includes labels).
        const double yi = labels[i], yj = labels[j];
        double quad;
        if (yi != yj) quad = Q[i * n + i] + Q[j * n + j] + 2.0 * Q[i * n + j];
        else quad = Q[i * n + i] + Q[j * n + j] - 2.0 * Q[i * n + j];
        if (quad <= 0.0) quad = 1e-12;

        const double old_ai = alpha[i], old_aj = alpha[j];
        if (yi != yj) {
            const double delta = (-grad[i] - grad[j]) / quad;
            const double diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if (diff > 0) {
                if (alpha[j] < 0) { alpha[j] = 0; alpha[i] = diff; }
            } else {
                if (alpha[i] < 0) { alpha[i] = 0; alpha[j] = -diff; }
            }
            if (diff > 0) {
                if (alpha[i] > C) { alpha[i] = C; alpha[j] = C - diff; }
            } else {
                if (alpha[j] > C) { alpha[j] = C; alpha[i] = C + diff; }
            }
        } else {
            const double delta = (grad[i] - grad[j]) / quad;
            const double sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if (sum > C) {
                if (alpha[i] > C) { alpha[i] = C; alpha[j] = sum - C; }
                if (alpha[j] > C) { alpha[j] = C; alpha[i] = sum - C; }
            } else {
                if (alpha[j] < 0) { alpha[j] = 0; alpha[i] = sum; }
                if (alpha[i] < 0) { alpha[i] = 0; alpha[j] = sum; }
            }
        }

        const double dai = alpha[i] - old_ai;
        const double daj = alpha[j] - old_aj;
        if (dai == 0.0 && daj == 0.0) break;  // numerically stuck at optimum
        for (std::size_t t = 0; t < n; ++t)
            grad[t] += Q[t * n + i] * dai + Q[t * n + j] * daj;
        ++iter;
    }

    model.bias = compute_bias();
    model.iterations = iter;
    duality_gap(model.bias, &model.objective);

    model.weights.assign(d, 0.0);
    for (std::size_t t = 0; t < n; ++t) {
        if (alpha[t] == 0.0) continue;
        const double c = alpha[t] * labels[t];
        for (std::size_t k = 0; k < d; ++k) model.weights[k] += c * X[t][k];
    }
    return model;
}

}  // namespace spoofbench
