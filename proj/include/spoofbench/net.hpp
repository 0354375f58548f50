#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "spoofbench/convops.hpp"
#include "spoofbench/errors.hpp"
#include "spoofbench/image.hpp"
#include "spoofbench/parallel.hpp"
#include "spoofbench/rng.hpp"

namespace spoofbench {

// Trainable two-conv-layer network with a softmax head over {real, fake}.
// Class index 0 = real, 1 = fake.
struct NetConfig {
    int input_size = 112;  // square crop fed to the network
    int in_bands = 1;
    LayerSpec layer1{16, 5, 3, 2, 2.0, false, 1};
    LayerSpec layer2{32, 5, 3, 2, 2.0, true, 5};
};

struct NetShapes {
    int c1_w = 0, c1_h = 0;
    int p1_w = 0, p1_h = 0;
    int n1_w = 0, n1_h = 0;  // after optional layer-1 norm (== p1 when off)
    int c2_w = 0, c2_h = 0;
    int p2_w = 0, p2_h = 0;
    int n2_w = 0, n2_h = 0;
    long feature_dim = 0;
};

inline NetShapes compute_net_shapes(const NetConfig& cfg) {
    NetShapes s;
    auto conv_dim = [](int d, int k) { return d - k + 1; };
    auto pool_dim = [](int d, int L, int st) {
        const int v = d - L + 1;
        return v < 1 ? 0 : (v - 1) / st + 1;
    };
    s.c1_w = conv_dim(cfg.input_size, cfg.layer1.filter_size);
    s.c1_h = s.c1_w;
    s.p1_w = pool_dim(s.c1_w, cfg.layer1.pool_size, cfg.layer1.pool_stride);
    s.p1_h = s.p1_w;
    s.n1_w = cfg.layer1.use_norm ? s.p1_w - cfg.layer1.norm_size + 1 : s.p1_w;
    s.n1_h = s.n1_w;
    s.c2_w = conv_dim(s.n1_w, cfg.layer2.filter_size);
    s.c2_h = s.c2_w;
    s.p2_w = pool_dim(s.c2_w, cfg.layer2.pool_size, cfg.layer2.pool_stride);
    s.p2_h = s.p2_w;
    s.n2_w = cfg.layer2.use_norm ? s.p2_w - cfg.layer2.norm_size + 1 : s.p2_w;
    s.n2_h = s.n2_w;
    if (s.c1_w < 1 || s.p1_w < 1 || s.n1_w < 1 || s.c2_w < 1 || s.p2_w < 1 || s.n2_w < 1)
        throw ShapeError("net: layer chain collapses below 1x1 for input size " +
                         std::to_string(cfg.input_size));
    s.feature_dim = static_cast<long>(s.n2_w) * s.n2_h * cfg.layer2.n_filters;
    return s;
}

struct TrainableNet {
    NetConfig cfg;
    NetShapes shapes;
    FilterBank conv1, conv2;
    std::vector<double> bias1, bias2;
    std::vector<double> fc_w;  // (class, feature)
    std::vector<double> fc_b;  // 2
    // Fixed per-feature affine conditioning between the conv stack and the
    // fully connected head (identity until fitted by train_net). Not a
    // trained parameter; stored with the model so scoring matches training.
    std::vector<double> feat_mean, feat_inv_std;

    long parameter_count() const {
        return static_cast<long>(conv1.weights.size()) + bias1.size() + conv2.weights.size() +
               bias2.size() + fc_w.size() + fc_b.size();
    }
};

// Zero-mean Gaussian init (std 0.01) for the convolutional filters, zero
// biases.  The classifier head starts at exactly zero: the initial output is
// then p = 0.5 for every input, and early training reduces to fitting the
// linear head on the (conditioned) features before any gradient reaches the
// filters, which keeps the filters from being scrambled by the large random
// gradients a random head would produce.
inline TrainableNet build_net(const NetConfig& cfg, std::uint64_t seed) {
    TrainableNet net;
    net.cfg = cfg;
    net.shapes = compute_net_shapes(cfg);
    net.conv1 = FilterBank(cfg.layer1.n_filters, cfg.layer1.filter_size, cfg.in_bands);
    net.conv2 = FilterBank(cfg.layer2.n_filters, cfg.layer2.filter_size, cfg.layer1.n_filters);
    net.bias1.assign(cfg.layer1.n_filters, 0.0);
    net.bias2.assign(cfg.layer2.n_filters, 0.0);
    net.fc_w.assign(2 * static_cast<std::size_t>(net.shapes.feature_dim), 0.0);
    net.fc_b.assign(2, 0.0);
    net.feat_mean.assign(static_cast<std::size_t>(net.shapes.feature_dim), 0.0);
    net.feat_inv_std.assign(static_cast<std::size_t>(net.shapes.feature_dim), 1.0);
    Rng rng(derive_seed(seed, 0x1417));
    const double std_dev = 0.01;
    for (double& w : net.conv1.weights) w = std_dev * rng.gaussian();
    for (double& w : net.conv2.weights) w = std_dev * rng.gaussian();
    return net;
}

// The spoofnet configuration: 16 first-layer filters, second layer stacked
// conv -> relu -> pool -> norm, 128x128 sources with 112x112 crops. The
// source_size parameter scales the geometry (e.g. 64 -> 56 crops).
inline TrainableNet build_spoofnet(int source_size = 128, int in_bands = 1,
                                   std::uint64_t seed = 0) {
    NetConfig cfg;
    cfg.input_size = source_size * 7 / 8;
    cfg.in_bands = in_bands;
    return build_net(cfg, seed);
}

inline int spoofnet_source_size(const TrainableNet& net) { return net.cfg.input_size * 8 / 7; }

// Four corner crops + center crop + their horizontal reflections.
inline std::vector<MultibandImage> augment(const MultibandImage& img, int crop_size) {
    if (img.width != img.height)
        throw ShapeError("augment: input must be square");
    const int margin = img.width - crop_size;
    if (margin < 0) throw ShapeError("augment: crop larger than input");
    const int offsets[5][2] = {
        {0, 0}, {margin, 0}, {0, margin}, {margin, margin}, {margin / 2, margin / 2}};
    std::vector<MultibandImage> out;
    out.reserve(10);
    for (const auto& off : offsets) {
        MultibandImage c = crop(img, off[0], off[1], crop_size, crop_size);
        out.push_back(c);
        out.push_back(mirror_horizontal(c));
    }
    return out;
}

inline MultibandImage center_crop(const MultibandImage& img, int crop_size) {
    if (img.width < crop_size || img.height < crop_size)
        throw ShapeError("center_crop: image smaller than crop");
    return crop(img, (img.width - crop_size) / 2, (img.height - crop_size) / 2, crop_size,
                crop_size);
}

// ---- forward/backward machinery ----------------------------------------

struct ForwardCache {
    MultibandImage input;
    MultibandImage c1_pre;  // conv1 + bias, before relu
    MultibandImage r1;      // after relu
    MultibandImage p1;      // after pool
    MultibandImage a1;      // after optional norm (layer-1 output)
    MultibandImage c2_pre;
    MultibandImage r2;
    MultibandImage p2;
    MultibandImage a2;           // features as an image
    std::vector<double> a2s;     // features after the fixed conditioning
    std::array<double, 2> logits{};
    std::array<double, 2> probs{};
};

inline MultibandImage add_bias(MultibandImage img, const std::vector<double>& bias) {
    const int m = img.bands;
    for (std::size_t p = 0; p < img.size(); p += m)
        for (int b = 0; b < m; ++b) img.data[p + b] += bias[b];
    return img;
}

inline ForwardCache net_forward(const TrainableNet& net, const MultibandImage& input) {
    if (input.width != net.cfg.input_size || input.height != net.cfg.input_size ||
        input.bands != net.cfg.in_bands)
        throw ShapeError("net_forward: expected " + std::to_string(net.cfg.input_size) + "x" +
                         std::to_string(net.cfg.input_size) + "x" +
                         std::to_string(net.cfg.in_bands) + " input");
    ForwardCache c;
    c.input = input;
    c.c1_pre = add_bias(convolve(input, net.conv1), net.bias1);
    c.r1 = relu(c.c1_pre);
    c.p1 = pool(c.r1, net.cfg.layer1.pool_size, net.cfg.layer1.pool_stride,
                net.cfg.layer1.pool_exponent);
    c.a1 = net.cfg.layer1.use_norm ? divnorm(c.p1, net.cfg.layer1.norm_size) : c.p1;
    c.c2_pre = add_bias(convolve(c.a1, net.conv2), net.bias2);
    c.r2 = relu(c.c2_pre);
    c.p2 = pool(c.r2, net.cfg.layer2.pool_size, net.cfg.layer2.pool_stride,
                net.cfg.layer2.pool_exponent);
    c.a2 = net.cfg.layer2.use_norm ? divnorm(c.p2, net.cfg.layer2.norm_size) : c.p2;

    const std::size_t F = c.a2.size();
    c.a2s.resize(F);
    for (std::size_t j = 0; j < F; ++j)
        c.a2s[j] = (c.a2.data[j] - net.feat_mean[j]) * net.feat_inv_std[j];
    for (int k = 0; k < 2; ++k) {
        double z = net.fc_b[k];
        const double* w = &net.fc_w[static_cast<std::size_t>(k) * F];
        for (std::size_t j = 0; j < F; ++j) z += w[j] * c.a2s[j];
        c.logits[k] = z;
    }
    const double zmax = std::max(c.logits[0], c.logits[1]);
    const double e0 = std::exp(c.logits[0] - zmax);
    const double e1 = std::exp(c.logits[1] - zmax);
    c.probs[0] = e0 / (e0 + e1);
    c.probs[1] = e1 / (e0 + e1);
    return c;
}

struct NetGrads {
    std::vector<double> conv1_w, bias1, conv2_w, bias2, fc_w, fc_b;

    static NetGrads zeros(const TrainableNet& net) {
        NetGrads g;
        g.conv1_w.assign(net.conv1.weights.size(), 0.0);
        g.bias1.assign(net.bias1.size(), 0.0);
        g.conv2_w.assign(net.conv2.weights.size(), 0.0);
        g.bias2.assign(net.bias2.size(), 0.0);
        g.fc_w.assign(net.fc_w.size(), 0.0);
        g.fc_b.assign(net.fc_b.size(), 0.0);
        return g;
    }

    void add(const NetGrads& o) {
        auto acc = [](std::vector<double>& a, const std::vector<double>& b) {
            for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
        };
        acc(conv1_w, o.conv1_w);
        acc(bias1, o.bias1);
        acc(conv2_w, o.conv2_w);
        acc(bias2, o.bias2);
        acc(fc_w, o.fc_w);
        acc(fc_b, o.fc_b);
    }

    void scale(double s) {
        for (auto* v : {&conv1_w, &bias1, &conv2_w, &bias2, &fc_w, &fc_b})
            for (double& x : *v) x *= s;
    }
};

namespace detail {

// grad wrt conv input and weights for the valid-region correlation.
inline void conv_backward(const MultibandImage& input, const FilterBank& bank,
                          const MultibandImage& gout, MultibandImage* gin,
                          std::vector<double>* gweights, std::vector<double>* gbias) {
    const int L = bank.size;
    const int n = bank.count;
    const int m = bank.in_bands;
    const int ow = gout.width, oh = gout.height;
    if (gin) *gin = MultibandImage(input.width, input.height, m);
    for (int y = 0; y < oh; ++y) {
        for (int x = 0; x < ow; ++x) {
            const double* go = &gout.data[(static_cast<std::size_t>(y) * ow + x) * n];
            for (int i = 0; i < n; ++i) {
                const double g = go[i];
                if (g == 0.0) continue;
                if (gbias) (*gbias)[i] += g;
                for (int dy = 0; dy < L; ++dy)
                    for (int dx = 0; dx < L; ++dx)
                        for (int b = 0; b < m; ++b) {
                            const double in_v = input.at(x + dx, y + dy, b);
                            if (gweights)
                                (*gweights)[((static_cast<std::size_t>(i) * L + dy) * L + dx) * m +
                                            b] += g * in_v;
                            if (gin)
                                gin->at(x + dx, y + dy, b) += g * bank.w(i, dy, dx, b);
                        }
            }
        }
    }
}

inline MultibandImage relu_backward(const MultibandImage& pre, const MultibandImage& gout) {
    MultibandImage gin = gout;
    for (std::size_t i = 0; i < gin.data.size(); ++i)
        if (pre.data[i] <= 0.0) gin.data[i] = 0.0;
    return gin;
}

// d/dJ_q of (sum J^alpha)^(1/alpha) = J_q^(alpha-1) * K^(1-alpha).
inline MultibandImage pool_backward(const MultibandImage& input, int window, int stride,
                                    double alpha, const MultibandImage& out,
                                    const MultibandImage& gout) {
    MultibandImage gin(input.width, input.height, input.bands);
    const int m = input.bands;
    for (int oy = 0; oy < out.height; ++oy) {
        const int y0 = oy * stride;
        for (int ox = 0; ox < out.width; ++ox) {
            const int x0 = ox * stride;
            for (int b = 0; b < m; ++b) {
                const double g = gout.at(ox, oy, b);
                if (g == 0.0) continue;
                const double K = out.at(ox, oy, b);
                if (K <= 0.0) continue;
                for (int dy = 0; dy < window; ++dy)
                    for (int dx = 0; dx < window; ++dx) {
                        const double J = input.at(x0 + dx, y0 + dy, b);
                        double dJ;
                        if (alpha == 1.0) dJ = 1.0;
                        else if (alpha == 2.0) dJ = J / K;
                        else dJ = pow_alpha(J, alpha - 1.0) * std::pow(K, 1.0 - alpha);
                        gin.at(x0 + dx, y0 + dy, b) += g * dJ;
                    }
            }
        }
    }
    return gin;
}

// Backward of O_i(p) = K_i(c(p)) / D(p), D = sqrt(sum_j sum_{q in C} K_j(q)^2 + eps).
inline MultibandImage divnorm_backward(const MultibandImage& input, int window,
                                       const MultibandImage& gout) {
    const int m = input.bands;
    const int ow = input.width - window + 1;
    const int oh = input.height - window + 1;
    const int r = (window - 1) / 2;
    MultibandImage gin(input.width, input.height, m);

    // Recompute denominators, plus per-output S(p) = sum_j gO_j K_j(center) / D^3.
    std::vector<double> energy(static_cast<std::size_t>(input.width) * input.height, 0.0);
    for (int y = 0; y < input.height; ++y)
        for (int x = 0; x < input.width; ++x) {
            double e = 0.0;
            for (int b = 0; b < m; ++b) {
                const double v = input.at(x, y, b);
                e += v * v;
            }
            energy[static_cast<std::size_t>(y) * input.width + x] = e;
        }
    for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
            double box = 0.0;
            for (int dy = 0; dy < window; ++dy)
                for (int dx = 0; dx < window; ++dx)
                    box += energy[static_cast<std::size_t>(oy + dy) * input.width + (ox + dx)];
            const double D = std::sqrt(box + kDivnormEpsilon);
            const double D3 = D * D * D;
            double S = 0.0;
            for (int b = 0; b < m; ++b)
                S += gout.at(ox, oy, b) * input.at(ox + r, oy + r, b);
            S /= D3;
            // Direct term: center pixel of this window.
            for (int b = 0; b < m; ++b)
                gin.at(ox + r, oy + r, b) += gout.at(ox, oy, b) / D;
            // Denominator term: every pixel in the window, every band.
            for (int dy = 0; dy < window; ++dy)
                for (int dx = 0; dx < window; ++dx)
                    for (int b = 0; b < m; ++b)
                        gin.at(ox + dx, oy + dy, b) -= S * input.at(ox + dx, oy + dy, b);
        }
    }
    return gin;
}

}  // namespace detail

// Gradients of the per-sample cross-entropy for one cached forward pass.
inline NetGrads net_backward(const TrainableNet& net, const ForwardCache& c, int label_fake) {
    NetGrads g = NetGrads::zeros(net);
    const std::size_t F = c.a2.size();

    std::array<double, 2> dlogits{c.probs[0], c.probs[1]};
    dlogits[label_fake ? 1 : 0] -= 1.0;

    MultibandImage ga2(c.a2.width, c.a2.height, c.a2.bands);
    for (int k = 0; k < 2; ++k) {
        const double dz = dlogits[k];
        g.fc_b[k] = dz;
        const double* w = &net.fc_w[static_cast<std::size_t>(k) * F];
        double* gw = &g.fc_w[static_cast<std::size_t>(k) * F];
        for (std::size_t j = 0; j < F; ++j) {
            gw[j] = dz * c.a2s[j];
            ga2.data[j] += dz * w[j];
        }
    }
    for (std::size_t j = 0; j < F; ++j) ga2.data[j] *= net.feat_inv_std[j];

    MultibandImage gp2 = net.cfg.layer2.use_norm
                             ? detail::divnorm_backward(c.p2, net.cfg.layer2.norm_size, ga2)
                             : ga2;
    MultibandImage gr2 = detail::pool_backward(c.r2, net.cfg.layer2.pool_size,
                                               net.cfg.layer2.pool_stride,
                                               net.cfg.layer2.pool_exponent, c.p2, gp2);
    MultibandImage gc2 = detail::relu_backward(c.c2_pre, gr2);
    MultibandImage ga1;
    detail::conv_backward(c.a1, net.conv2, gc2, &ga1, &g.conv2_w, &g.bias2);

    MultibandImage gp1 = net.cfg.layer1.use_norm
                             ? detail::divnorm_backward(c.p1, net.cfg.layer1.norm_size, ga1)
                             : ga1;
    MultibandImage gr1 = detail::pool_backward(c.r1, net.cfg.layer1.pool_size,
                                               net.cfg.layer1.pool_stride,
                                               net.cfg.layer1.pool_exponent, c.p1, gp1);
    MultibandImage gc1 = detail::relu_backward(c.c1_pre, gr1);
    detail::conv_backward(c.input, net.conv1, gc1, nullptr, &g.conv1_w, &g.bias1);
    return g;
}

struct LabeledCrop {
    MultibandImage image;
    int label_fake = 0;  // 0 real, 1 fake
    int batch = 0;       // 0..3
};

// Mean cross-entropy over a batch of crops.
inline double forward_loss(const TrainableNet& net, const std::vector<LabeledCrop>& batch,
                           std::vector<std::array<double, 2>>* probs_out = nullptr) {
    if (batch.empty()) throw std::invalid_argument("forward_loss: empty batch");
    double loss = 0.0;
    if (probs_out) probs_out->resize(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const ForwardCache c = net_forward(net, batch[i].image);
        loss += -std::log(std::max(c.probs[batch[i].label_fake], 1e-300));
        if (probs_out) (*probs_out)[i] = c.probs;
    }
    return loss / static_cast<double>(batch.size());
}

// ---- training schedule ---------------------------------------------------

struct TrainingPhase {
    int epochs = 0;
    double learning_rate = 0.0;
    bool first_three_batches_only = false;
};

struct TrainingSchedule {
    std::vector<TrainingPhase> phases;

    // (200, 80, 20, 20) epochs at (1e-4, 1e-4, 1e-5, 1e-6).
    static TrainingSchedule spoofnet() {
        return {{{200, 1e-4, true}, {80, 1e-4, false}, {20, 1e-5, false}, {20, 1e-6, false}}};
    }
    // Reference schedule: (100, 40, 10, 10) at (1e-3, 1e-3, 1e-4, 1e-5).
    static TrainingSchedule cf10() {
        return {{{100, 1e-3, true}, {40, 1e-3, false}, {10, 1e-4, false}, {10, 1e-5, false}}};
    }

    // Desk-scale variant: epochs divided (rounded up, min 1), rates scaled.
    TrainingSchedule scaled(int epoch_div, double lr_mult) const {
        TrainingSchedule s = *this;
        for (auto& p : s.phases) {
            p.epochs = std::max(1, (p.epochs + epoch_div - 1) / epoch_div);
            p.learning_rate *= lr_mult;
        }
        return s;
    }
};

struct EpochLogEntry {
    int epoch = 0;  // global epoch counter across phases
    int phase = 0;  // 1-based
    double learning_rate = 0.0;
    double train_loss = 0.0;
    double val_acc = -1.0;  // batch-4 accuracy, logged in phase 1 only
};

// Splits sample indices into four batches preserving the real/fake balance:
// a seeded shuffle within each class, then round-robin dealing.
inline std::vector<int> make_batch_split(const std::vector<int>& labels_fake,
                                         std::uint64_t seed) {
    std::vector<std::size_t> reals, fakes;
    for (std::size_t i = 0; i < labels_fake.size(); ++i)
        (labels_fake[i] ? fakes : reals).push_back(i);
    Rng rng(derive_seed(seed, 0xba7c));
    shuffle(reals, rng);
    shuffle(fakes, rng);
    std::vector<int> batch(labels_fake.size(), 0);
    for (std::size_t i = 0; i < reals.size(); ++i) batch[reals[i]] = static_cast<int>(i % 4);
    for (std::size_t i = 0; i < fakes.size(); ++i) batch[fakes[i]] = static_cast<int>(i % 4);
    return batch;
}

constexpr int kMiniBatchSize = 32;

// Per-group learning-rate scales. The fully connected head solves a convex
// problem on unit-variance conditioned features and tolerates a much larger
// step than the filter stack, whose gradients pass back through the feature
// conditioning (a gain of ~1/std per feature) and would otherwise scramble
// the filters before the head converges.
constexpr double kHeadLrScale = 10.0;
constexpr double kFilterLrScale = 1e-4;

// Four-phase mini-batch SGD. Per-sample gradients inside a mini-batch may be
// computed on a worker pool; they are summed in sample order, so results do
// not depend on the worker count.
inline std::vector<EpochLogEntry> train_net(
    TrainableNet& net, const std::vector<LabeledCrop>& samples, const TrainingSchedule& schedule,
    std::uint64_t seed, unsigned workers = 1,
    const std::function<void(const EpochLogEntry&)>& on_epoch = nullptr) {
    if (samples.empty()) throw std::invalid_argument("train_net: empty sample set");
    for (int b = 0; b < 4; ++b) {
        bool any = false;
        for (const auto& s : samples)
            if (s.batch == b) { any = true; break; }
        if (!any) throw std::invalid_argument("train_net: batch " + std::to_string(b + 1) +
                                              " is empty");
    }

    // Fit the fixed per-feature conditioning on the training crops at the
    // initial weights. It preconditions the fully connected head; without it
    // the nearly collinear non-negative feature vectors make SGD on the
    // softmax head impractically slow.
    {
        const std::size_t F = static_cast<std::size_t>(net.shapes.feature_dim);
        net.feat_mean.assign(F, 0.0);
        net.feat_inv_std.assign(F, 1.0);
        std::vector<std::vector<double>> feats(samples.size());
        parallel_for(samples.size(), workers, [&](std::size_t i) {
            feats[i] = net_forward(net, samples[i].image).a2.data;
        });
        std::vector<double> mean(F, 0.0), var(F, 0.0);
        for (const auto& f : feats)
            for (std::size_t j = 0; j < F; ++j) mean[j] += f[j];
        for (double& m : mean) m /= static_cast<double>(feats.size());
        for (const auto& f : feats)
            for (std::size_t j = 0; j < F; ++j) {
                const double cdev = f[j] - mean[j];
                var[j] += cdev * cdev;
            }
        double var_sum = 0.0;
        for (std::size_t j = 0; j < F; ++j) {
            var[j] /= static_cast<double>(feats.size());
            var_sum += var[j];
        }
        // Near-constant features carry no class signal; flooring their
        // variance at 1% of the average keeps their amplification bounded
        // instead of letting 1/sqrt(v) blow up.
        const double floor = 0.01 * var_sum / static_cast<double>(F);
        for (std::size_t j = 0; j < F; ++j) {
            const double v = std::max(var[j], floor);
            net.feat_mean[j] = mean[j];
            net.feat_inv_std[j] = v > 1e-24 ? 1.0 / std::sqrt(v) : 1.0;
        }
    }

    std::vector<std::size_t> train_pool, val_pool;
    std::vector<EpochLogEntry> log;
    int global_epoch = 0;
    for (std::size_t phase_i = 0; phase_i < schedule.phases.size(); ++phase_i) {
        const TrainingPhase& phase = schedule.phases[phase_i];
        train_pool.clear();
        val_pool.clear();
        for (std::size_t i = 0; i < samples.size(); ++i) {
            if (phase.first_three_batches_only && samples[i].batch == 3) val_pool.push_back(i);
            else train_pool.push_back(i);
        }

        for (int e = 0; e < phase.epochs; ++e) {
            ++global_epoch;
            std::vector<std::size_t> order = train_pool;
            Rng rng(derive_seed(seed, 0xe90c, static_cast<std::uint64_t>(global_epoch)));
            shuffle(order, rng);

            double epoch_loss = 0.0;
            std::size_t seen = 0;
            for (std::size_t start = 0; start < order.size(); start += kMiniBatchSize) {
                const std::size_t count = std::min<std::size_t>(kMiniBatchSize,
                                                                order.size() - start);
                std::vector<NetGrads> per_sample(count);
                std::vector<double> losses(count, 0.0);
                parallel_for(count, workers, [&](std::size_t k) {
                    const LabeledCrop& s = samples[order[start + k]];
                    const ForwardCache c = net_forward(net, s.image);
                    losses[k] = -std::log(std::max(c.probs[s.label_fake], 1e-300));
                    per_sample[k] = net_backward(net, c, s.label_fake);
                });
                NetGrads grads = NetGrads::zeros(net);
                for (std::size_t k = 0; k < count; ++k) {
                    grads.add(per_sample[k]);
                    epoch_loss += losses[k];
                }
                grads.scale(1.0 / static_cast<double>(count));
                ++seen;

                auto step = [](double lr, std::vector<double>& w,
                               const std::vector<double>& g) {
                    for (std::size_t i = 0; i < w.size(); ++i) w[i] -= lr * g[i];
                };
                const double filter_lr = phase.learning_rate * kFilterLrScale;
                const double head_lr = phase.learning_rate * kHeadLrScale;
                step(filter_lr, net.conv1.weights, grads.conv1_w);
                step(filter_lr, net.bias1, grads.bias1);
                step(filter_lr, net.conv2.weights, grads.conv2_w);
                step(filter_lr, net.bias2, grads.bias2);
                step(head_lr, net.fc_w, grads.fc_w);
                step(head_lr, net.fc_b, grads.fc_b);
            }

            EpochLogEntry entry;
            entry.epoch = global_epoch;
            entry.phase = static_cast<int>(phase_i) + 1;
            entry.learning_rate = phase.learning_rate;
            entry.train_loss = epoch_loss / static_cast<double>(order.size());
            if (phase.first_three_batches_only && !val_pool.empty()) {
                std::vector<int> hits(val_pool.size(), 0);
                parallel_for(val_pool.size(), workers, [&](std::size_t k) {
                    const LabeledCrop& s = samples[val_pool[k]];
                    const ForwardCache c = net_forward(net, s.image);
                    hits[k] = (c.probs[1] > 0.5) == (s.label_fake == 1) ? 1 : 0;
                });
                long correct = 0;
                for (int h : hits) correct += h;
                entry.val_acc = static_cast<double>(correct) / val_pool.size();
            }
            log.push_back(entry);
            if (on_epoch) on_epoch(entry);
            (void)seen;
        }
    }
    return log;
}

// Probability of the fake class from the single central crop of a
// source-sized (e.g. 128x128) image.
inline double predict_prob(const TrainableNet& net, const MultibandImage& source) {
    const int S = spoofnet_source_size(net);
    if (source.width != S || source.height != S)
        throw ShapeError("predict_prob: expected " + std::to_string(S) + "x" + std::to_string(S) +
                         " source image");
    const ForwardCache c = net_forward(net, center_crop(source, net.cfg.input_size));
    return c.probs[1];
}

}  // namespace spoofbench
