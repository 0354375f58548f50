#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "spoofbench/errors.hpp"
#include "spoofbench/image.hpp"

namespace spoofbench {

// Bank of n multiband filters of spatial size L x L over m input bands.
// Weight layout: (filter, dy, dx, band).
struct FilterBank {
    int count = 0;
    int size = 0;
    int in_bands = 0;
    std::vector<double> weights;

    FilterBank() = default;
    FilterBank(int n, int L, int m)
        : count(n), size(L), in_bands(m),
          weights(static_cast<std::size_t>(n) * L * L * m, 0.0) {
        if (L < 1 || L % 2 == 0) throw std::invalid_argument("FilterBank: size must be odd");
    }

    double& w(int filter, int dy, int dx, int band) {
        return weights[((static_cast<std::size_t>(filter) * size + dy) * size + dx) * in_bands +
                       band];
    }
    double w(int filter, int dy, int dx, int band) const {
        return weights[((static_cast<std::size_t>(filter) * size + dy) * size + dx) * in_bands +
                       band];
    }
};

// Hyperparameters of a single layer: conv -> activation -> pooling ->
// optional divisive normalization.
struct LayerSpec {
    int n_filters = 1;
    int filter_size = 3;
    int pool_size = 1;
    int pool_stride = 1;
    double pool_exponent = 1.0;
    bool use_norm = false;
    int norm_size = 1;
};

// Valid-region correlation: out(x, y, i) = sum over the L x L window of the
// input attribute vectors dotted with filter i. No kernel flip, no padding.
inline MultibandImage convolve(const MultibandImage& img, const FilterBank& bank) {
    if (img.bands != bank.in_bands)
        throw ShapeError("convolve: image bands (" + std::to_string(img.bands) +
                         ") != filter bands (" + std::to_string(bank.in_bands) + ")");
    const int L = bank.size;
    if (img.width < L || img.height < L)
        throw ShapeError("convolve: image smaller than filter window");

    const int ow = img.width - L + 1;
    const int oh = img.height - L + 1;
    const int n = bank.count;
    const int m = img.bands;
    MultibandImage out(ow, oh, n);

    // Weights transposed to (dy, dx, band, filter) so the inner accumulation
    // runs contiguously over filters.
    std::vector<double> wt(static_cast<std::size_t>(L) * L * m * n);
    for (int i = 0; i < n; ++i)
        for (int dy = 0; dy < L; ++dy)
            for (int dx = 0; dx < L; ++dx)
                for (int b = 0; b < m; ++b)
                    wt[((static_cast<std::size_t>(dy) * L + dx) * m + b) * n + i] =
                        bank.w(i, dy, dx, b);

    // Outputs are tiled over pixels and filters so the weight array streams
    // through cache once per output row while the accumulator tile stays in
    // L1. The per-output accumulation order (dy outer, then dx/band) is the
    // same as the naive triple loop, so results are bit-identical to it.
    constexpr int kPixelTile = 64;
    constexpr int kFilterTile = 32;
    const int row_elems = L * m;
    std::vector<double> acc(static_cast<std::size_t>(kPixelTile) * kFilterTile);
    for (int y = 0; y < oh; ++y) {
        for (int x0 = 0; x0 < ow; x0 += kPixelTile) {
            const int xb = std::min(kPixelTile, ow - x0);
            for (int i0 = 0; i0 < n; i0 += kFilterTile) {
                const int ib = std::min(kFilterTile, n - i0);
                std::fill(acc.begin(), acc.begin() + static_cast<std::size_t>(xb) * ib, 0.0);
                for (int dy = 0; dy < L; ++dy) {
                    const double* in_row =
                        &img.data[(static_cast<std::size_t>(y + dy) * img.width + x0) * m];
                    const double* w_dy = &wt[static_cast<std::size_t>(dy) * L * m * n];
                    for (int e = 0; e < row_elems; ++e) {
                        const double* w = w_dy + static_cast<std::size_t>(e) * n + i0;
                        for (int b = 0; b < xb; ++b) {
                            const double v = in_row[static_cast<std::size_t>(b) * m + e];
                            double* a = &acc[static_cast<std::size_t>(b) * ib];
                            for (int j = 0; j < ib; ++j) a[j] += v * w[j];
                        }
                    }
                }
                for (int b = 0; b < xb; ++b) {
                    double* o = &out.data[(static_cast<std::size_t>(y) * ow + x0 + b) * n + i0];
                    const double* a = &acc[static_cast<std::size_t>(b) * ib];
                    for (int j = 0; j < ib; ++j) o[j] = a[j];
                }
            }
        }
    }
    return out;
}

inline MultibandImage relu(const MultibandImage& img) {
    MultibandImage out = img;
    for (double& v : out.data) v = v > 0.0 ? v : 0.0;
    return out;
}

namespace detail {
inline double pow_alpha(double v, double alpha) {
    // The search grid only uses small integer exponents; take the fast path.
    if (alpha == 1.0) return v;
    if (alpha == 2.0) return v * v;
    const long ia = static_cast<long>(alpha);
    if (static_cast<double>(ia) == alpha && ia > 0 && ia <= 64) {
        double r = 1.0, b = v;
        long e = ia;
        while (e > 0) {
            if (e & 1) r *= b;
            b *= b;
            e >>= 1;
        }
        return r;
    }
    return std::pow(v, alpha);
}
}  // namespace detail

// L-alpha pooling over L_B x L_B windows, subsampled with stride s from the
// first valid window position. Bands are pooled independently.
inline MultibandImage pool(const MultibandImage& img, int window, int stride, double alpha) {
    if (window < 1 || window % 2 == 0) throw std::invalid_argument("pool: window must be odd");
    if (stride < 1) throw std::invalid_argument("pool: stride must be >= 1");
    if (alpha < 1.0) throw std::invalid_argument("pool: exponent must be >= 1");
    const int valid_w = img.width - window + 1;
    const int valid_h = img.height - window + 1;
    if (valid_w < 1 || valid_h < 1) throw ShapeError("pool: empty output grid");

    const int ow = (valid_w - 1) / stride + 1;
    const int oh = (valid_h - 1) / stride + 1;
    const int m = img.bands;
    const double inv_alpha = 1.0 / alpha;

    // Separable evaluation: raise to alpha once, sum horizontally per row,
    // then sum those row sums vertically (2L adds per output instead of L^2).
    // All terms are non-negative, so the regrouping is numerically benign.
    std::vector<double> powered(img.data.size());
    for (std::size_t t = 0; t < img.data.size(); ++t)
        powered[t] = detail::pow_alpha(img.data[t], alpha);

    std::vector<double> row_sums(static_cast<std::size_t>(valid_w) * img.height * m, 0.0);
    for (int y = 0; y < img.height; ++y) {
        const double* prow = &powered[static_cast<std::size_t>(y) * img.width * m];
        double* rrow = &row_sums[static_cast<std::size_t>(y) * valid_w * m];
        for (int x = 0; x < valid_w; ++x)
            for (int b = 0; b < m; ++b) {
                double sum = 0.0;
                for (int dx = 0; dx < window; ++dx)
                    sum += prow[static_cast<std::size_t>(x + dx) * m + b];
                rrow[static_cast<std::size_t>(x) * m + b] = sum;
            }
    }

    MultibandImage out(ow, oh, m);
    for (int oy = 0; oy < oh; ++oy) {
        const int y0 = oy * stride;
        for (int ox = 0; ox < ow; ++ox) {
            const int x0 = ox * stride;
            for (int b = 0; b < m; ++b) {
                double sum = 0.0;
                for (int dy = 0; dy < window; ++dy)
                    sum += row_sums[(static_cast<std::size_t>(y0 + dy) * valid_w + x0) * m + b];
                out.at(ox, oy, b) =
                    alpha == 1.0 ? sum : (alpha == 2.0 ? std::sqrt(sum) : std::pow(sum, inv_alpha));
            }
        }
    }
    return out;
}

constexpr double kDivnormEpsilon = 1e-8;  // guards blank regions in Eq. 4's denominator

// Divisive normalization: each value divided by the local cross-band energy
// over an L_C x L_C window, valid region only.
inline MultibandImage divnorm(const MultibandImage& img, int window) {
    if (window < 1 || window % 2 == 0) throw std::invalid_argument("divnorm: window must be odd");
    const int ow = img.width - window + 1;
    const int oh = img.height - window + 1;
    if (ow < 1 || oh < 1) throw ShapeError("divnorm: empty output grid");
    const int m = img.bands;
    const int r = (window - 1) / 2;

    // Per-pixel cross-band energy, then a box sum per output position.
    std::vector<double> energy(static_cast<std::size_t>(img.width) * img.height, 0.0);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            double e = 0.0;
            for (int b = 0; b < m; ++b) {
                const double v = img.at(x, y, b);
                e += v * v;
            }
            energy[static_cast<std::size_t>(y) * img.width + x] = e;
        }

    MultibandImage out(ow, oh, m);
    for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
            double sum = 0.0;
            for (int dy = 0; dy < window; ++dy)
                for (int dx = 0; dx < window; ++dx)
                    sum += energy[static_cast<std::size_t>(oy + dy) * img.width + (ox + dx)];
            const double denom = std::sqrt(sum + kDivnormEpsilon);
            for (int b = 0; b < m; ++b) out.at(ox, oy, b) = img.at(ox + r, oy + r, b) / denom;
        }
    }
    return out;
}

// Per-image standardization used as an optional network-level input step.
inline MultibandImage standardize_image(const MultibandImage& img) {
    double mean = 0.0;
    for (double v : img.data) mean += v;
    mean /= static_cast<double>(img.size());
    double var = 0.0;
    for (double v : img.data) var += (v - mean) * (v - mean);
    var /= static_cast<double>(img.size());
    const double inv = 1.0 / std::sqrt(var + 1e-12);
    MultibandImage out = img;
    for (double& v : out.data) v = (v - mean) * inv;
    return out;
}

struct FilterSet {
    std::vector<FilterBank> banks;  // one per layer
};

// Full forward pass: per layer, conv -> relu -> pool -> optional divnorm,
// then flatten of the final multiband image.
inline MultibandImage forward_image(const MultibandImage& img, const std::vector<LayerSpec>& layers,
                                    const FilterSet& filters) {
    if (layers.empty() || layers.size() > 3)
        throw std::invalid_argument("forward: layer count must be in {1,2,3}");
    if (filters.banks.size() != layers.size())
        throw ShapeError("forward: filter set size does not match layer count");
    MultibandImage cur = img;
    for (std::size_t li = 0; li < layers.size(); ++li) {
        const LayerSpec& ls = layers[li];
        try {
            cur = convolve(cur, filters.banks[li]);
            cur = relu(cur);
            cur = pool(cur, ls.pool_size, ls.pool_stride, ls.pool_exponent);
            if (ls.use_norm) cur = divnorm(cur, ls.norm_size);
        } catch (const ShapeError& e) {
            throw ShapeError("forward: layer " + std::to_string(li + 1) + ": " + e.what());
        }
    }
    return cur;
}

inline FeatureVector forward(const MultibandImage& img, const std::vector<LayerSpec>& layers,
                             const FilterSet& filters) {
    return flatten(forward_image(img, layers, filters));
}

}  // namespace spoofbench
