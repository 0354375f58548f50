#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "spoofbench/errors.hpp"
#include "spoofbench/image.hpp"
#include "spoofbench/manifest.hpp"
#include "spoofbench/rng.hpp"

namespace spoofbench {

// Parameters of the synthetic recapture benchmark. Real samples carry a
// per-individual texture plus high-frequency micro-texture; fakes are the
// same samples after Gaussian blur, recapture noise, and contrast jitter,
// so the discriminative cue is the loss of high-frequency content.
struct SynthParams {
    int individuals = 20;
    int samples_per_individual = 10;  // real/fake pairs per individual
    int image_size = 64;
    double blur_sigma = 1.5;
    double noise_std = 0.01;
    double contrast_jitter = 0.0;
    double train_fraction = 0.5;  // fraction of individuals in the train split
    double dev_fraction = 0.0;    // optional dev split, also individual-disjoint
    std::uint64_t seed = 0;
};

inline MultibandImage gaussian_blur(const MultibandImage& img, double sigma) {
    if (sigma <= 0.0) return img;
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> kernel(2 * radius + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        kernel[i + radius] = std::exp(-0.5 * (i * i) / (sigma * sigma));
        sum += kernel[i + radius];
    }
    for (double& k : kernel) k /= sum;

    auto reflect = [](int i, int n) {
        while (i < 0 || i >= n) {
            if (i < 0) i = -i - 1;
            if (i >= n) i = 2 * n - i - 1;
        }
        return i;
    };

    MultibandImage tmp(img.width, img.height, img.bands);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int b = 0; b < img.bands; ++b) {
                double v = 0.0;
                for (int i = -radius; i <= radius; ++i)
                    v += kernel[i + radius] * img.at(reflect(x + i, img.width), y, b);
                tmp.at(x, y, b) = v;
            }
    MultibandImage out(img.width, img.height, img.bands);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int b = 0; b < img.bands; ++b) {
                double v = 0.0;
                for (int i = -radius; i <= radius; ++i)
                    v += kernel[i + radius] * tmp.at(x, reflect(y + i, img.height), b);
                out.at(x, y, b) = v;
            }
    return out;
}

namespace detail {

inline MultibandImage noise_image(int size, Rng& rng) {
    MultibandImage img(size, size, 1);
    for (double& v : img.data) v = rng.u01();
    return img;
}

inline void clamp01(MultibandImage& img) {
    for (double& v : img.data) v = std::clamp(v, 0.0, 1.0);
}

}  // namespace detail

struct SynthOutput {
    BenchmarkManifest manifest;
};

// Generates the benchmark under out_dir: PGM images plus manifest.jsonl.
// Individual-disjoint splits; real/fake pairs share individual and sample
// index. Fully deterministic for a fixed seed (individuals use derived
// seeds, so they could be produced in any order).
inline SynthOutput generate_synthetic_benchmark(const SynthParams& params,
                                                const std::string& out_dir) {
    if (params.individuals < 1 || params.samples_per_individual < 1 || params.image_size < 16)
        throw std::invalid_argument("generate_synthetic_benchmark: invalid parameters");
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create output directory: " + out_dir);

    // Individual-disjoint split boundaries over a seeded shuffle.
    std::vector<int> order(params.individuals);
    for (int i = 0; i < params.individuals; ++i) order[i] = i;
    Rng split_rng(derive_seed(params.seed, 0x59717));
    shuffle(order, split_rng);
    const int n_train = std::max(1, static_cast<int>(std::lround(params.train_fraction *
                                                                 params.individuals)));
    const int n_dev = static_cast<int>(std::lround(params.dev_fraction * params.individuals));
    std::vector<std::string> split_of(params.individuals);
    for (int i = 0; i < params.individuals; ++i) {
        if (i < n_train) split_of[order[i]] = "train";
        else if (i < n_train + n_dev) split_of[order[i]] = "dev";
        else split_of[order[i]] = "test";
    }

    SynthOutput out;
    const int S = params.image_size;
    char buf[64];
    for (int ind = 0; ind < params.individuals; ++ind) {
        Rng rng(derive_seed(params.seed, 0x1d, static_cast<std::uint64_t>(ind)));
        // Band-limited base texture shared by all samples of the individual.
        MultibandImage base = gaussian_blur(detail::noise_image(S, rng), 3.0);
        // Stretch toward mid-gray contrast.
        double mn = 1.0, mx = 0.0;
        for (double v : base.data) { mn = std::min(mn, v); mx = std::max(mx, v); }
        const double span = mx - mn > 1e-12 ? mx - mn : 1.0;
        for (double& v : base.data) v = 0.25 + 0.5 * (v - mn) / span;

        std::snprintf(buf, sizeof buf, "subj_%03d", ind);
        const std::string individual_id = buf;
        for (int s = 0; s < params.samples_per_individual; ++s) {
            // Fresh high-frequency micro-texture plus mild sensor noise.
            MultibandImage real = base;
            for (double& v : real.data) v += 0.15 * (rng.u01() - 0.5) + 0.01 * rng.gaussian();
            detail::clamp01(real);

            MultibandImage fake = gaussian_blur(real, params.blur_sigma);
            double contrast = 1.0;
            if (params.contrast_jitter > 0.0)
                contrast = 1.0 + params.contrast_jitter * (2.0 * rng.u01() - 1.0);
            for (double& v : fake.data) {
                v = 0.5 + (v - 0.5) * contrast;
                if (params.noise_std > 0.0) v += params.noise_std * rng.gaussian();
            }
            detail::clamp01(fake);

            for (int is_fake = 0; is_fake < 2; ++is_fake) {
                std::snprintf(buf, sizeof buf, "%s_%02d_%s.pgm", individual_id.c_str(), s,
                              is_fake ? "fake" : "real");
                const std::string filename = buf;
                const std::string path =
                    (std::filesystem::path(out_dir) / filename).string();
                save_pnm(is_fake ? fake : real, path);
                SampleRecord rec;
                rec.path = path;
                rec.is_fake = is_fake == 1;
                rec.individual_id = individual_id;
                rec.attack_type = is_fake ? "recapture" : "";
                rec.split = split_of[ind];
                rec.group_id = filename;
                out.manifest.records.push_back(std::move(rec));
            }
        }
    }
    check_manifest(out.manifest);
    save_manifest(out.manifest,
                  (std::filesystem::path(out_dir) / "manifest.jsonl").string());
    return out;
}

}  // namespace spoofbench
