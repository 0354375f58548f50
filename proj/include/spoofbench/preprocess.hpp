#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "spoofbench/errors.hpp"
#include "spoofbench/image.hpp"

namespace spoofbench {

// Per-sensor central-crop rule. Swipe additionally trims blank bottom rows
// and rescales to a common row count before cropping.
struct SensorRule {
    std::string name;
    double frac_cols = 1.0;
    double frac_rows = 1.0;
    bool swipe_rows = false;
};

inline SensorRule sensor_rule(const std::string& sensor) {
    if (sensor == "biometrika") return {"biometrika", 0.70, 0.70, false};
    if (sensor == "italdata") return {"italdata", 0.60, 0.90, false};
    if (sensor == "crossmatch") return {"crossmatch", 0.60, 0.90, false};
    if (sensor == "swipe") return {"swipe", 0.90, 1.0, true};
    throw ConfigError("unknown sensor: " + sensor);
}

constexpr double kBlankThreshold = 1.0 / 255.0;  // a row is blank if all values fall below

inline int count_non_blank_rows(const MultibandImage& img) {
    int count = 0;
    for (int y = 0; y < img.height; ++y) {
        bool blank = true;
        for (int x = 0; x < img.width && blank; ++x)
            for (int b = 0; b < img.bands; ++b)
                if (img.at(x, y, b) >= kBlankThreshold) {
                    blank = false;
                    break;
                }
        if (!blank) ++count;
    }
    return count;
}

// Average non-blank row count over the training images, rounded half-up.
// All-blank images are excluded from the mean.
inline int compute_swipe_rows(const std::vector<MultibandImage>& training_images) {
    if (training_images.empty())
        throw std::invalid_argument("compute_swipe_rows: empty training set");
    double sum = 0.0;
    long used = 0;
    for (const auto& img : training_images) {
        const int rows = count_non_blank_rows(img);
        if (rows == 0) continue;  // flagged and excluded
        sum += rows;
        ++used;
    }
    if (used == 0) throw std::invalid_argument("compute_swipe_rows: all images blank");
    return static_cast<int>(std::floor(sum / used + 0.5));
}

// Removes blank rows at the bottom (rows after the last non-blank one) and
// rescales to the given row count.
inline MultibandImage normalize_swipe_rows(const MultibandImage& img, int target_rows) {
    int last = -1;
    for (int y = img.height - 1; y >= 0 && last < 0; --y) {
        for (int x = 0; x < img.width && last < 0; ++x)
            for (int b = 0; b < img.bands; ++b)
                if (img.at(x, y, b) >= kBlankThreshold) {
                    last = y;
                    break;
                }
    }
    if (last < 0) throw std::invalid_argument("normalize_swipe_rows: blank image");
    MultibandImage trimmed = last + 1 == img.height ? img : crop(img, 0, 0, img.width, last + 1);
    return resize_exact(trimmed, img.width, target_rows);
}

// swipe_rows: the precomputed M for the swipe sensor, ignored otherwise.
inline MultibandImage preprocess_fingerprint(const MultibandImage& img, const SensorRule& rule,
                                             int swipe_rows = 0) {
    if (rule.swipe_rows) {
        if (swipe_rows < 1)
            throw ConfigError("preprocess_fingerprint: swipe rule requires computed row count");
        const MultibandImage normalized = normalize_swipe_rows(img, swipe_rows);
        return crop_center_fraction(normalized, rule.frac_cols, 1.0);
    }
    return crop_center_fraction(img, rule.frac_cols, rule.frac_rows);
}

struct FaceBox {
    int center_x = 0;
    int center_y = 0;
};

constexpr int kFaceCropSize = 200;

// Evenly subsamples 10 frames (indices round(i*(N-1)/9)) and crops 200x200
// around the supplied box center, falling back to the image center. Boxes
// are clamped so the crop stays inside the frame.
inline std::vector<MultibandImage> preprocess_face_video(
    const std::vector<MultibandImage>& frames,
    const std::vector<std::optional<FaceBox>>& boxes = {}) {
    if (frames.size() < 10)
        throw std::invalid_argument("preprocess_face_video: need at least 10 frames");
    if (!boxes.empty() && boxes.size() != frames.size())
        throw std::invalid_argument("preprocess_face_video: box count mismatch");

    std::vector<MultibandImage> out;
    out.reserve(10);
    const std::size_t n = frames.size();
    for (int i = 0; i < 10; ++i) {
        const std::size_t idx = static_cast<std::size_t>(
            std::floor(static_cast<double>(i) * (n - 1) / 9.0 + 0.5));
        const MultibandImage& frame = frames[idx];
        if (frame.width < kFaceCropSize || frame.height < kFaceCropSize)
            throw ShapeError("preprocess_face_video: frame smaller than 200x200");
        int cx = frame.width / 2;
        int cy = frame.height / 2;
        if (!boxes.empty() && boxes[idx]) {
            cx = boxes[idx]->center_x;
            cy = boxes[idx]->center_y;
        }
        int x0 = cx - kFaceCropSize / 2;
        int y0 = cy - kFaceCropSize / 2;
        x0 = std::clamp(x0, 0, frame.width - kFaceCropSize);
        y0 = std::clamp(y0, 0, frame.height - kFaceCropSize);
        out.push_back(crop(frame, x0, y0, kFaceCropSize, kFaceCropSize));
    }
    return out;
}

}  // namespace spoofbench
