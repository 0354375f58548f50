#pragma once

#include <stdexcept>
#include <string>

namespace spoofbench {

// Shape mismatches between images, filters, and layer chains.
struct ShapeError : std::runtime_error {
    explicit ShapeError(const std::string& what) : std::runtime_error(what) {}
};

// Image formats the loaders refuse to handle.
struct UnsupportedFormatError : std::runtime_error {
    explicit UnsupportedFormatError(const std::string& what) : std::runtime_error(what) {}
};

// Training or threshold selection with only one class present.
struct DegenerateLabelsError : std::runtime_error {
    explicit DegenerateLabelsError(const std::string& what) : std::runtime_error(what) {}
};

// Manifest records violating integrity rules (duplicate paths, mixed-label groups).
struct ManifestError : std::runtime_error {
    explicit ManifestError(const std::string& what) : std::runtime_error(what) {}
};

// Malformed files (manifest lines, model containers, image headers).
struct ParseError : std::runtime_error {
    explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

struct IoError : std::runtime_error {
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace spoofbench
