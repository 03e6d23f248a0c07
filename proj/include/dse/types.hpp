#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace dse {

using Scalar = double;

// Thrown when input data violates a documented invariant (duplicate ids,
// malformed records, unresolvable references).
struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Thrown on filesystem / decode failures.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Thrown when a binary file fails its header or length checks.
struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Thrown when configuration parameters are inconsistent.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Row-major intensity image, values in [0, 255].
struct PixelGrid {
    int height = 0;
    int width = 0;
    int channels = 1;  // 1 or 3
    std::vector<std::uint8_t> data;

    PixelGrid() = default;
    PixelGrid(int h, int w, int c = 1, std::uint8_t fill = 0)
        : height(h), width(w), channels(c),
          data(static_cast<std::size_t>(h) * w * c, fill) {
        if (h < 1 || w < 1 || (c != 1 && c != 3))
            throw ConfigError("PixelGrid: invalid dimensions");
    }

    std::uint8_t& at(int y, int x, int c = 0) {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    std::uint8_t at(int y, int x, int c = 0) const {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }

    bool operator==(const PixelGrid&) const = default;
};

struct DocumentRecord {
    std::string doc_id;
    PixelGrid image;
    std::string text_mirror;
};

struct QueryRecord {
    std::string query_id;
    std::string text;
    std::vector<std::string> answers;
};

struct RunEntry {
    std::string doc_id;
    Scalar score = 0;
};

// Ranked result list for one query. Entries are kept in descending score
// order with ties broken by doc_id ascending.
struct RunList {
    std::string query_id;
    std::vector<RunEntry> entries;
};

}  // namespace dse
