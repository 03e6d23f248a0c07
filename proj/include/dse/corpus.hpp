#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "dse/types.hpp"

namespace dse::corpus {

// query_id -> { doc_id -> grade }
using Judgments = std::map<std::string, std::map<std::string, int>>;

// Manifest is line-delimited JSON: {"doc_id": str, "image": path, "text": str}.
// Image paths are resolved relative to the manifest's directory.
std::vector<DocumentRecord> load_corpus(const std::filesystem::path& manifest_path);

// Writes manifest + PGM/PPM images into `dir`; returns the manifest path.
std::filesystem::path save_corpus(const std::vector<DocumentRecord>& docs,
                                  const std::filesystem::path& dir);

// Line-delimited JSON: {"query_id": str, "text": str, "answers": [str]}.
std::vector<QueryRecord> load_queries(const std::filesystem::path& path);
void save_queries(const std::vector<QueryRecord>& queries,
                  const std::filesystem::path& path);

// TREC qrels: `query_id 0 doc_id grade` per line.
Judgments load_qrels(const std::filesystem::path& path);
void save_qrels(const Judgments& qrels, const std::filesystem::path& path);

// First max_words whitespace-delimited words, joined by single spaces.
std::string truncate_words(const std::string& text, int max_words);

// Deterministic text rasterizer over a built-in 5x7 bitmap font.
// Layout is left-to-right, top-to-bottom with a fixed 6x8 glyph cell;
// text that overflows the canvas is silently truncated. `seed` selects
// the background/ink levels so distinct corpora can vary slightly while
// staying reproducible; output is a pure function of (text, canvas, seed).
PixelGrid render_text_screenshot(const std::string& text, int height, int width,
                                 std::uint64_t seed = 0);

// Glyph cell geometry of the built-in font.
inline constexpr int kGlyphWidth = 5;
inline constexpr int kGlyphHeight = 7;
inline constexpr int kCellWidth = 6;
inline constexpr int kCellHeight = 8;

// Binary PGM (P5) / PPM (P6) image io.
PixelGrid load_image(const std::filesystem::path& path);
void save_image(const PixelGrid& img, const std::filesystem::path& path);

}  // namespace dse::corpus
