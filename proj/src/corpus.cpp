#include "dse/corpus.hpp"

#include <array>
#include <cctype>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace dse::corpus {

using json = nlohmann::json;

namespace {

// 5x7 bitmap font, one entry per glyph, 7 rows of 5-bit patterns (MSB left).
struct Glyph {
    char ch;
    std::array<std::uint8_t, 7> rows;
};

constexpr Glyph kFont[] = {
    {'a', {0x0E, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}},
    {'b', {0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E}},
    {'c', {0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E}},
    {'d', {0x1E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x1E}},
    {'e', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F}},
    {'f', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10}},
    {'g', {0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F}},
    {'h', {0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}},
    {'i', {0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E}},
    {'j', {0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C}},
    {'k', {0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11}},
    {'l', {0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F}},
    {'m', {0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11}},
    {'n', {0x11, 0x19, 0x15, 0x13, 0x11, 0x11, 0x11}},
    {'o', {0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}},
    {'p', {0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10}},
    {'q', {0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D}},
    {'r', {0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11}},
    {'s', {0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E}},
    {'t', {0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04}},
    {'u', {0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}},
    {'v', {0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04}},
    {'w', {0x11, 0x11, 0x11, 0x15, 0x15, 0x1B, 0x11}},
    {'x', {0x11, 0x0A, 0x04, 0x04, 0x04, 0x0A, 0x11}},
    {'y', {0x11, 0x11, 0x0A, 0x04, 0x04, 0x04, 0x04}},
    {'z', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F}},
    {'0', {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E}},
    {'1', {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E}},
    {'2', {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F}},
    {'3', {0x1E, 0x01, 0x01, 0x0E, 0x01, 0x01, 0x1E}},
    {'4', {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02}},
    {'5', {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E}},
    {'6', {0x0E, 0x10, 0x10, 0x1E, 0x11, 0x11, 0x0E}},
    {'7', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08}},
    {'8', {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E}},
    {'9', {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x01, 0x0E}},
    {'.', {0x00, 0x00, 0x00, 0x00, 0x00, 0x0C, 0x0C}},
    {',', {0x00, 0x00, 0x00, 0x00, 0x0C, 0x04, 0x08}},
    {'-', {0x00, 0x00, 0x00, 0x1F, 0x00, 0x00, 0x00}},
    {'_', {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x1F}},
    {'?', {0x0E, 0x11, 0x01, 0x02, 0x04, 0x00, 0x04}},
    {'!', {0x04, 0x04, 0x04, 0x04, 0x04, 0x00, 0x04}},
    {'\'', {0x04, 0x04, 0x00, 0x00, 0x00, 0x00, 0x00}},
};

const std::array<std::uint8_t, 7>* find_glyph(char c) {
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    for (const auto& g : kFont)
        if (g.ch == c) return &g.rows;
    return nullptr;
}

// Fallback pattern for characters outside the font.
constexpr std::array<std::uint8_t, 7> kUnknownGlyph = {0x1F, 0x11, 0x11, 0x11,
                                                       0x11, 0x11, 0x1F};

}  // namespace

std::string truncate_words(const std::string& text, int max_words) {
    if (max_words < 0) throw ConfigError("truncate_words: max_words < 0");
    std::istringstream in(text);
    std::string word, out;
    int n = 0;
    while (n < max_words && in >> word) {
        if (n > 0) out += ' ';
        out += word;
        ++n;
    }
    return out;
}

PixelGrid render_text_screenshot(const std::string& text, int height, int width,
                                 std::uint64_t seed) {
    if (height < kCellHeight || width < kCellWidth)
        throw ConfigError("render_text_screenshot: canvas smaller than one glyph cell");

    // Seed only perturbs background/ink levels; geometry is fixed.
    const auto bg = static_cast<std::uint8_t>(235 + seed % 20);
    const auto ink = static_cast<std::uint8_t>(seed / 20 % 40);
    PixelGrid img(height, width, 1, bg);

    int cx = 0, cy = 0;
    const int cols = width / kCellWidth;
    const int rows = height / kCellHeight;
    for (char c : text) {
        if (c == '\n') {
            cx = 0;
            ++cy;
            if (cy >= rows) break;
            continue;
        }
        if (cx >= cols) {
            cx = 0;
            ++cy;
        }
        if (cy >= rows) break;
        if (c != ' ') {
            const auto* rows_bits = find_glyph(c);
            if (!rows_bits) rows_bits = &kUnknownGlyph;
            for (int gy = 0; gy < kGlyphHeight; ++gy)
                for (int gx = 0; gx < kGlyphWidth; ++gx)
                    if ((*rows_bits)[gy] >> (kGlyphWidth - 1 - gx) & 1)
                        img.at(cy * kCellHeight + gy, cx * kCellWidth + gx) = ink;
        }
        ++cx;
    }
    return img;
}

PixelGrid load_image(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open image: " + path.string());
    std::string magic;
    int w = 0, h = 0, maxval = 0;
    in >> magic >> w >> h >> maxval;
    if ((magic != "P5" && magic != "P6") || w < 1 || h < 1 || maxval != 255)
        throw FormatError("unsupported image header: " + path.string());
    in.get();  // single whitespace after maxval
    PixelGrid img(h, w, magic == "P6" ? 3 : 1);
    in.read(reinterpret_cast<char*>(img.data.data()),
            static_cast<std::streamsize>(img.data.size()));
    if (in.gcount() != static_cast<std::streamsize>(img.data.size()))
        throw FormatError("truncated image payload: " + path.string());
    return img;
}

void save_image(const PixelGrid& img, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write image: " + path.string());
    out << (img.channels == 3 ? "P6" : "P5") << '\n'
        << img.width << ' ' << img.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.data.data()),
              static_cast<std::streamsize>(img.data.size()));
}

std::vector<DocumentRecord> load_corpus(const std::filesystem::path& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) throw IoError("cannot open manifest: " + manifest_path.string());
    const auto base = manifest_path.parent_path();

    std::vector<DocumentRecord> docs;
    std::set<std::string> seen;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json rec;
        try {
            rec = json::parse(line);
        } catch (const json::exception& e) {
            throw ValidationError("manifest line " + std::to_string(lineno) +
                                  ": bad JSON: " + e.what());
        }
        DocumentRecord d;
        d.doc_id = rec.at("doc_id").get<std::string>();
        if (d.doc_id.empty())
            throw ValidationError("manifest line " + std::to_string(lineno) +
                                  ": empty doc_id");
        if (!seen.insert(d.doc_id).second)
            throw ValidationError("manifest line " + std::to_string(lineno) +
                                  ": duplicate doc_id \"" + d.doc_id + "\"");
        std::filesystem::path img_path = rec.at("image").get<std::string>();
        if (img_path.is_relative()) img_path = base / img_path;
        try {
            d.image = load_image(img_path);
        } catch (const std::exception& e) {
            throw IoError("manifest line " + std::to_string(lineno) + ": " + e.what());
        }
        d.text_mirror = rec.at("text").get<std::string>();
        docs.push_back(std::move(d));
    }
    return docs;
}

std::filesystem::path save_corpus(const std::vector<DocumentRecord>& docs,
                                  const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir / "images");
    const auto manifest = dir / "corpus.jsonl";
    std::ofstream out(manifest);
    if (!out) throw IoError("cannot write manifest: " + manifest.string());
    for (const auto& d : docs) {
        const std::string img_name =
            "images/" + d.doc_id + (d.image.channels == 3 ? ".ppm" : ".pgm");
        save_image(d.image, dir / img_name);
        json rec{{"doc_id", d.doc_id}, {"image", img_name}, {"text", d.text_mirror}};
        out << rec.dump() << '\n';
    }
    return manifest;
}

std::vector<QueryRecord> load_queries(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open queries: " + path.string());
    std::vector<QueryRecord> queries;
    std::set<std::string> seen;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json rec = json::parse(line);
        QueryRecord q;
        q.query_id = rec.at("query_id").get<std::string>();
        if (!seen.insert(q.query_id).second)
            throw ValidationError("queries line " + std::to_string(lineno) +
                                  ": duplicate query_id \"" + q.query_id + "\"");
        q.text = rec.at("text").get<std::string>();
        if (q.text.empty())
            throw ValidationError("queries line " + std::to_string(lineno) +
                                  ": empty text");
        if (rec.contains("answers"))
            q.answers = rec.at("answers").get<std::vector<std::string>>();
        queries.push_back(std::move(q));
    }
    return queries;
}

void save_queries(const std::vector<QueryRecord>& queries,
                  const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write queries: " + path.string());
    for (const auto& q : queries) {
        json rec{{"query_id", q.query_id}, {"text", q.text}, {"answers", q.answers}};
        out << rec.dump() << '\n';
    }
}

Judgments load_qrels(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open qrels: " + path.string());
    Judgments qrels;
    std::string qid, zero, did;
    int grade;
    while (in >> qid >> zero >> did >> grade) {
        if (grade < 0) throw ValidationError("qrels: negative grade for " + qid);
        qrels[qid][did] = grade;
    }
    return qrels;
}

void save_qrels(const Judgments& qrels, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write qrels: " + path.string());
    for (const auto& [qid, docs] : qrels)
        for (const auto& [did, grade] : docs)
            out << qid << " 0 " << did << ' ' << grade << '\n';
}

}  // namespace dse::corpus
