#include "dse/denseindex.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>

#include "dse/eval.hpp"

namespace dse::denseindex {

FlatIndex::FlatIndex(int dim) : dim_(dim) {
    if (dim < 1) throw ConfigError("FlatIndex: dim must be >= 1");
}

void FlatIndex::add(const std::string& doc_id, const std::vector<float>& vector) {
    if (static_cast<int>(vector.size()) != dim_)
        throw ConfigError("FlatIndex::add: dimension mismatch for \"" + doc_id + "\"");
    if (std::find(doc_ids_.begin(), doc_ids_.end(), doc_id) != doc_ids_.end())
        throw ValidationError("FlatIndex::add: duplicate doc_id \"" + doc_id + "\"");
    double norm_sq = 0;
    for (float v : vector) norm_sq += static_cast<double>(v) * v;
    if (std::abs(std::sqrt(norm_sq) - 1.0) > 1e-5)
        throw ValidationError("FlatIndex::add: vector for \"" + doc_id +
                              "\" is not unit-norm");
    vectors_.insert(vectors_.end(), vector.begin(), vector.end());
    doc_ids_.push_back(doc_id);
}

RunList FlatIndex::search(const std::string& query_id,
                          const std::vector<float>& query, int k) const {
    if (static_cast<int>(query.size()) != dim_)
        throw ConfigError("FlatIndex::search: dimension mismatch");
    if (k < 1) throw ConfigError("FlatIndex::search: k must be >= 1");

    RunList run{query_id, {}};
    run.entries.reserve(doc_ids_.size());
    for (int i = 0; i < count(); ++i) {
        const float* v = vector(i);
        double score = 0;  // f64 accumulation in index order
        for (int j = 0; j < dim_; ++j)
            score += static_cast<double>(query[j]) * static_cast<double>(v[j]);
        run.entries.push_back({doc_ids_[i], score});
    }
    eval::sort_run(run);
    if (static_cast<int>(run.entries.size()) > k) run.entries.resize(k);
    return run;
}

namespace {

constexpr char kIndexMagic[8] = {'D', 'S', 'E', 'I', 'D', 'X', '0', '1'};
constexpr std::uint32_t kIndexVersion = 1;

void write_u32(std::ostream& out, std::uint32_t v) {
    char b[4] = {static_cast<char>(v), static_cast<char>(v >> 8),
                 static_cast<char>(v >> 16), static_cast<char>(v >> 24)};
    out.write(b, 4);
}

void write_u64(std::ostream& out, std::uint64_t v) {
    write_u32(out, static_cast<std::uint32_t>(v));
    write_u32(out, static_cast<std::uint32_t>(v >> 32));
}

std::uint32_t read_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw FormatError("index file: truncated");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) |
           (static_cast<std::uint32_t>(b[3]) << 24);
}

std::uint64_t read_u64(std::istream& in) {
    const std::uint64_t lo = read_u32(in);
    const std::uint64_t hi = read_u32(in);
    return lo | (hi << 32);
}

}  // namespace

void FlatIndex::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write index: " + path.string());
    out.write(kIndexMagic, 8);
    write_u32(out, kIndexVersion);
    write_u32(out, static_cast<std::uint32_t>(dim_));
    write_u64(out, static_cast<std::uint64_t>(count()));
    for (float v : vectors_) {
        std::uint32_t bits;
        std::memcpy(&bits, &v, 4);
        write_u32(out, bits);
    }
    for (const auto& id : doc_ids_) {
        write_u32(out, static_cast<std::uint32_t>(id.size()));
        out.write(id.data(), static_cast<std::streamsize>(id.size()));
    }
}

FlatIndex FlatIndex::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open index: " + path.string());
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kIndexMagic, 8) != 0)
        throw FormatError("index file: bad magic");
    if (read_u32(in) != kIndexVersion)
        throw FormatError("index file: unsupported version");
    const int dim = static_cast<int>(read_u32(in));
    const std::uint64_t n = read_u64(in);
    if (dim < 1) throw FormatError("index file: invalid dim");

    FlatIndex idx(dim);
    idx.vectors_.resize(n * static_cast<std::uint64_t>(dim));
    for (auto& v : idx.vectors_) {
        const std::uint32_t bits = read_u32(in);
        std::memcpy(&v, &bits, 4);
    }
    std::set<std::string> seen;
    for (std::uint64_t i = 0; i < n; ++i) {
        const std::uint32_t len = read_u32(in);
        std::string id(len, '\0');
        in.read(id.data(), len);
        if (!in) throw FormatError("index file: truncated doc_id table");
        if (!seen.insert(id).second)
            throw FormatError("index file: duplicate doc_id \"" + id + "\"");
        idx.doc_ids_.push_back(std::move(id));
    }
    char extra;
    if (in.read(&extra, 1)) throw FormatError("index file: trailing bytes");
    return idx;
}

}  // namespace dse::denseindex
