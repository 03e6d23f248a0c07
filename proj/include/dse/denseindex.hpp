#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "dse/types.hpp"

namespace dse::denseindex {

// Flat exhaustive index over unit-norm vectors. f32 storage, f64 score
// accumulation in stored-index order so results match a naive oracle
// exactly.
class FlatIndex {
  public:
    explicit FlatIndex(int dim);

    void add(const std::string& doc_id, const std::vector<float>& vector);

    int dim() const { return dim_; }
    int count() const { return static_cast<int>(doc_ids_.size()); }
    const std::vector<std::string>& doc_ids() const { return doc_ids_; }
    const float* vector(int i) const { return vectors_.data() + static_cast<std::size_t>(i) * dim_; }

    // Exhaustive top-min(k, count) by dot product, ties by doc_id ascending.
    RunList search(const std::string& query_id, const std::vector<float>& query,
                   int k) const;

    // "DSEIDX01" magic + dim/count header + f32 LE matrix + length-prefixed ids.
    void save(const std::filesystem::path& path) const;
    static FlatIndex load(const std::filesystem::path& path);

  private:
    int dim_;
    std::vector<float> vectors_;
    std::vector<std::string> doc_ids_;
};

}  // namespace dse::denseindex
