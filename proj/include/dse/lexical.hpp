#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "dse/training.hpp"
#include "dse/types.hpp"

namespace dse::lexical {

struct Bm25Params {
    Scalar k1 = 0.9;
    Scalar b = 0.4;

    void validate() const;
};

// Lowercase, split on non-alphanumerics, drop empties. Shared with the
// answer-containment check so both sides see the same token stream.
std::vector<std::string> tokenize(const std::string& text);

class InvertedIndex {
  public:
    static InvertedIndex build(const std::vector<DocumentRecord>& corpus);

    RunList search(const std::string& query_id, const std::string& query_text,
                   int k, const Bm25Params& params = {}) const;

    int doc_count() const { return static_cast<int>(doc_ids_.size()); }
    Scalar avg_doc_length() const { return avg_doc_length_; }

  private:
    std::map<std::string, std::vector<std::pair<int, int>>> postings_;  // term -> (doc, tf)
    std::vector<int> doc_lengths_;
    std::vector<std::string> doc_ids_;
    Scalar avg_doc_length_ = 0;
};

// Union of per-query BM25 top-k pools, queried with question text plus
// its answers appended.
std::set<std::string> downsize_corpus(const InvertedIndex& index,
                                      const std::vector<QueryRecord>& queries,
                                      int k = 50, const Bm25Params& params = {});

// BM25 top-k on the question text alone; answer-bearing candidates are
// positives (highest-ranked one kept), the rest hard negatives. Queries
// with an empty positive or negative list are dropped.
std::vector<training::TrainingExample> mine_training_examples(
    const InvertedIndex& index, const std::vector<DocumentRecord>& corpus,
    const std::vector<QueryRecord>& queries, int k = 50,
    const Bm25Params& params = {});

}  // namespace dse::lexical
