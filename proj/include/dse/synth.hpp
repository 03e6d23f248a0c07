#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "dse/types.hpp"

namespace dse::synth {

// Synthetic rendered-text corpus generator. The first `target_docs`
// documents each carry a disjoint pool of topic words plus one answer word
// unique to that document; the rest are distractors drawn from a shared
// filler vocabulary. Queries sample topic words of their target (never the
// answer) plus a filler word, and are assigned to targets round-robin, so
// held-out queries are paraphrases of training queries and the task is
// learnable from pixels while answer containment stays unambiguous.
struct SynthConfig {
    int docs = 500;
    int target_docs = 50;
    int train_queries = 100;
    int test_queries = 50;
    int canvas = 128;
    int filler_vocab = 60;
    int topic_words_per_doc = 10;
    int words_per_doc = 24;
    int words_per_query = 8;
    int query_filler_words = 1;
    int word_length = 4;
    std::uint64_t seed = 0;

    void validate() const;
};

struct SynthResult {
    std::vector<DocumentRecord> docs;
    std::vector<QueryRecord> train_queries;
    std::vector<QueryRecord> test_queries;
    // query_id -> target doc_id, grade 1 (both splits)
    std::vector<std::pair<std::string, std::string>> targets;
};

// Pure generation; identical config yields identical records.
SynthResult generate(const SynthConfig& config);

// Writes corpus.jsonl + images/, queries_train.jsonl, queries_test.jsonl,
// qrels_train.txt, qrels_test.txt under `dir`.
void write_dataset(const SynthResult& data, const std::filesystem::path& dir);

}  // namespace dse::synth
