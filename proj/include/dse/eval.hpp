#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "dse/corpus.hpp"
#include "dse/encoder.hpp"
#include "dse/patchgrid.hpp"
#include "dse/types.hpp"

namespace dse::eval {

// True iff some answer's token sequence occurs contiguously in the
// text's token sequence (both via lexical::tokenize).
bool has_answer(const std::string& text, const std::vector<std::string>& answers);

struct MetricReport {
    // metric name -> query_id -> value
    std::map<std::string, std::map<std::string, Scalar>> per_query;
    std::map<std::string, Scalar> macro;
    int excluded_queries = 0;  // queries without answers / judgments

    void write_csv(const std::filesystem::path& path) const;
    std::string to_table() const;
};

// Answer-containment accuracy at each cutoff in `ks`. Queries with no
// answers are excluded and counted.
MetricReport topk_accuracy(const std::vector<RunList>& runs,
                           const std::vector<QueryRecord>& queries,
                           const std::vector<DocumentRecord>& corpus,
                           const std::vector<int>& ks);

// Graded nDCG with gain 2^g - 1 and log2(rank+1) discount; 0 when the
// ideal gain is 0.
Scalar ndcg_at_k(const RunList& run, const std::map<std::string, int>& judgments,
                 int k = 10);
Scalar recall_at_k(const RunList& run, const std::map<std::string, int>& judgments,
                   int k = 10);

// Macro report over runs; queries absent from the qrels are excluded.
MetricReport ranked_metrics(const std::vector<RunList>& runs,
                            const corpus::Judgments& qrels, int k = 10);

// Min-max normalized interpolation over the union of both top-pool_k
// pools: alpha * dense + (1 - alpha) * lexical. A run whose pooled
// scores are all equal contributes 1 for its present docs.
RunList fuse_runs(const RunList& dense, const RunList& lexical, Scalar alpha,
                  int pool_k);

struct ThroughputRow {
    int cx, cy;
    int latent_embeddings;
    Scalar docs_per_second;
};

// Wall-clock encode rate per crop configuration; one warmup document is
// excluded from timing per config.
std::vector<ThroughputRow> throughput_report(
    const std::vector<DocumentRecord>& sample, const encoder::EncoderParams& params,
    const encoder::EncoderConfig& base_config,
    const std::vector<std::pair<int, int>>& crop_grids);

void write_throughput_csv(const std::vector<ThroughputRow>& rows,
                          const std::filesystem::path& path);

// TREC 6-column run format: `query_id Q0 doc_id rank score tag`.
std::vector<RunList> load_runs(const std::filesystem::path& path);
void save_runs(const std::vector<RunList>& runs, const std::filesystem::path& path,
               const std::string& tag = "dse");

// Re-sorts entries by score descending, doc_id ascending on ties.
void sort_run(RunList& run);

}  // namespace dse::eval
