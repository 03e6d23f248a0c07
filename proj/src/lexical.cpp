#include "dse/lexical.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "dse/eval.hpp"

namespace dse::lexical {

void Bm25Params::validate() const {
    if (k1 < 0) throw ConfigError("Bm25Params: k1 must be >= 0");
    if (b < 0 || b > 1) throw ConfigError("Bm25Params: b must be in [0,1]");
}

std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> terms;
    std::string cur;
    for (unsigned char c : text) {
        if (std::isalnum(c)) {
            cur += static_cast<char>(std::tolower(c));
        } else if (!cur.empty()) {
            terms.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) terms.push_back(std::move(cur));
    return terms;
}

InvertedIndex InvertedIndex::build(const std::vector<DocumentRecord>& corpus) {
    InvertedIndex idx;
    for (const auto& doc : corpus) {
        const int internal = static_cast<int>(idx.doc_ids_.size());
        idx.doc_ids_.push_back(doc.doc_id);
        const auto terms = tokenize(doc.text_mirror);
        idx.doc_lengths_.push_back(static_cast<int>(terms.size()));
        std::map<std::string, int> tf;
        for (const auto& t : terms) ++tf[t];
        for (const auto& [term, freq] : tf)
            idx.postings_[term].emplace_back(internal, freq);
    }
    long total = 0;
    for (int len : idx.doc_lengths_) total += len;
    idx.avg_doc_length_ =
        idx.doc_lengths_.empty() ? 0 : static_cast<Scalar>(total) / idx.doc_lengths_.size();
    return idx;
}

RunList InvertedIndex::search(const std::string& query_id,
                              const std::string& query_text, int k,
                              const Bm25Params& params) const {
    params.validate();
    if (k < 1) throw ConfigError("bm25_search: k must be >= 1");
    RunList run{query_id, {}};
    const auto terms = tokenize(query_text);
    if (terms.empty() || doc_ids_.empty()) return run;

    const auto n = static_cast<Scalar>(doc_ids_.size());
    std::map<int, Scalar> scores;
    // Repeated query terms contribute once per occurrence.
    for (const auto& term : terms) {
        auto it = postings_.find(term);
        if (it == postings_.end()) continue;
        const auto df = static_cast<Scalar>(it->second.size());
        const Scalar idf = std::log(1 + (n - df + 0.5) / (df + 0.5));
        for (const auto& [doc, tf] : it->second) {
            const Scalar norm_len = doc_lengths_[doc] / avg_doc_length_;
            scores[doc] += idf * tf * (params.k1 + 1) /
                           (tf + params.k1 * (1 - params.b + params.b * norm_len));
        }
    }
    for (const auto& [doc, score] : scores)
        run.entries.push_back({doc_ids_[doc], score});
    eval::sort_run(run);
    if (static_cast<int>(run.entries.size()) > k) run.entries.resize(k);
    return run;
}

std::set<std::string> downsize_corpus(const InvertedIndex& index,
                                      const std::vector<QueryRecord>& queries,
                                      int k, const Bm25Params& params) {
    std::set<std::string> pool;
    for (const auto& q : queries) {
        std::string text = q.text;
        for (const auto& a : q.answers) text += " " + a;
        for (const auto& e : index.search(q.query_id, text, k, params).entries)
            pool.insert(e.doc_id);
    }
    return pool;
}

std::vector<training::TrainingExample> mine_training_examples(
    const InvertedIndex& index, const std::vector<DocumentRecord>& corpus,
    const std::vector<QueryRecord>& queries, int k, const Bm25Params& params) {
    std::map<std::string, const std::string*> mirrors;
    for (const auto& d : corpus) mirrors[d.doc_id] = &d.text_mirror;

    std::vector<training::TrainingExample> out;
    for (const auto& q : queries) {
        const RunList run = index.search(q.query_id, q.text, k, params);
        std::string positive;
        std::vector<std::string> negatives;
        for (const auto& e : run.entries) {
            auto it = mirrors.find(e.doc_id);
            if (it == mirrors.end())
                throw ValidationError("mine_training_examples: retrieved doc \"" +
                                      e.doc_id + "\" missing from corpus");
            if (eval::has_answer(*it->second, q.answers)) {
                if (positive.empty()) positive = e.doc_id;  // highest-ranked
            } else {
                negatives.push_back(e.doc_id);
            }
        }
        if (positive.empty() || negatives.empty()) continue;  // drop rule
        out.push_back({q.query_id, std::move(positive), std::move(negatives)});
    }
    return out;
}

}  // namespace dse::lexical
