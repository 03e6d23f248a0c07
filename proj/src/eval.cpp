#include "dse/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "dse/lexical.hpp"

namespace dse::eval {

void sort_run(RunList& run) {
    std::sort(run.entries.begin(), run.entries.end(),
              [](const RunEntry& a, const RunEntry& b) {
                  if (a.score != b.score) return a.score > b.score;
                  return a.doc_id < b.doc_id;
              });
}

bool has_answer(const std::string& text, const std::vector<std::string>& answers) {
    const auto tokens = lexical::tokenize(text);
    for (const auto& answer : answers) {
        const auto needle = lexical::tokenize(answer);
        if (needle.empty()) continue;
        if (needle.size() > tokens.size()) continue;
        for (std::size_t i = 0; i + needle.size() <= tokens.size(); ++i)
            if (std::equal(needle.begin(), needle.end(), tokens.begin() + i)) return true;
    }
    return false;
}

void MetricReport::write_csv(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write metrics csv: " + path.string());
    out.precision(17);
    out << "metric,query_id,value\n";
    for (const auto& [metric, values] : per_query)
        for (const auto& [qid, v] : values) out << metric << ',' << qid << ',' << v << '\n';
    for (const auto& [metric, v] : macro) out << metric << ",__macro__," << v << '\n';
    out << "excluded_queries,," << excluded_queries << '\n';
}

std::string MetricReport::to_table() const {
    std::ostringstream out;
    out.precision(4);
    out << std::fixed;
    for (const auto& [metric, v] : macro) out << metric << "\t" << v << '\n';
    out << "excluded_queries\t" << excluded_queries << '\n';
    return out.str();
}

MetricReport topk_accuracy(const std::vector<RunList>& runs,
                           const std::vector<QueryRecord>& queries,
                           const std::vector<DocumentRecord>& corpus,
                           const std::vector<int>& ks) {
    std::map<std::string, const QueryRecord*> query_map;
    for (const auto& q : queries) query_map[q.query_id] = &q;
    std::map<std::string, const std::string*> mirrors;
    for (const auto& d : corpus) mirrors[d.doc_id] = &d.text_mirror;

    MetricReport report;
    for (const auto& run : runs) {
        auto qit = query_map.find(run.query_id);
        if (qit == query_map.end())
            throw ValidationError("topk_accuracy: run query \"" + run.query_id +
                                  "\" not in query set");
        const auto& answers = qit->second->answers;
        if (answers.empty()) {
            ++report.excluded_queries;
            continue;
        }
        // first rank (1-based) whose doc contains an answer, or 0
        int first_hit = 0;
        for (std::size_t i = 0; i < run.entries.size(); ++i) {
            auto mit = mirrors.find(run.entries[i].doc_id);
            if (mit == mirrors.end())
                throw ValidationError("topk_accuracy: doc \"" + run.entries[i].doc_id +
                                      "\" has no text mirror");
            if (has_answer(*mit->second, answers)) {
                first_hit = static_cast<int>(i) + 1;
                break;
            }
        }
        for (int k : ks) {
            const std::string metric = "top" + std::to_string(k) + "_accuracy";
            report.per_query[metric][run.query_id] =
                (first_hit > 0 && first_hit <= k) ? 1 : 0;
        }
    }
    for (const auto& [metric, values] : report.per_query) {
        Scalar sum = 0;
        for (const auto& [_, v] : values) sum += v;
        report.macro[metric] = values.empty() ? 0 : sum / values.size();
    }
    return report;
}

Scalar ndcg_at_k(const RunList& run, const std::map<std::string, int>& judgments,
                 int k) {
    std::vector<int> grades;
    for (const auto& [_, g] : judgments) grades.push_back(g);
    std::sort(grades.begin(), grades.end(), std::greater<>());

    Scalar idcg = 0;
    for (int i = 0; i < std::min<int>(k, static_cast<int>(grades.size())); ++i)
        idcg += (std::pow(2.0, grades[i]) - 1) / std::log2(i + 2.0);
    if (idcg == 0) return 0;

    Scalar dcg = 0;
    for (int i = 0; i < std::min<int>(k, static_cast<int>(run.entries.size())); ++i) {
        auto it = judgments.find(run.entries[i].doc_id);
        if (it != judgments.end())
            dcg += (std::pow(2.0, it->second) - 1) / std::log2(i + 2.0);
    }
    return dcg / idcg;
}

Scalar recall_at_k(const RunList& run, const std::map<std::string, int>& judgments,
                   int k) {
    int relevant = 0;
    for (const auto& [_, g] : judgments)
        if (g > 0) ++relevant;
    if (relevant == 0) return 0;

    int found = 0;
    for (int i = 0; i < std::min<int>(k, static_cast<int>(run.entries.size())); ++i) {
        auto it = judgments.find(run.entries[i].doc_id);
        if (it != judgments.end() && it->second > 0) ++found;
    }
    return static_cast<Scalar>(found) / relevant;
}

MetricReport ranked_metrics(const std::vector<RunList>& runs,
                            const corpus::Judgments& qrels, int k) {
    MetricReport report;
    const std::string ndcg_name = "ndcg@" + std::to_string(k);
    const std::string recall_name = "recall@" + std::to_string(k);
    for (const auto& run : runs) {
        auto it = qrels.find(run.query_id);
        if (it == qrels.end() || it->second.empty()) {
            ++report.excluded_queries;
            continue;
        }
        report.per_query[ndcg_name][run.query_id] = ndcg_at_k(run, it->second, k);
        report.per_query[recall_name][run.query_id] = recall_at_k(run, it->second, k);
    }
    for (const auto& [metric, values] : report.per_query) {
        Scalar sum = 0;
        for (const auto& [_, v] : values) sum += v;
        report.macro[metric] = values.empty() ? 0 : sum / values.size();
    }
    return report;
}

namespace {

std::map<std::string, Scalar> normalized_pool_scores(const RunList& run, int pool_k) {
    std::map<std::string, Scalar> raw;
    const int n = std::min<int>(pool_k, static_cast<int>(run.entries.size()));
    for (int i = 0; i < n; ++i) raw[run.entries[i].doc_id] = run.entries[i].score;
    if (raw.empty()) return raw;

    Scalar lo = raw.begin()->second, hi = lo;
    for (const auto& [_, s] : raw) {
        lo = std::min(lo, s);
        hi = std::max(hi, s);
    }
    for (auto& [_, s] : raw)
        s = (hi == lo) ? 1 : (s - lo) / (hi - lo);  // degenerate: constant 1
    return raw;
}

}  // namespace

RunList fuse_runs(const RunList& dense, const RunList& lexical, Scalar alpha,
                  int pool_k) {
    if (dense.query_id != lexical.query_id)
        throw ValidationError("fuse_runs: query_id mismatch");
    if (alpha < 0 || alpha > 1) throw ConfigError("fuse_runs: alpha must be in [0,1]");

    const auto dense_scores = normalized_pool_scores(dense, pool_k);
    const auto lexical_scores = normalized_pool_scores(lexical, pool_k);

    std::set<std::string> pool;
    for (const auto& [id, _] : dense_scores) pool.insert(id);
    for (const auto& [id, _] : lexical_scores) pool.insert(id);

    RunList fused{dense.query_id, {}};
    for (const auto& id : pool) {
        auto dit = dense_scores.find(id);
        auto lit = lexical_scores.find(id);
        const Scalar ds = dit == dense_scores.end() ? 0 : dit->second;
        const Scalar ls = lit == lexical_scores.end() ? 0 : lit->second;
        fused.entries.push_back({id, alpha * ds + (1 - alpha) * ls});
    }
    sort_run(fused);
    return fused;
}

std::vector<ThroughputRow> throughput_report(
    const std::vector<DocumentRecord>& sample, const encoder::EncoderParams& params,
    const encoder::EncoderConfig& base_config,
    const std::vector<std::pair<int, int>>& crop_grids) {
    if (sample.size() < 32)
        throw ValidationError("throughput_report: sample must have >= 32 docs");

    std::vector<ThroughputRow> rows;
    for (const auto& [cx, cy] : crop_grids) {
        encoder::EncoderConfig cfg = base_config;
        cfg.crop.cx = cx;
        cfg.crop.cy = cy;
        // patch_proj shape is crop-independent, reuse params as-is
        const auto l = patchgrid::layout(cfg.crop);

        encoder::encode_document(sample.front().image, params, cfg);  // warmup
        const auto t0 = std::chrono::steady_clock::now();
        for (const auto& doc : sample) encoder::encode_document(doc.image, params, cfg);
        const auto t1 = std::chrono::steady_clock::now();
        const Scalar secs = std::chrono::duration<Scalar>(t1 - t0).count();
        rows.push_back({cx, cy, l.latent_embeddings,
                        static_cast<Scalar>(sample.size()) / secs});
    }
    return rows;
}

void write_throughput_csv(const std::vector<ThroughputRow>& rows,
                          const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write throughput csv: " + path.string());
    out.precision(6);
    out << "cx,cy,latent_embeddings,docs_per_second\n";
    for (const auto& r : rows)
        out << r.cx << ',' << r.cy << ',' << r.latent_embeddings << ','
            << r.docs_per_second << '\n';
}

std::vector<RunList> load_runs(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open run file: " + path.string());
    std::vector<RunList> runs;
    std::map<std::string, std::size_t> index;
    std::string qid, q0, did, tag;
    int rank;
    Scalar score;
    while (in >> qid >> q0 >> did >> rank >> score >> tag) {
        auto [it, inserted] = index.emplace(qid, runs.size());
        if (inserted) runs.push_back({qid, {}});
        runs[it->second].entries.push_back({did, score});
    }
    for (auto& run : runs) sort_run(run);
    return runs;
}

void save_runs(const std::vector<RunList>& runs, const std::filesystem::path& path,
               const std::string& tag) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write run file: " + path.string());
    out.precision(17);
    for (const auto& run : runs)
        for (std::size_t i = 0; i < run.entries.size(); ++i)
            out << run.query_id << " Q0 " << run.entries[i].doc_id << ' ' << i + 1 << ' '
                << run.entries[i].score << ' ' << tag << '\n';
}

}  // namespace dse::eval
