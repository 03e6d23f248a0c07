#include "dse/synth.hpp"

#include <algorithm>
#include <random>
#include <set>

#include "dse/corpus.hpp"

namespace dse::synth {

void SynthConfig::validate() const {
    if (docs < 1) throw ConfigError("SynthConfig: docs must be >= 1");
    if (target_docs < 1 || target_docs > docs)
        throw ConfigError("SynthConfig: target_docs must be in [1, docs]");
    if (train_queries < 0 || test_queries < 0)
        throw ConfigError("SynthConfig: query counts must be >= 0");
    if (word_length < 1 || word_length > 8)
        throw ConfigError("SynthConfig: word_length must be in [1,8]");
    if (filler_vocab < words_per_doc)
        throw ConfigError("SynthConfig: filler_vocab must be >= words_per_doc");
    if (topic_words_per_doc + 1 >= words_per_doc)
        throw ConfigError("SynthConfig: words_per_doc too small for topic words");
    if (query_filler_words < 0 || query_filler_words >= words_per_query)
        throw ConfigError("SynthConfig: query_filler_words must be in [0, words_per_query)");
    if (words_per_query - query_filler_words > topic_words_per_doc)
        throw ConfigError("SynthConfig: words_per_query exceeds topic pool");
    const int cols_per_line = canvas / corpus::kCellWidth / (word_length + 1);
    const int lines = canvas / corpus::kCellHeight;
    if (cols_per_line * lines < words_per_doc)
        throw ConfigError("SynthConfig: canvas too small for words_per_doc");
}

namespace {

std::string random_word(std::mt19937_64& rng, int length) {
    std::uniform_int_distribution<int> letter(0, 25);
    std::string w(length, 'a');
    for (char& c : w) c = static_cast<char>('a' + letter(rng));
    return w;
}

std::vector<std::string> distinct_words(std::mt19937_64& rng, int count, int length,
                                        std::set<std::string>& used) {
    std::vector<std::string> out;
    while (static_cast<int>(out.size()) < count) {
        std::string w = random_word(rng, length);
        if (used.insert(w).second) out.push_back(std::move(w));
    }
    return out;
}

// Joins words with spaces, breaking lines so every word starts at a fixed
// column slot of the rendered canvas.
std::string layout_text(const std::vector<std::string>& words, int canvas,
                        int word_length) {
    const int words_per_line =
        std::max(1, canvas / corpus::kCellWidth / (word_length + 1));
    std::string text;
    for (std::size_t i = 0; i < words.size(); ++i) {
        if (i > 0) text += (i % words_per_line == 0) ? '\n' : ' ';
        text += words[i];
    }
    return text;
}

std::vector<std::string> sample(std::mt19937_64& rng,
                                const std::vector<std::string>& pool, int count) {
    std::vector<std::string> out = pool;
    std::shuffle(out.begin(), out.end(), rng);
    out.resize(count);
    return out;
}

}  // namespace

SynthResult generate(const SynthConfig& config) {
    config.validate();
    std::mt19937_64 rng(config.seed);

    std::set<std::string> used;
    const auto fillers =
        distinct_words(rng, config.filler_vocab, config.word_length, used);
    const auto answers =
        distinct_words(rng, config.target_docs, config.word_length, used);
    std::vector<std::vector<std::string>> topics(config.target_docs);
    for (auto& t : topics)
        t = distinct_words(rng, config.topic_words_per_doc, config.word_length, used);

    SynthResult result;
    for (int d = 0; d < config.docs; ++d) {
        std::vector<std::string> words;
        if (d < config.target_docs) {
            words = topics[d];
            words.push_back(answers[d]);
            const int pad = config.words_per_doc - static_cast<int>(words.size());
            for (auto& w : sample(rng, fillers, pad)) words.push_back(std::move(w));
        } else {
            words = sample(rng, fillers, config.words_per_doc);
        }
        std::shuffle(words.begin(), words.end(), rng);

        DocumentRecord doc;
        std::string num = std::to_string(d);
        doc.doc_id = "d" + std::string(4 - num.size(), '0') + num;
        doc.text_mirror = layout_text(words, config.canvas, config.word_length);
        doc.image = corpus::render_text_screenshot(doc.text_mirror, config.canvas,
                                                   config.canvas, config.seed);
        result.docs.push_back(std::move(doc));
    }

    auto make_queries = [&](int count, const std::string& prefix) {
        std::vector<QueryRecord> queries;
        for (int i = 0; i < count; ++i) {
            const int target = i % config.target_docs;
            auto words = sample(rng, topics[target],
                                config.words_per_query - config.query_filler_words);
            for (auto& w : sample(rng, fillers, config.query_filler_words))
                words.push_back(std::move(w));
            std::shuffle(words.begin(), words.end(), rng);

            QueryRecord q;
            q.query_id = prefix + std::to_string(i);
            for (const auto& w : words) q.text += (q.text.empty() ? "" : " ") + w;
            q.answers = {answers[target]};
            result.targets.emplace_back(q.query_id, result.docs[target].doc_id);
            queries.push_back(std::move(q));
        }
        return queries;
    };
    result.train_queries = make_queries(config.train_queries, "qtrain");
    result.test_queries = make_queries(config.test_queries, "qtest");
    return result;
}

void write_dataset(const SynthResult& data, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    corpus::save_corpus(data.docs, dir);
    corpus::save_queries(data.train_queries, dir / "queries_train.jsonl");
    corpus::save_queries(data.test_queries, dir / "queries_test.jsonl");

    corpus::Judgments train_qrels, test_qrels;
    for (const auto& [qid, did] : data.targets) {
        if (qid.rfind("qtrain", 0) == 0)
            train_qrels[qid][did] = 1;
        else
            test_qrels[qid][did] = 1;
    }
    corpus::save_qrels(train_qrels, dir / "qrels_train.txt");
    corpus::save_qrels(test_qrels, dir / "qrels_test.txt");
}

}  // namespace dse::synth
