// dse: end-to-end screenshot retrieval pipeline driver.
//
// Exit codes: 0 success, 64 bad usage / missing flag, 65 validation or
// data error, 66 I/O error, 67 file format error, 68 configuration error.
#include <cmath>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "dse/corpus.hpp"
#include "dse/denseindex.hpp"
#include "dse/encoder.hpp"
#include "dse/eval.hpp"
#include "dse/lexical.hpp"
#include "dse/synth.hpp"
#include "dse/training.hpp"
#include "dse/types.hpp"

namespace {

using namespace dse;

std::vector<float> to_f32_unit(const encoder::Vector& v) {
    std::vector<float> out(v.size());
    for (Eigen::Index i = 0; i < v.size(); ++i) out[i] = static_cast<float>(v[i]);
    // renormalize in f32 so the stored vector passes the index norm check
    double norm = 0;
    for (float x : out) norm += static_cast<double>(x) * x;
    norm = std::sqrt(norm);
    for (float& x : out) x = static_cast<float>(x / norm);
    return out;
}

std::vector<std::pair<int, int>> parse_grids(const std::string& spec) {
    std::vector<std::pair<int, int>> grids;
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto x = item.find('x');
        if (x == std::string::npos)
            throw ConfigError("bad grid spec \"" + item + "\", expected CXxCY");
        grids.emplace_back(std::stoi(item.substr(0, x)), std::stoi(item.substr(x + 1)));
    }
    if (grids.empty()) throw ConfigError("empty grid spec");
    return grids;
}

struct EncoderFlags {
    int embed_dim = 64;
    int vocab_size = 4096;
    int mixer_layers = 1;
    int cx = 2, cy = 2, base_side = 64, patch_side = 8, concat_group = 4;

    void attach(CLI::App* cmd) {
        cmd->add_option("--embed-dim", embed_dim, "Embedding dimension");
        cmd->add_option("--vocab-size", vocab_size, "Hashed token vocabulary size");
        cmd->add_option("--mixer-layers", mixer_layers, "Mixer layer count");
        cmd->add_option("--cx", cx, "Horizontal crop count");
        cmd->add_option("--cy", cy, "Vertical crop count");
        cmd->add_option("--base-side", base_side, "Sub-image side in pixels");
        cmd->add_option("--patch-side", patch_side, "Patch side in pixels");
        cmd->add_option("--concat-group", concat_group, "Latents per projected embedding");
    }

    encoder::EncoderConfig to_config(std::uint64_t seed) const {
        encoder::EncoderConfig cfg;
        cfg.embed_dim = embed_dim;
        cfg.vocab_size = vocab_size;
        cfg.mixer_layers = mixer_layers;
        cfg.crop = {cx, cy, base_side, patch_side, concat_group};
        cfg.seed = seed;
        cfg.validate();
        return cfg;
    }
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Screenshot-based dense retrieval pipeline"};
    app.require_subcommand(1);
    app.set_config("--config", "", "Config file (flags override its values)");
    app.allow_config_extras(CLI::config_extras_mode::ignore_all);

    std::uint64_t seed = 0;
    app.add_option("--seed", seed, "Global deterministic seed")->configurable();

    // ---- synth ----
    auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic rendered-text corpus");
    std::string synth_out;
    synth::SynthConfig synth_cfg;
    synth_cmd->add_option("--out", synth_out, "Output directory")->required();
    synth_cmd->add_option("--docs", synth_cfg.docs, "Document count");
    synth_cmd->add_option("--train-queries", synth_cfg.train_queries, "Training query count");
    synth_cmd->add_option("--test-queries", synth_cfg.test_queries, "Held-out query count");
    synth_cmd->add_option("--canvas", synth_cfg.canvas, "Canvas side in pixels");
    synth_cmd->add_option("--target-docs", synth_cfg.target_docs, "Documents that receive queries");
    synth_cmd->add_option("--filler-vocab", synth_cfg.filler_vocab, "Shared filler vocabulary size");
    synth_cmd->add_option("--topic-words", synth_cfg.topic_words_per_doc, "Topic words per target document");
    synth_cmd->add_option("--doc-words", synth_cfg.words_per_doc, "Content words per document");
    synth_cmd->add_option("--query-words", synth_cfg.words_per_query, "Words per query");

    // ---- mine ----
    auto* mine_cmd = app.add_subcommand("mine", "Mine training triplets with BM25");
    std::string mine_corpus, mine_queries, mine_out, mine_pool_out;
    int mine_k = 50;
    lexical::Bm25Params mine_bm25;
    mine_cmd->add_option("--corpus", mine_corpus, "Corpus manifest")->required();
    mine_cmd->add_option("--queries", mine_queries, "Query file")->required();
    mine_cmd->add_option("--out", mine_out, "Training example output (jsonl)")->required();
    mine_cmd->add_option("--k", mine_k, "BM25 pool depth");
    mine_cmd->add_option("--k1", mine_bm25.k1, "BM25 k1");
    mine_cmd->add_option("--b", mine_bm25.b, "BM25 b");
    mine_cmd->add_option("--downsize-pool", mine_pool_out,
                         "Also write the answer-augmented BM25 doc-id pool here");

    // ---- train ----
    auto* train_cmd = app.add_subcommand("train", "Train the bi-encoder with InfoNCE");
    std::string train_corpus, train_queries, train_examples, train_out, train_loss_log;
    training::TrainingConfig train_cfg;
    EncoderFlags train_enc;
    std::string optimizer_name = "adam";
    train_cmd->add_option("--corpus", train_corpus, "Corpus manifest")->required();
    train_cmd->add_option("--queries", train_queries, "Query file")->required();
    train_cmd->add_option("--examples", train_examples, "Training examples (jsonl)")->required();
    train_cmd->add_option("--out", train_out, "Checkpoint output path")->required();
    train_cmd->add_option("--loss-log", train_loss_log, "Loss CSV output path");
    train_cmd->add_option("--temperature", train_cfg.temperature, "InfoNCE temperature");
    train_cmd->add_option("--batch-size", train_cfg.batch_size, "Batch size");
    train_cmd->add_option("--hard-negs", train_cfg.hard_negs_per_query,
                          "Hard negatives used per example");
    train_cmd->add_option("--epochs", train_cfg.epochs, "Epoch count");
    train_cmd->add_option("--lr", train_cfg.learning_rate, "Learning rate");
    train_cmd->add_option("--optimizer", optimizer_name, "sgd or adam")
        ->check(CLI::IsMember({"sgd", "adam"}));
    train_enc.attach(train_cmd);

    // ---- encode ----
    auto* encode_cmd = app.add_subcommand("encode", "Encode corpus screenshots to embeddings");
    std::string encode_corpus, encode_ckpt, encode_out;
    encode_cmd->add_option("--corpus", encode_corpus, "Corpus manifest")->required();
    encode_cmd->add_option("--checkpoint", encode_ckpt, "Encoder checkpoint")->required();
    encode_cmd->add_option("--out", encode_out, "Embedding file output")->required();

    // ---- index ----
    auto* index_cmd = app.add_subcommand("index", "Validate embeddings into a search index");
    std::string index_in, index_out;
    index_cmd->add_option("--embeddings", index_in, "Embedding file")->required();
    index_cmd->add_option("--out", index_out, "Index output path")->required();

    // ---- search ----
    auto* search_cmd = app.add_subcommand("search", "Dense top-k search over an index");
    std::string search_index, search_ckpt, search_queries, search_out;
    int search_k = 10;
    search_cmd->add_option("--index", search_index, "Index file")->required();
    search_cmd->add_option("--checkpoint", search_ckpt, "Encoder checkpoint")->required();
    search_cmd->add_option("--queries", search_queries, "Query file")->required();
    search_cmd->add_option("--k", search_k, "Results per query");
    search_cmd->add_option("--out", search_out, "TREC run output")->required();

    // ---- bm25 ----
    auto* bm25_cmd = app.add_subcommand("bm25", "BM25 top-k search over text mirrors");
    std::string bm25_corpus, bm25_queries, bm25_out;
    int bm25_k = 10;
    lexical::Bm25Params bm25_params;
    bm25_cmd->add_option("--corpus", bm25_corpus, "Corpus manifest")->required();
    bm25_cmd->add_option("--queries", bm25_queries, "Query file")->required();
    bm25_cmd->add_option("--k", bm25_k, "Results per query");
    bm25_cmd->add_option("--k1", bm25_params.k1, "BM25 k1");
    bm25_cmd->add_option("--b", bm25_params.b, "BM25 b");
    bm25_cmd->add_option("--out", bm25_out, "TREC run output")->required();

    // ---- eval ----
    auto* eval_cmd = app.add_subcommand("eval", "Score a run file");
    std::string eval_run, eval_mode = "topk", eval_queries, eval_corpus, eval_qrels,
                eval_out, eval_ks = "1,5,10,20";
    int eval_k = 10;
    eval_cmd->add_option("--run", eval_run, "TREC run file")->required();
    eval_cmd->add_option("--mode", eval_mode, "topk (answer match) or ranked (nDCG/recall)")
        ->check(CLI::IsMember({"topk", "ranked"}));
    eval_cmd->add_option("--queries", eval_queries, "Query file (topk mode)");
    eval_cmd->add_option("--corpus", eval_corpus, "Corpus manifest (topk mode)");
    eval_cmd->add_option("--qrels", eval_qrels, "Qrels file (ranked mode)");
    eval_cmd->add_option("--ks", eval_ks, "Comma-separated cutoffs (topk mode)");
    eval_cmd->add_option("--k", eval_k, "Cutoff (ranked mode)");
    eval_cmd->add_option("--out", eval_out, "Metric CSV output");

    // ---- fuse ----
    auto* fuse_cmd = app.add_subcommand("fuse", "Interpolate dense and lexical runs");
    std::string fuse_dense, fuse_lexical, fuse_out;
    double fuse_alpha = 0.5;
    int fuse_pool_k = 100;
    fuse_cmd->add_option("--dense", fuse_dense, "Dense TREC run")->required();
    fuse_cmd->add_option("--lexical", fuse_lexical, "Lexical TREC run")->required();
    fuse_cmd->add_option("--alpha", fuse_alpha, "Dense interpolation weight in [0,1]");
    fuse_cmd->add_option("--pool-k", fuse_pool_k, "Candidate pool depth per run");
    fuse_cmd->add_option("--out", fuse_out, "Fused TREC run output")->required();

    // ---- throughput ----
    auto* tp_cmd = app.add_subcommand("throughput", "Encoding rate per crop configuration");
    std::string tp_corpus, tp_out, tp_grids = "1x1,2x2,3x3,4x4";
    int tp_sample = 64;
    EncoderFlags tp_enc;
    tp_enc.base_side = 336;
    tp_enc.patch_side = 14;
    tp_cmd->add_option("--corpus", tp_corpus, "Corpus manifest")->required();
    tp_cmd->add_option("--sample", tp_sample, "Documents to encode per config (>= 32)");
    tp_cmd->add_option("--grids", tp_grids, "Comma-separated CXxCY list");
    tp_cmd->add_option("--out", tp_out, "Throughput CSV output");
    tp_enc.attach(tp_cmd);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        std::cerr << "error: usage: " << e.what() << '\n';
        return 64;
    }

    try {
        if (*synth_cmd) {
            synth_cfg.seed = seed;
            synth::write_dataset(synth::generate(synth_cfg), synth_out);
        } else if (*mine_cmd) {
            const auto docs = corpus::load_corpus(mine_corpus);
            const auto queries = corpus::load_queries(mine_queries);
            const auto index = lexical::InvertedIndex::build(docs);
            const auto examples =
                lexical::mine_training_examples(index, docs, queries, mine_k, mine_bm25);
            training::save_examples(examples, mine_out);
            std::cout << "mined " << examples.size() << " examples from "
                      << queries.size() << " queries\n";
            if (!mine_pool_out.empty()) {
                const auto pool =
                    lexical::downsize_corpus(index, queries, mine_k, mine_bm25);
                std::ofstream out(mine_pool_out);
                if (!out) throw IoError("cannot write pool: " + mine_pool_out);
                for (const auto& id : pool) out << id << '\n';
            }
        } else if (*train_cmd) {
            const auto docs = corpus::load_corpus(train_corpus);
            const auto queries = corpus::load_queries(train_queries);
            const auto examples = training::load_examples(train_examples);
            train_cfg.seed = seed;
            train_cfg.optimizer = optimizer_name == "sgd" ? training::Optimizer::kSgd
                                                          : training::Optimizer::kAdam;
            const auto enc_cfg = train_enc.to_config(seed);
            const auto result = training::train(docs, queries, examples, train_cfg, enc_cfg);
            encoder::save_checkpoint(result.params, enc_cfg, train_out);
            if (!train_loss_log.empty())
                training::save_loss_log(result.loss_log, train_loss_log);
        } else if (*encode_cmd) {
            const auto docs = corpus::load_corpus(encode_corpus);
            const auto [params, cfg] = encoder::load_checkpoint(encode_ckpt);
            denseindex::FlatIndex index(cfg.embed_dim);
            for (const auto& doc : docs)
                index.add(doc.doc_id,
                          to_f32_unit(encoder::encode_document(doc.image, params, cfg)));
            index.save(encode_out);
        } else if (*index_cmd) {
            denseindex::FlatIndex::load(index_in).save(index_out);
        } else if (*search_cmd) {
            const auto index = denseindex::FlatIndex::load(search_index);
            const auto [params, cfg] = encoder::load_checkpoint(search_ckpt);
            const auto queries = corpus::load_queries(search_queries);
            std::vector<RunList> runs;
            for (const auto& q : queries)
                runs.push_back(index.search(
                    q.query_id, to_f32_unit(encoder::encode_query(q.text, params, cfg)),
                    search_k));
            eval::save_runs(runs, search_out, "dense");
        } else if (*bm25_cmd) {
            const auto docs = corpus::load_corpus(bm25_corpus);
            const auto queries = corpus::load_queries(bm25_queries);
            const auto index = lexical::InvertedIndex::build(docs);
            std::vector<RunList> runs;
            for (const auto& q : queries)
                runs.push_back(index.search(q.query_id, q.text, bm25_k, bm25_params));
            eval::save_runs(runs, bm25_out, "bm25");
        } else if (*eval_cmd) {
            const auto runs = eval::load_runs(eval_run);
            eval::MetricReport report;
            if (eval_mode == "topk") {
                if (eval_queries.empty() || eval_corpus.empty())
                    throw ConfigError("eval --mode topk requires --queries and --corpus");
                std::vector<int> ks;
                std::stringstream ss(eval_ks);
                std::string item;
                while (std::getline(ss, item, ',')) ks.push_back(std::stoi(item));
                report = eval::topk_accuracy(runs, corpus::load_queries(eval_queries),
                                             corpus::load_corpus(eval_corpus), ks);
            } else {
                if (eval_qrels.empty())
                    throw ConfigError("eval --mode ranked requires --qrels");
                report = eval::ranked_metrics(runs, corpus::load_qrels(eval_qrels), eval_k);
            }
            std::cout << report.to_table();
            if (!eval_out.empty()) report.write_csv(eval_out);
        } else if (*fuse_cmd) {
            const auto dense = eval::load_runs(fuse_dense);
            const auto lexical_runs = eval::load_runs(fuse_lexical);
            std::map<std::string, const RunList*> by_id;
            for (const auto& r : lexical_runs) by_id[r.query_id] = &r;
            std::vector<RunList> fused;
            for (const auto& d : dense) {
                auto it = by_id.find(d.query_id);
                if (it == by_id.end())
                    throw ValidationError("fuse: query \"" + d.query_id +
                                          "\" missing from lexical run");
                fused.push_back(eval::fuse_runs(d, *it->second, fuse_alpha, fuse_pool_k));
            }
            eval::save_runs(fused, fuse_out, "fused");
        } else if (*tp_cmd) {
            auto docs = corpus::load_corpus(tp_corpus);
            if (static_cast<int>(docs.size()) > tp_sample) docs.resize(tp_sample);
            const auto cfg = tp_enc.to_config(seed);
            const auto params = encoder::EncoderParams::init(cfg);
            const auto rows = eval::throughput_report(docs, params, cfg, parse_grids(tp_grids));
            std::cout << "cx,cy,latent_embeddings,docs_per_second\n";
            for (const auto& r : rows)
                std::cout << r.cx << ',' << r.cy << ',' << r.latent_embeddings << ','
                          << r.docs_per_second << '\n';
            if (!tp_out.empty()) eval::write_throughput_csv(rows, tp_out);
        }
    } catch (const ValidationError& e) {
        std::cerr << "error: validation: " << e.what() << '\n';
        return 65;
    } catch (const IoError& e) {
        std::cerr << "error: io: " << e.what() << '\n';
        return 66;
    } catch (const FormatError& e) {
        std::cerr << "error: format: " << e.what() << '\n';
        return 67;
    } catch (const ConfigError& e) {
        std::cerr << "error: config: " << e.what() << '\n';
        return 68;
    } catch (const std::exception& e) {
        std::cerr << "error: internal: " << e.what() << '\n';
        return 70;
    }
    return 0;
}
