#include "dse/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include <nlohmann/json.hpp>

namespace dse::training {

using json = nlohmann::json;
using encoder::ForwardCache;
using encoder::Matrix;

void TrainingExample::validate() const {
    if (hard_negative_doc_ids.empty())
        throw ValidationError("training example " + query_id + ": no hard negatives");
    for (const auto& id : hard_negative_doc_ids)
        if (id == positive_doc_id)
            throw ValidationError("training example " + query_id +
                                  ": positive listed as hard negative");
}

void TrainingConfig::validate() const {
    if (!(temperature > 0)) throw ConfigError("TrainingConfig: temperature must be > 0");
    if (batch_size < 1) throw ConfigError("TrainingConfig: batch_size must be >= 1");
    if (hard_negs_per_query < 1)
        throw ConfigError("TrainingConfig: hard_negs_per_query must be >= 1");
    if (epochs < 1) throw ConfigError("TrainingConfig: epochs must be >= 1");
}

Scalar cosine_sim(const Vector& a, const Vector& b) {
    if (a.size() != b.size()) throw ConfigError("cosine_sim: dimension mismatch");
    return a.dot(b);
}

Scalar info_nce_loss(Scalar sim_pos, const std::vector<Scalar>& sim_negs,
                     Scalar temperature) {
    if (!(temperature > 0)) throw ConfigError("info_nce_loss: temperature must be > 0");
    Scalar max_s = sim_pos;
    for (Scalar s : sim_negs) max_s = std::max(max_s, s);
    Scalar z = std::exp((sim_pos - max_s) / temperature);
    for (Scalar s : sim_negs) z += std::exp((s - max_s) / temperature);
    return -((sim_pos - max_s) / temperature - std::log(z));
}

std::pair<Scalar, EncoderParams> batch_loss_and_grads(
    const std::vector<TrainingExample>& batch, const BatchData& data,
    const EncoderParams& params, const EncoderConfig& encoder_config,
    const TrainingConfig& train_config) {
    train_config.validate();
    if (batch.empty()) throw ValidationError("batch_loss_and_grads: empty batch");

    // Unique documents in first-appearance order: each example's positive,
    // then its hard negatives.
    std::vector<std::string> doc_ids;
    std::map<std::string, int> doc_index;
    auto add_doc = [&](const std::string& id) {
        if (doc_index.emplace(id, static_cast<int>(doc_ids.size())).second)
            doc_ids.push_back(id);
    };
    for (const auto& ex : batch) {
        ex.validate();
        add_doc(ex.positive_doc_id);
        for (const auto& id : ex.hard_negative_doc_ids) add_doc(id);
    }

    const auto n_docs = static_cast<int>(doc_ids.size());
    const auto n_queries = static_cast<int>(batch.size());

    std::vector<ForwardCache> doc_caches(n_docs), query_caches(n_queries);
    Matrix doc_emb(n_docs, encoder_config.embed_dim);
    Matrix query_emb(n_queries, encoder_config.embed_dim);
    for (int j = 0; j < n_docs; ++j) {
        auto it = data.document_images.find(doc_ids[j]);
        if (it == data.document_images.end())
            throw ValidationError("batch_loss_and_grads: unresolvable doc_id \"" +
                                  doc_ids[j] + "\"");
        doc_emb.row(j) =
            encoder::encode_document(*it->second, params, encoder_config, &doc_caches[j])
                .transpose();
    }
    for (int i = 0; i < n_queries; ++i) {
        auto it = data.query_texts.find(batch[i].query_id);
        if (it == data.query_texts.end())
            throw ValidationError("batch_loss_and_grads: unresolvable query_id \"" +
                                  batch[i].query_id + "\"");
        query_emb.row(i) =
            encoder::encode_query(it->second, params, encoder_config, &query_caches[i])
                .transpose();
    }

    const Scalar tau = train_config.temperature;
    const Matrix sims = query_emb * doc_emb.transpose();  // n_queries x n_docs

    // loss and dLoss/dsims via softmax over all batch documents
    Scalar total_loss = 0;
    Matrix d_sims(n_queries, n_docs);
    for (int i = 0; i < n_queries; ++i) {
        const int pos = doc_index.at(batch[i].positive_doc_id);
        const Scalar max_s = sims.row(i).maxCoeff();
        Scalar z = 0;
        for (int j = 0; j < n_docs; ++j) z += std::exp((sims(i, j) - max_s) / tau);
        total_loss += -((sims(i, pos) - max_s) / tau - std::log(z));
        for (int j = 0; j < n_docs; ++j) {
            const Scalar p = std::exp((sims(i, j) - max_s) / tau) / z;
            d_sims(i, j) = (p - (j == pos ? 1 : 0)) / (tau * n_queries);
        }
    }
    const Scalar mean_loss = total_loss / n_queries;
    if (!std::isfinite(mean_loss))
        throw ValidationError("batch_loss_and_grads: non-finite loss");

    EncoderParams grads = EncoderParams::zeros_like(encoder_config);
    const Matrix d_query = d_sims * doc_emb;             // n_queries x d
    const Matrix d_doc = d_sims.transpose() * query_emb; // n_docs x d
    for (int i = 0; i < n_queries; ++i)
        encoder::backward(query_caches[i], d_query.row(i).transpose(), params,
                          encoder_config, grads);
    for (int j = 0; j < n_docs; ++j)
        encoder::backward(doc_caches[j], d_doc.row(j).transpose(), params,
                          encoder_config, grads);
    return {mean_loss, std::move(grads)};
}

namespace {

std::vector<Matrix*> tensor_list(EncoderParams& p) {
    std::vector<Matrix*> out;
    p.for_each_tensor([&](Matrix& m) { out.push_back(&m); });
    return out;
}

}  // namespace

TrainResult train(const std::vector<DocumentRecord>& corpus,
                  const std::vector<QueryRecord>& queries,
                  const std::vector<TrainingExample>& examples,
                  const TrainingConfig& train_config,
                  const EncoderConfig& encoder_config) {
    train_config.validate();
    if (examples.empty()) throw ValidationError("train: no training examples");

    BatchData data;
    for (const auto& q : queries) data.query_texts[q.query_id] = q.text;
    for (const auto& d : corpus) data.document_images[d.doc_id] = &d.image;

    TrainResult result{EncoderParams::init(encoder_config), {}};
    EncoderParams adam_m = EncoderParams::zeros_like(encoder_config);
    EncoderParams adam_v = EncoderParams::zeros_like(encoder_config);
    auto p_t = tensor_list(result.params);
    auto m_t = tensor_list(adam_m);
    auto v_t = tensor_list(adam_v);

    std::mt19937_64 rng(train_config.seed);
    std::vector<std::size_t> order(examples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    long adam_step = 0;
    for (int epoch = 0; epoch < train_config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        int step = 0;
        for (std::size_t start = 0; start < order.size();
             start += train_config.batch_size) {
            std::vector<TrainingExample> batch;
            for (std::size_t i = start;
                 i < std::min(order.size(), start + train_config.batch_size); ++i) {
                TrainingExample ex = examples[order[i]];
                if (static_cast<int>(ex.hard_negative_doc_ids.size()) >
                    train_config.hard_negs_per_query)
                    ex.hard_negative_doc_ids.resize(train_config.hard_negs_per_query);
                batch.push_back(std::move(ex));
            }

            auto [loss, grads] = batch_loss_and_grads(batch, data, result.params,
                                                      encoder_config, train_config);
            if (!std::isfinite(loss))
                throw ValidationError("train: loss diverged at epoch " +
                                      std::to_string(epoch));
            result.loss_log.push_back({epoch, step, loss});

            auto g_t = tensor_list(grads);
            const Scalar lr = train_config.learning_rate;
            if (train_config.optimizer == Optimizer::kSgd) {
                for (std::size_t t = 0; t < p_t.size(); ++t)
                    *p_t[t] -= lr * *g_t[t];
            } else {
                ++adam_step;
                const Scalar b1 = train_config.adam_beta1;
                const Scalar b2 = train_config.adam_beta2;
                const Scalar bc1 = 1 - std::pow(b1, static_cast<Scalar>(adam_step));
                const Scalar bc2 = 1 - std::pow(b2, static_cast<Scalar>(adam_step));
                for (std::size_t t = 0; t < p_t.size(); ++t) {
                    *m_t[t] = b1 * *m_t[t] + (1 - b1) * *g_t[t];
                    *v_t[t] = b2 * *v_t[t] +
                              (1 - b2) * g_t[t]->array().square().matrix();
                    p_t[t]->array() -=
                        lr * (m_t[t]->array() / bc1) /
                        ((v_t[t]->array() / bc2).sqrt() + train_config.adam_epsilon);
                }
            }
            ++step;
        }
    }
    return result;
}

std::vector<TrainingExample> load_examples(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open training examples: " + path.string());
    std::vector<TrainingExample> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json rec = json::parse(line);
        TrainingExample ex;
        ex.query_id = rec.at("query_id").get<std::string>();
        ex.positive_doc_id = rec.at("positive").get<std::string>();
        ex.hard_negative_doc_ids =
            rec.at("hard_negatives").get<std::vector<std::string>>();
        ex.validate();
        out.push_back(std::move(ex));
    }
    return out;
}

void save_examples(const std::vector<TrainingExample>& examples,
                   const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write training examples: " + path.string());
    for (const auto& ex : examples) {
        json rec{{"query_id", ex.query_id},
                 {"positive", ex.positive_doc_id},
                 {"hard_negatives", ex.hard_negative_doc_ids}};
        out << rec.dump() << '\n';
    }
}

void save_loss_log(const std::vector<LossRecord>& log,
                   const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write loss log: " + path.string());
    out.precision(17);
    out << "epoch,step,loss\n";
    for (const auto& r : log) out << r.epoch << ',' << r.step << ',' << r.loss << '\n';
}

}  // namespace dse::training
