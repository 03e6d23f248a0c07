#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "dse/encoder.hpp"
#include "dse/types.hpp"

namespace dse::training {

using encoder::EncoderConfig;
using encoder::EncoderParams;
using encoder::Vector;

struct TrainingExample {
    std::string query_id;
    std::string positive_doc_id;
    std::vector<std::string> hard_negative_doc_ids;

    void validate() const;
};

enum class Optimizer { kSgd, kAdam };

struct TrainingConfig {
    Scalar temperature = 0.02;
    int batch_size = 16;
    int hard_negs_per_query = 1;  // hard negatives used per example
    int epochs = 1;
    Scalar learning_rate = 1e-3;
    std::uint64_t seed = 0;
    Optimizer optimizer = Optimizer::kAdam;
    Scalar adam_beta1 = 0.9;
    Scalar adam_beta2 = 0.999;
    Scalar adam_epsilon = 1e-8;

    void validate() const;
};

struct LossRecord {
    int epoch;
    int step;
    Scalar loss;
};

Scalar cosine_sim(const Vector& a, const Vector& b);

// -log softmax of sim_pos among {sim_pos} U sim_negs, temperature-scaled,
// computed with max-subtraction.
Scalar info_nce_loss(Scalar sim_pos, const std::vector<Scalar>& sim_negs,
                     Scalar temperature);

// Query text and document lookup used by the loss; the trainer resolves
// ids through this so tests can supply synthetic corpora cheaply.
struct BatchData {
    std::map<std::string, std::string> query_texts;           // query_id -> text
    std::map<std::string, const PixelGrid*> document_images;  // doc_id -> image
};

// Mean InfoNCE over the batch, negatives = own hard negatives plus every
// other example's positive and hard negatives. Gradients accumulate by
// reverse-mode through the full encoder.
std::pair<Scalar, EncoderParams> batch_loss_and_grads(
    const std::vector<TrainingExample>& batch, const BatchData& data,
    const EncoderParams& params, const EncoderConfig& encoder_config,
    const TrainingConfig& train_config);

struct TrainResult {
    EncoderParams params;
    std::vector<LossRecord> loss_log;
};

TrainResult train(const std::vector<DocumentRecord>& corpus,
                  const std::vector<QueryRecord>& queries,
                  const std::vector<TrainingExample>& examples,
                  const TrainingConfig& train_config,
                  const EncoderConfig& encoder_config);

// Line-delimited JSON: {"query_id": str, "positive": str, "hard_negatives": [str]}.
std::vector<TrainingExample> load_examples(const std::filesystem::path& path);
void save_examples(const std::vector<TrainingExample>& examples,
                   const std::filesystem::path& path);

// CSV `epoch,step,loss`.
void save_loss_log(const std::vector<LossRecord>& log,
                   const std::filesystem::path& path);

}  // namespace dse::training
