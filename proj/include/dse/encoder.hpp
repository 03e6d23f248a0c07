#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "dse/patchgrid.hpp"
#include "dse/types.hpp"

namespace dse::encoder {

using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

// Reserved token ids: 0/1 wrap queries, 2/3 are prompt sentinels standing
// in for the fixed image-question template. Hashed tokens start at 4.
inline constexpr int kBeginToken = 0;
inline constexpr int kEndToken = 1;
inline constexpr int kNumReservedTokens = 4;

struct EncoderConfig {
    int embed_dim = 64;
    int vocab_size = 4096;
    int channels = 1;
    std::vector<int> prompt_tokens = {2, 3, 2, kEndToken};
    patchgrid::CropConfig crop;
    int mixer_layers = 1;
    std::uint64_t seed = 0;

    void validate() const;
    int patch_len() const { return crop.patch_side * crop.patch_side * channels; }
};

struct MixerLayer {
    Matrix w_q, w_k, w_v, w_o;  // embed_dim x embed_dim
    Matrix ff1;                 // embed_dim x 4*embed_dim
    Matrix ff2;                 // 4*embed_dim x embed_dim
};

// All trainable tensors. Shapes are fixed by EncoderConfig; the same
// struct doubles as gradient storage.
struct EncoderParams {
    Matrix patch_proj;   // patch_len x embed_dim
    Matrix group_proj;   // concat_group*embed_dim x embed_dim
    Matrix token_table;  // vocab_size x embed_dim
    std::vector<MixerLayer> layers;

    static EncoderParams init(const EncoderConfig& config);
    static EncoderParams zeros_like(const EncoderConfig& config);

    // Visits every tensor in declared (checkpoint) order.
    template <typename Fn>
    void for_each_tensor(Fn&& fn) {
        fn(patch_proj);
        fn(group_proj);
        fn(token_table);
        for (auto& l : layers) {
            fn(l.w_q);
            fn(l.w_k);
            fn(l.w_v);
            fn(l.w_o);
            fn(l.ff1);
            fn(l.ff2);
        }
    }
    std::vector<std::pair<std::string, Matrix*>> named_tensors();
};

// Forward-pass intermediates kept for reverse-mode accumulation.
struct LayerCache {
    Matrix x_in, q, k, v, attn, head, x_mid, ff_pre, ff_act;
};
struct ForwardCache {
    // Document inputs: patches and grouped latents. Empty for queries.
    Matrix patches, grouped;
    std::vector<int> token_ids;  // token positions appended after latents
    int latent_positions = 0;    // sequence positions coming from the image
    Matrix x0;                   // full input sequence
    std::vector<LayerCache> layers;
    Matrix x_out;
    Vector pooled;       // un-normalized final hidden state
    Scalar pooled_norm;  // its L2 norm
};

// Lowercase, split on non-alphanumerics, hash into
// [kNumReservedTokens, vocab_size).
std::vector<int> hash_tokens(const std::string& text, int vocab_size);

Vector encode_document(const PixelGrid& image, const EncoderParams& params,
                       const EncoderConfig& config, ForwardCache* cache = nullptr);
Vector encode_query(const std::string& text, const EncoderParams& params,
                    const EncoderConfig& config, ForwardCache* cache = nullptr);

// Propagates d(loss)/d(normalized embedding) back through the cached
// forward pass, accumulating into `grads` (shapes of EncoderParams).
void backward(const ForwardCache& cache, const Vector& grad_embedding,
              const EncoderParams& params, const EncoderConfig& config,
              EncoderParams& grads);

// Attention of the final (pooled) position over all sequence positions,
// one row per mixer layer. The first `latent_positions` columns are the
// patch-latent positions; each row sums to 1.
Matrix attention_map(const PixelGrid& image, const EncoderParams& params,
                     const EncoderConfig& config);

void save_attention_csv(const Matrix& attn, const std::filesystem::path& path);
Matrix load_attention_csv(const std::filesystem::path& path);

// Checkpoint: "DSE1" magic + config header + little-endian f32 tensors
// in declared order. Round-trips bit-identically.
void save_checkpoint(const EncoderParams& params, const EncoderConfig& config,
                     const std::filesystem::path& path);
std::pair<EncoderParams, EncoderConfig> load_checkpoint(
    const std::filesystem::path& path);

}  // namespace dse::encoder
