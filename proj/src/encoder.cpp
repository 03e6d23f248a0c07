#include "dse/encoder.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

namespace dse::encoder {

void EncoderConfig::validate() const {
    if (embed_dim < 2) throw ConfigError("EncoderConfig: embed_dim must be >= 2");
    if (mixer_layers < 1) throw ConfigError("EncoderConfig: mixer_layers must be >= 1");
    if (vocab_size <= kNumReservedTokens)
        throw ConfigError("EncoderConfig: vocab_size too small");
    if (prompt_tokens.empty())
        throw ConfigError("EncoderConfig: prompt_tokens must be nonempty");
    for (int t : prompt_tokens)
        if (t < 0 || t >= vocab_size)
            throw ConfigError("EncoderConfig: prompt token id out of range");
    if (channels != 1 && channels != 3)
        throw ConfigError("EncoderConfig: channels must be 1 or 3");
    crop.validate();
}

namespace {

void fill_uniform(Matrix& m, std::mt19937_64& rng) {
    const Scalar bound = Scalar{1} / std::sqrt(static_cast<Scalar>(m.rows()));
    std::uniform_real_distribution<Scalar> dist(-bound, bound);
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = dist(rng);
}

EncoderParams make_shaped(const EncoderConfig& cfg) {
    cfg.validate();
    const int d = cfg.embed_dim;
    EncoderParams p;
    p.patch_proj.setZero(cfg.patch_len(), d);
    p.group_proj.setZero(cfg.crop.concat_group * d, d);
    p.token_table.setZero(cfg.vocab_size, d);
    p.layers.resize(cfg.mixer_layers);
    for (auto& l : p.layers) {
        l.w_q.setZero(d, d);
        l.w_k.setZero(d, d);
        l.w_v.setZero(d, d);
        l.w_o.setZero(d, d);
        l.ff1.setZero(d, 4 * d);
        l.ff2.setZero(4 * d, d);
    }
    return p;
}

}  // namespace

EncoderParams EncoderParams::init(const EncoderConfig& config) {
    EncoderParams p = make_shaped(config);
    std::mt19937_64 rng(config.seed);
    p.for_each_tensor([&](Matrix& m) { fill_uniform(m, rng); });
    return p;
}

EncoderParams EncoderParams::zeros_like(const EncoderConfig& config) {
    return make_shaped(config);
}

std::vector<std::pair<std::string, Matrix*>> EncoderParams::named_tensors() {
    std::vector<std::pair<std::string, Matrix*>> out = {
        {"patch_proj", &patch_proj},
        {"group_proj", &group_proj},
        {"token_table", &token_table}};
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const std::string prefix = "layer" + std::to_string(i) + ".";
        out.emplace_back(prefix + "w_q", &layers[i].w_q);
        out.emplace_back(prefix + "w_k", &layers[i].w_k);
        out.emplace_back(prefix + "w_v", &layers[i].w_v);
        out.emplace_back(prefix + "w_o", &layers[i].w_o);
        out.emplace_back(prefix + "ff1", &layers[i].ff1);
        out.emplace_back(prefix + "ff2", &layers[i].ff2);
    }
    return out;
}

std::vector<int> hash_tokens(const std::string& text, int vocab_size) {
    std::vector<int> ids;
    const int buckets = vocab_size - kNumReservedTokens;
    std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
    bool in_token = false;
    auto flush = [&] {
        if (in_token) {
            ids.push_back(kNumReservedTokens + static_cast<int>(h % buckets));
            h = 1469598103934665603ULL;
            in_token = false;
        }
    };
    for (unsigned char c : text) {
        if (std::isalnum(c)) {
            h = (h ^ static_cast<std::uint64_t>(std::tolower(c))) * 1099511628211ULL;
            in_token = true;
        } else {
            flush();
        }
    }
    flush();
    return ids;
}

namespace {

// Causal single-head attention + tanh feed-forward, both residual.
Matrix mixer_forward(const Matrix& x0, const EncoderParams& params,
                     std::vector<LayerCache>* caches) {
    const auto t = x0.rows();
    const Scalar inv_sqrt_d = Scalar{1} / std::sqrt(static_cast<Scalar>(x0.cols()));
    Matrix x = x0;
    for (const auto& l : params.layers) {
        LayerCache c;
        c.x_in = x;
        c.q.noalias() = x * l.w_q;
        c.k.noalias() = x * l.w_k;
        c.v.noalias() = x * l.w_v;
        c.attn.setZero(t, t);
        for (Eigen::Index i = 0; i < t; ++i) {
            // softmax over positions <= i, max-subtracted
            Scalar max_s = -std::numeric_limits<Scalar>::infinity();
            for (Eigen::Index j = 0; j <= i; ++j) {
                const Scalar s = c.q.row(i).dot(c.k.row(j)) * inv_sqrt_d;
                c.attn(i, j) = s;
                max_s = std::max(max_s, s);
            }
            Scalar z = 0;
            for (Eigen::Index j = 0; j <= i; ++j) {
                c.attn(i, j) = std::exp(c.attn(i, j) - max_s);
                z += c.attn(i, j);
            }
            for (Eigen::Index j = 0; j <= i; ++j) c.attn(i, j) /= z;
        }
        c.head.noalias() = c.attn * c.v;
        c.x_mid = x + c.head * l.w_o;
        c.ff_pre.noalias() = c.x_mid * l.ff1;
        c.ff_act = c.ff_pre.array().tanh();
        x = c.x_mid + c.ff_act * l.ff2;
        if (caches) caches->push_back(std::move(c));
    }
    return x;
}

Vector pool_and_normalize(const Matrix& x_out, ForwardCache* cache) {
    const Vector pooled = x_out.row(x_out.rows() - 1).transpose();
    const Scalar norm = pooled.norm();
    if (!(norm > 0) || !std::isfinite(norm))
        throw ConfigError("encoder: degenerate pooled vector");
    if (cache) {
        cache->pooled = pooled;
        cache->pooled_norm = norm;
    }
    return pooled / norm;
}

Vector run_sequence(Matrix x0, const EncoderParams& params, ForwardCache* cache) {
    std::vector<LayerCache> caches;
    Matrix x_out = mixer_forward(x0, params, cache ? &caches : nullptr);
    if (cache) {
        cache->x0 = std::move(x0);
        cache->layers = std::move(caches);
        cache->x_out = x_out;
    }
    return pool_and_normalize(x_out, cache);
}

}  // namespace

Vector encode_document(const PixelGrid& image, const EncoderParams& params,
                       const EncoderConfig& config, ForwardCache* cache) {
    if (params.patch_proj.rows() != config.patch_len() ||
        params.patch_proj.cols() != config.embed_dim)
        throw ConfigError("encode_document: params do not match config");
    if (image.channels != config.channels)
        throw ConfigError("encode_document: channel count mismatch");

    const Matrix patches = patchgrid::crop_and_patch(image, config.crop);
    const Matrix latents = patches * params.patch_proj;

    const int g = config.crop.concat_group;
    const int d = config.embed_dim;
    const int n_groups = static_cast<int>(latents.rows()) / g;
    Matrix grouped(n_groups, g * d);
    for (int i = 0; i < n_groups; ++i)
        for (int j = 0; j < g; ++j)
            grouped.block(i, j * d, 1, d) = latents.row(i * g + j);

    const auto n_prompt = static_cast<int>(config.prompt_tokens.size());
    Matrix x0(n_groups + n_prompt, d);
    x0.topRows(n_groups).noalias() = grouped * params.group_proj;
    for (int i = 0; i < n_prompt; ++i)
        x0.row(n_groups + i) = params.token_table.row(config.prompt_tokens[i]);

    if (cache) {
        cache->patches = patches;
        cache->grouped = grouped;
        cache->token_ids = config.prompt_tokens;
        cache->latent_positions = n_groups;
    }
    return run_sequence(std::move(x0), params, cache);
}

Vector encode_query(const std::string& text, const EncoderParams& params,
                    const EncoderConfig& config, ForwardCache* cache) {
    if (params.token_table.rows() != config.vocab_size ||
        params.token_table.cols() != config.embed_dim)
        throw ConfigError("encode_query: params do not match config");

    std::vector<int> ids = {kBeginToken};
    for (int t : hash_tokens(text, config.vocab_size)) ids.push_back(t);
    ids.push_back(kEndToken);

    Matrix x0(static_cast<Eigen::Index>(ids.size()), config.embed_dim);
    for (std::size_t i = 0; i < ids.size(); ++i)
        x0.row(static_cast<Eigen::Index>(i)) = params.token_table.row(ids[i]);

    if (cache) {
        cache->token_ids = ids;
        cache->latent_positions = 0;
    }
    return run_sequence(std::move(x0), params, cache);
}

void backward(const ForwardCache& cache, const Vector& grad_embedding,
              const EncoderParams& params, const EncoderConfig& config,
              EncoderParams& grads) {
    const auto t = cache.x_out.rows();
    const int d = config.embed_dim;
    const Scalar inv_sqrt_d = Scalar{1} / std::sqrt(static_cast<Scalar>(d));

    // normalize: y = h/|h|;  dh = (g - y (y.g)) / |h|
    const Vector y = cache.pooled / cache.pooled_norm;
    const Vector d_pooled =
        (grad_embedding - y * y.dot(grad_embedding)) / cache.pooled_norm;

    Matrix dx = Matrix::Zero(t, d);
    dx.row(t - 1) = d_pooled.transpose();

    for (auto li = static_cast<std::ptrdiff_t>(params.layers.size()) - 1; li >= 0;
         --li) {
        const auto& l = params.layers[li];
        const auto& c = cache.layers[li];
        auto& gl = grads.layers[li];

        // feed-forward residual
        const Matrix d_ff_act = dx * l.ff2.transpose();
        gl.ff2.noalias() += c.ff_act.transpose() * dx;
        const Matrix d_ff_pre =
            d_ff_act.array() * (1 - c.ff_act.array().square());
        Matrix d_x_mid = dx;
        d_x_mid.noalias() += d_ff_pre * l.ff1.transpose();
        gl.ff1.noalias() += c.x_mid.transpose() * d_ff_pre;

        // attention residual
        const Matrix d_head = d_x_mid * l.w_o.transpose();
        gl.w_o.noalias() += c.head.transpose() * d_x_mid;
        const Matrix d_attn_full = d_head * c.v.transpose();
        const Matrix d_v = c.attn.transpose() * d_head;

        Matrix d_scores = Matrix::Zero(t, t);
        for (Eigen::Index i = 0; i < t; ++i) {
            Scalar dot = 0;
            for (Eigen::Index j = 0; j <= i; ++j)
                dot += d_attn_full(i, j) * c.attn(i, j);
            for (Eigen::Index j = 0; j <= i; ++j)
                d_scores(i, j) = c.attn(i, j) * (d_attn_full(i, j) - dot);
        }
        const Matrix d_q = d_scores * c.k * inv_sqrt_d;
        const Matrix d_k = d_scores.transpose() * c.q * inv_sqrt_d;

        gl.w_q.noalias() += c.x_in.transpose() * d_q;
        gl.w_k.noalias() += c.x_in.transpose() * d_k;
        gl.w_v.noalias() += c.x_in.transpose() * d_v;

        dx = d_x_mid;
        dx.noalias() += d_q * l.w_q.transpose();
        dx.noalias() += d_k * l.w_k.transpose();
        dx.noalias() += d_v * l.w_v.transpose();
    }

    // input embeddings
    const int n_latent = cache.latent_positions;
    for (std::size_t i = 0; i < cache.token_ids.size(); ++i)
        grads.token_table.row(cache.token_ids[i]) +=
            dx.row(n_latent + static_cast<Eigen::Index>(i));

    if (n_latent > 0) {
        const Matrix d_latent_out = dx.topRows(n_latent);
        grads.group_proj.noalias() += cache.grouped.transpose() * d_latent_out;
        const Matrix d_grouped = d_latent_out * params.group_proj.transpose();

        const int g = config.crop.concat_group;
        Matrix d_latents(static_cast<Eigen::Index>(n_latent) * g, d);
        for (int i = 0; i < n_latent; ++i)
            for (int j = 0; j < g; ++j)
                d_latents.row(static_cast<Eigen::Index>(i) * g + j) =
                    d_grouped.block(i, j * d, 1, d);
        grads.patch_proj.noalias() += cache.patches.transpose() * d_latents;
    }
}

Matrix attention_map(const PixelGrid& image, const EncoderParams& params,
                     const EncoderConfig& config) {
    ForwardCache cache;
    encode_document(image, params, config, &cache);
    const auto t = cache.x_out.rows();
    Matrix out(static_cast<Eigen::Index>(cache.layers.size()), t);
    for (std::size_t li = 0; li < cache.layers.size(); ++li)
        out.row(static_cast<Eigen::Index>(li)) = cache.layers[li].attn.row(t - 1);
    return out;
}

void save_attention_csv(const Matrix& attn, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write attention csv: " + path.string());
    out.precision(17);
    for (Eigen::Index i = 0; i < attn.rows(); ++i) {
        for (Eigen::Index j = 0; j < attn.cols(); ++j)
            out << (j ? "," : "") << attn(i, j);
        out << '\n';
    }
}

Matrix load_attention_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read attention csv: " + path.string());
    std::vector<std::vector<Scalar>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<Scalar> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw FormatError("empty attention csv: " + path.string());
    Matrix m(static_cast<Eigen::Index>(rows.size()),
             static_cast<Eigen::Index>(rows[0].size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != rows[0].size())
            throw FormatError("ragged attention csv: " + path.string());
        for (std::size_t j = 0; j < rows[i].size(); ++j)
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
    return m;
}

namespace {

constexpr char kCheckpointMagic[4] = {'D', 'S', 'E', '1'};
constexpr std::uint32_t kCheckpointVersion = 1;

void write_u32(std::ostream& out, std::uint32_t v) {
    char b[4] = {static_cast<char>(v), static_cast<char>(v >> 8),
                 static_cast<char>(v >> 16), static_cast<char>(v >> 24)};
    out.write(b, 4);
}

std::uint32_t read_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw FormatError("checkpoint: truncated header");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) |
           (static_cast<std::uint32_t>(b[3]) << 24);
}

void write_tensor_f32(std::ostream& out, const Matrix& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            const float f = static_cast<float>(m(i, j));
            std::uint32_t bits;
            std::memcpy(&bits, &f, 4);
            write_u32(out, bits);
        }
}

void read_tensor_f32(std::istream& in, Matrix& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            const std::uint32_t bits = read_u32(in);
            float f;
            std::memcpy(&f, &bits, 4);
            m(i, j) = static_cast<Scalar>(f);
        }
}

}  // namespace

void save_checkpoint(const EncoderParams& params, const EncoderConfig& config,
                     const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write checkpoint: " + path.string());
    out.write(kCheckpointMagic, 4);
    write_u32(out, kCheckpointVersion);
    write_u32(out, static_cast<std::uint32_t>(config.embed_dim));
    write_u32(out, static_cast<std::uint32_t>(config.vocab_size));
    write_u32(out, static_cast<std::uint32_t>(config.channels));
    write_u32(out, static_cast<std::uint32_t>(config.crop.cx));
    write_u32(out, static_cast<std::uint32_t>(config.crop.cy));
    write_u32(out, static_cast<std::uint32_t>(config.crop.base_side));
    write_u32(out, static_cast<std::uint32_t>(config.crop.patch_side));
    write_u32(out, static_cast<std::uint32_t>(config.crop.concat_group));
    write_u32(out, static_cast<std::uint32_t>(config.mixer_layers));
    write_u32(out, static_cast<std::uint32_t>(config.prompt_tokens.size()));
    for (int t : config.prompt_tokens) write_u32(out, static_cast<std::uint32_t>(t));
    const_cast<EncoderParams&>(params).for_each_tensor(
        [&](Matrix& m) { write_tensor_f32(out, m); });
}

std::pair<EncoderParams, EncoderConfig> load_checkpoint(
    const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint: " + path.string());
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kCheckpointMagic, 4) != 0)
        throw FormatError("checkpoint: bad magic");
    if (read_u32(in) != kCheckpointVersion)
        throw FormatError("checkpoint: unsupported version");
    EncoderConfig cfg;
    cfg.embed_dim = static_cast<int>(read_u32(in));
    cfg.vocab_size = static_cast<int>(read_u32(in));
    cfg.channels = static_cast<int>(read_u32(in));
    cfg.crop.cx = static_cast<int>(read_u32(in));
    cfg.crop.cy = static_cast<int>(read_u32(in));
    cfg.crop.base_side = static_cast<int>(read_u32(in));
    cfg.crop.patch_side = static_cast<int>(read_u32(in));
    cfg.crop.concat_group = static_cast<int>(read_u32(in));
    cfg.mixer_layers = static_cast<int>(read_u32(in));
    const auto n_prompt = read_u32(in);
    cfg.prompt_tokens.clear();
    for (std::uint32_t i = 0; i < n_prompt; ++i)
        cfg.prompt_tokens.push_back(static_cast<int>(read_u32(in)));
    cfg.validate();

    EncoderParams params = EncoderParams::zeros_like(cfg);
    params.for_each_tensor([&](Matrix& m) { read_tensor_f32(in, m); });
    char extra;
    if (in.read(&extra, 1))
        throw FormatError("checkpoint: trailing bytes");
    return {std::move(params), std::move(cfg)};
}

}  // namespace dse::encoder
