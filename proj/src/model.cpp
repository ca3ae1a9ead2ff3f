#include "fusion/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numbers>
#include <string>

#include "fusion/errors.hpp"
#include "fusion/rng.hpp"

namespace fusion {

namespace {

constexpr double kNormEps = 1e-5;
constexpr double kRopeBase = 10000.0;

}  // namespace

void ModelConfig::validate() const {
    if (n_layers < 3) throw ConfigError("ModelConfig: n_layers must be >= 3");
    if (d_model <= 0 || n_heads <= 0 || d_ff <= 0) {
        throw ConfigError("ModelConfig: dimensions must be positive");
    }
    if (d_model % n_heads != 0) {
        throw ConfigError("ModelConfig: d_model must be divisible by n_heads");
    }
    if (vocab_size != kVocabSize) {
        throw ConfigError("ModelConfig: vocab_size is fixed by the tokenizer");
    }
    if (max_context < 2) throw ConfigError("ModelConfig: max_context must be >= 2");
}

namespace {

void fill_normal(Matrix& m, std::uint64_t seed, std::uint64_t stream, double scale) {
    for (std::size_t i = 0; i < m.data.size(); ++i) {
        m.data[i] = normal_at({seed, stream}, i) * scale;
    }
}

}  // namespace

Weights init_weights(const ModelConfig& config) {
    config.validate();
    const auto d = static_cast<std::size_t>(config.d_model);
    const auto dff = static_cast<std::size_t>(config.d_ff);
    const double scale = 1.0 / std::sqrt(static_cast<double>(config.d_model));

    Weights w;
    w.config = config;
    w.embedding = Matrix(static_cast<std::size_t>(config.vocab_size), d);

    std::uint64_t stream = 0;
    fill_normal(w.embedding, config.seed, stream++, scale);

    w.layers.resize(static_cast<std::size_t>(config.n_layers));
    for (auto& layer : w.layers) {
        layer.attn_norm.assign(d, 1.0);
        ++stream;  // gain slot, not drawn
        layer.wq = Matrix(d, d);
        fill_normal(layer.wq, config.seed, stream++, scale);
        layer.wk = Matrix(d, d);
        fill_normal(layer.wk, config.seed, stream++, scale);
        layer.wv = Matrix(d, d);
        fill_normal(layer.wv, config.seed, stream++, scale);
        layer.wo = Matrix(d, d);
        fill_normal(layer.wo, config.seed, stream++, scale);
        layer.mlp_norm.assign(d, 1.0);
        ++stream;
        layer.w1 = Matrix(d, dff);
        fill_normal(layer.w1, config.seed, stream++, scale);
        layer.w2 = Matrix(dff, d);
        fill_normal(layer.w2, config.seed, stream++, scale);
    }
    w.final_norm.assign(d, 1.0);
    return w;
}

namespace {

void write_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) |
           (static_cast<std::uint32_t>(b[3]) << 24);
}

void write_f64s(std::ostream& os, const double* p, std::size_t n) {
    static_assert(std::endian::native == std::endian::little,
                  "byte-swapping writer not implemented");
    os.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n * 8));
}

void read_f64s(std::istream& is, double* p, std::size_t n) {
    static_assert(std::endian::native == std::endian::little,
                  "byte-swapping reader not implemented");
    is.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(n * 8));
}

}  // namespace

void save_weights(const Weights& w, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("save_weights: cannot open " + path.string());
    os.write("FSW1", 4);
    write_u32(os, static_cast<std::uint32_t>(w.config.n_layers));
    write_u32(os, static_cast<std::uint32_t>(w.config.d_model));
    write_u32(os, static_cast<std::uint32_t>(w.config.n_heads));
    write_u32(os, static_cast<std::uint32_t>(w.config.d_ff));
    write_u32(os, static_cast<std::uint32_t>(w.config.vocab_size));
    write_f64s(os, w.embedding.data.data(), w.embedding.data.size());
    for (const auto& l : w.layers) {
        write_f64s(os, l.attn_norm.data(), l.attn_norm.size());
        write_f64s(os, l.wq.data.data(), l.wq.data.size());
        write_f64s(os, l.wk.data.data(), l.wk.data.size());
        write_f64s(os, l.wv.data.data(), l.wv.data.size());
        write_f64s(os, l.wo.data.data(), l.wo.data.size());
        write_f64s(os, l.mlp_norm.data(), l.mlp_norm.size());
        write_f64s(os, l.w1.data.data(), l.w1.data.size());
        write_f64s(os, l.w2.data.data(), l.w2.data.size());
    }
    write_f64s(os, w.final_norm.data(), w.final_norm.size());
    if (!os) throw IoError("save_weights: write failed for " + path.string());
}

Weights load_weights(const std::filesystem::path& path, int max_context) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("load_weights: cannot open " + path.string());
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "FSW1", 4) != 0) {
        throw IoError("load_weights: bad magic in " + path.string());
    }
    ModelConfig cfg;
    cfg.n_layers = static_cast<int>(read_u32(is));
    cfg.d_model = static_cast<int>(read_u32(is));
    cfg.n_heads = static_cast<int>(read_u32(is));
    cfg.d_ff = static_cast<int>(read_u32(is));
    cfg.vocab_size = static_cast<int>(read_u32(is));
    cfg.max_context = max_context;
    cfg.seed = 0;
    cfg.validate();

    const auto d = static_cast<std::size_t>(cfg.d_model);
    const auto dff = static_cast<std::size_t>(cfg.d_ff);
    Weights w;
    w.config = cfg;
    w.embedding = Matrix(static_cast<std::size_t>(cfg.vocab_size), d);
    read_f64s(is, w.embedding.data.data(), w.embedding.data.size());
    w.layers.resize(static_cast<std::size_t>(cfg.n_layers));
    for (auto& l : w.layers) {
        l.attn_norm.resize(d);
        read_f64s(is, l.attn_norm.data(), d);
        l.wq = Matrix(d, d);
        read_f64s(is, l.wq.data.data(), l.wq.data.size());
        l.wk = Matrix(d, d);
        read_f64s(is, l.wk.data.data(), l.wk.data.size());
        l.wv = Matrix(d, d);
        read_f64s(is, l.wv.data.data(), l.wv.data.size());
        l.wo = Matrix(d, d);
        read_f64s(is, l.wo.data.data(), l.wo.data.size());
        l.mlp_norm.resize(d);
        read_f64s(is, l.mlp_norm.data(), d);
        l.w1 = Matrix(d, dff);
        read_f64s(is, l.w1.data.data(), l.w1.data.size());
        l.w2 = Matrix(dff, d);
        read_f64s(is, l.w2.data.data(), l.w2.data.size());
    }
    w.final_norm.resize(d);
    read_f64s(is, w.final_norm.data(), d);
    if (!is) throw IoError("load_weights: truncated file " + path.string());
    return w;
}

void HookSet::set(std::size_t layer, Hook hook) {
    if (layer >= hooks_.size()) {
        throw InputError("HookSet: layer index out of range");
    }
    hooks_[layer] = std::move(hook);
}

namespace {

// out = in * w, with w row-major [K x N]. Accumulates along contiguous rows
// of w and out so the inner loop vectorizes.
void matmul(const Matrix& in, const Matrix& w, Matrix& out) {
    const std::size_t T = in.rows, K = in.cols, N = w.cols;
    for (std::size_t i = 0; i < T; ++i) {
        const double* src = in.row(i);
        double* dst = out.row(i);
        std::fill(dst, dst + N, 0.0);
        for (std::size_t k = 0; k < K; ++k) {
            const double a = src[k];
            const double* wr = w.row(k);
            for (std::size_t j = 0; j < N; ++j) dst[j] += a * wr[j];
        }
    }
}

void rms_norm_rows(const Matrix& in, const std::vector<double>& gain, Matrix& out) {
    const std::size_t T = in.rows, d = in.cols;
    for (std::size_t i = 0; i < T; ++i) {
        const double* src = in.row(i);
        double* dst = out.row(i);
        double ss = 0.0;
        for (std::size_t j = 0; j < d; ++j) ss += src[j] * src[j];
        const double inv = 1.0 / std::sqrt(ss / static_cast<double>(d) + kNormEps);
        for (std::size_t j = 0; j < d; ++j) dst[j] = src[j] * inv * gain[j];
    }
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)); }

struct RopeTable {
    std::size_t half = 0;
    std::vector<double> cos_t, sin_t;  // [T x half]

    RopeTable(std::size_t n_pos, std::size_t head_dim) : half(head_dim / 2) {
        cos_t.resize(n_pos * half);
        sin_t.resize(n_pos * half);
        for (std::size_t p = 0; p < n_pos; ++p) {
            for (std::size_t m = 0; m < half; ++m) {
                const double freq =
                    std::pow(kRopeBase, -2.0 * static_cast<double>(m) /
                                            static_cast<double>(head_dim));
                const double theta = static_cast<double>(p) * freq;
                cos_t[p * half + m] = std::cos(theta);
                sin_t[p * half + m] = std::sin(theta);
            }
        }
    }

    void apply(Matrix& m, std::size_t n_heads, std::size_t head_dim) const {
        for (std::size_t i = 0; i < m.rows; ++i) {
            double* r = m.row(i);
            const double* c = cos_t.data() + i * half;
            const double* s = sin_t.data() + i * half;
            for (std::size_t h = 0; h < n_heads; ++h) {
                double* seg = r + h * head_dim;
                for (std::size_t mi = 0; mi < half; ++mi) {
                    const double a = seg[2 * mi];
                    const double b = seg[2 * mi + 1];
                    seg[2 * mi] = a * c[mi] - b * s[mi];
                    seg[2 * mi + 1] = a * s[mi] + b * c[mi];
                }
            }
        }
    }
};

void causal_attention(const Matrix& q, const Matrix& k, const Matrix& v,
                      std::size_t n_heads, Matrix& out, std::vector<double>& scores) {
    const std::size_t T = q.rows, d = q.cols, hd = d / n_heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
    scores.resize(T);
    for (std::size_t h = 0; h < n_heads; ++h) {
        const std::size_t off = h * hd;
        for (std::size_t i = 0; i < T; ++i) {
            const double* qi = q.row(i) + off;
            double max_s = -std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j <= i; ++j) {
                const double* kj = k.row(j) + off;
                double dot = 0.0;
                for (std::size_t m = 0; m < hd; ++m) dot += qi[m] * kj[m];
                scores[j] = dot * scale;
                max_s = std::max(max_s, scores[j]);
            }
            double denom = 0.0;
            for (std::size_t j = 0; j <= i; ++j) {
                scores[j] = std::exp(scores[j] - max_s);
                denom += scores[j];
            }
            double* oi = out.row(i) + off;
            std::fill(oi, oi + hd, 0.0);
            for (std::size_t j = 0; j <= i; ++j) {
                const double p = scores[j] / denom;
                const double* vj = v.row(j) + off;
                for (std::size_t m = 0; m < hd; ++m) oi[m] += p * vj[m];
            }
        }
    }
}

void add_rows(Matrix& dst, const Matrix& src) {
    for (std::size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += src.data[i];
}

bool all_finite(const Matrix& m) {
    for (double x : m.data) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

// Runs the block stack, leaving the final residual stream in x. acts, when
// non-null, receives the post-hook stream per layer.
void run_blocks(const Weights& w, const TokenSequence& tokens, const HookSet& hooks,
                Matrix& x, LayerActivations* acts) {
    const std::size_t T = tokens.size();
    const auto d = static_cast<std::size_t>(w.config.d_model);
    const auto dff = static_cast<std::size_t>(w.config.d_ff);
    const auto n_heads = static_cast<std::size_t>(w.config.n_heads);

    if (T == 0) throw InputError("forward: empty token sequence");
    if (T > static_cast<std::size_t>(w.config.max_context)) {
        throw InputError("forward: sequence exceeds max_context");
    }

    x = Matrix(T, d);
    for (std::size_t i = 0; i < T; ++i) {
        const TokenId id = tokens.ids[i];
        if (id < 0 || id >= w.config.vocab_size) {
            throw InputError("forward: token id out of vocabulary");
        }
        std::copy_n(w.embedding.row(static_cast<std::size_t>(id)), d, x.row(i));
    }

    RopeTable rope(T, d / n_heads);
    Matrix normed(T, d), q(T, d), k(T, d), v(T, d), attn(T, d), proj(T, d);
    Matrix ff1(T, dff);
    std::vector<double> scores;

    if (acts) acts->layers.resize(w.layers.size());

    for (std::size_t l = 0; l < w.layers.size(); ++l) {
        const LayerWeights& lw = w.layers[l];

        rms_norm_rows(x, lw.attn_norm, normed);
        matmul(normed, lw.wq, q);
        matmul(normed, lw.wk, k);
        matmul(normed, lw.wv, v);
        rope.apply(q, n_heads, d / n_heads);
        rope.apply(k, n_heads, d / n_heads);
        causal_attention(q, k, v, n_heads, attn, scores);
        matmul(attn, lw.wo, proj);
        add_rows(x, proj);

        rms_norm_rows(x, lw.mlp_norm, normed);
        matmul(normed, lw.w1, ff1);
        for (double& t : ff1.data) t = gelu(t);
        matmul(ff1, lw.w2, proj);
        add_rows(x, proj);

        if (hooks.has(l)) {
            hooks.at(l)(x);
            if (x.rows != T || x.cols != d) {
                throw InputError("forward: hook at layer " + std::to_string(l) +
                                 " changed the residual shape");
            }
        }
        if (!all_finite(x)) {
            throw NumericError("forward: non-finite value at layer " +
                               std::to_string(l));
        }
        if (acts) acts->layers[l] = x;
    }
}

void unembed_row(const Weights& w, const double* normed_row, double* logits_row) {
    const auto d = static_cast<std::size_t>(w.config.d_model);
    const auto V = static_cast<std::size_t>(w.config.vocab_size);
    for (std::size_t t = 0; t < V; ++t) {
        const double* e = w.embedding.row(t);
        double dot = 0.0;
        for (std::size_t j = 0; j < d; ++j) dot += normed_row[j] * e[j];
        logits_row[t] = dot;
    }
}

}  // namespace

ForwardResult forward(const Weights& weights, const TokenSequence& tokens,
                      const HookSet& hooks) {
    ForwardResult result;
    Matrix x;
    run_blocks(weights, tokens, hooks, x, &result.acts);

    const std::size_t T = x.rows;
    Matrix normed(T, x.cols);
    rms_norm_rows(x, weights.final_norm, normed);
    result.logits = Matrix(T, static_cast<std::size_t>(weights.config.vocab_size));
    for (std::size_t i = 0; i < T; ++i) {
        unembed_row(weights, normed.row(i), result.logits.row(i));
    }
    if (!all_finite(result.logits)) {
        throw NumericError("forward: non-finite value in logits");
    }
    return result;
}

std::vector<double> forward_last_logits(const Weights& weights,
                                        const TokenSequence& tokens,
                                        const HookSet& hooks) {
    Matrix x;
    run_blocks(weights, tokens, hooks, x, nullptr);

    const std::size_t last = x.rows - 1;
    const auto d = static_cast<std::size_t>(weights.config.d_model);
    std::vector<double> normed(d);
    {
        const double* src = x.row(last);
        double ss = 0.0;
        for (std::size_t j = 0; j < d; ++j) ss += src[j] * src[j];
        const double inv = 1.0 / std::sqrt(ss / static_cast<double>(d) + kNormEps);
        for (std::size_t j = 0; j < d; ++j) normed[j] = src[j] * inv * weights.final_norm[j];
    }
    std::vector<double> logits(static_cast<std::size_t>(weights.config.vocab_size));
    unembed_row(weights, normed.data(), logits.data());
    for (double v : logits) {
        if (!std::isfinite(v)) throw NumericError("forward: non-finite value in logits");
    }
    return logits;
}

double sequence_log_likelihood(const Weights& weights, const TokenSequence& tokens) {
    if (tokens.size() < 2) {
        throw InputError("sequence_log_likelihood: need at least 2 tokens");
    }
    const ForwardResult fwd = forward(weights, tokens, HookSet{});
    const auto V = static_cast<std::size_t>(weights.config.vocab_size);
    double total = 0.0;
    for (std::size_t t = 1; t < tokens.size(); ++t) {
        const double* row = fwd.logits.row(t - 1);
        double max_l = row[0];
        for (std::size_t j = 1; j < V; ++j) max_l = std::max(max_l, row[j]);
        double denom = 0.0;
        for (std::size_t j = 0; j < V; ++j) denom += std::exp(row[j] - max_l);
        const double lse = max_l + std::log(denom);
        total += lse - row[static_cast<std::size_t>(tokens.ids[t])];
    }
    return total / static_cast<double>(tokens.size() - 1);
}

}  // namespace fusion
