#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

#include "fusion/matrix.hpp"
#include "fusion/tokenizer.hpp"

namespace fusion {

struct ModelConfig {
    int n_layers = 12;
    int d_model = 64;
    int n_heads = 4;
    int d_ff = 256;
    int vocab_size = kVocabSize;  // fixed by the tokenizer
    int max_context = 256;
    std::uint64_t seed = 0;

    // Throws ConfigError on any violated invariant.
    void validate() const;
};

struct LayerWeights {
    std::vector<double> attn_norm;  // [d_model]
    Matrix wq, wk, wv, wo;          // [d_model x d_model]
    std::vector<double> mlp_norm;   // [d_model]
    Matrix w1;                      // [d_model x d_ff]
    Matrix w2;                      // [d_ff x d_model]
};

// Immutable after construction; safe to share across concurrent forwards.
struct Weights {
    ModelConfig config;
    Matrix embedding;  // [vocab_size x d_model]; unembedding is tied
    std::vector<LayerWeights> layers;
    std::vector<double> final_norm;  // [d_model]
};

// Deterministic weight generation from config.seed.
//
// Scheme: every random tensor gets a stream id (its position in the
// serialization order below) and element i in row-major order is
// normal_at({seed, stream}, i) / sqrt(d_model). Normalization gains are
// initialized to exactly 1.0 and are not drawn from the stream.
Weights init_weights(const ModelConfig& config);

// Binary weights file: magic "FSW1", little-endian u32 n_layers, d_model,
// n_heads, d_ff, vocab_size, then all tensors as little-endian f64
// row-major in this order: embedding; per layer attn_norm, wq, wk, wv, wo,
// mlp_norm, w1, w2; final_norm.
void save_weights(const Weights& weights, const std::filesystem::path& path);

// max_context and seed are not part of the file format; the caller supplies
// the context limit and the seed is recorded as 0.
Weights load_weights(const std::filesystem::path& path, int max_context = 256);

// Post-hook residual stream per layer: layers[l] is [n_positions x d_model].
struct LayerActivations {
    std::vector<Matrix> layers;
};

// Per-layer optional in-place rewrite of the residual matrix. At most one
// hook per layer; hooks must preserve shape (forward checks).
class HookSet {
public:
    using Hook = std::function<void(Matrix&)>;

    HookSet() = default;
    explicit HookSet(std::size_t n_layers) : hooks_(n_layers) {}

    void set(std::size_t layer, Hook hook);
    bool has(std::size_t layer) const {
        return layer < hooks_.size() && hooks_[layer] != nullptr;
    }
    const Hook& at(std::size_t layer) const { return hooks_[layer]; }
    std::size_t size() const { return hooks_.size(); }

private:
    std::vector<Hook> hooks_;
};

struct ForwardResult {
    Matrix logits;  // [n_positions x vocab_size]
    LayerActivations acts;
};

// Pre-norm decoder stack with causal attention and rotary position
// embeddings. After each block's residual add, the layer's hook (if any)
// rewrites the residual matrix before it feeds the next block; acts records
// the post-hook stream.
ForwardResult forward(const Weights& weights, const TokenSequence& tokens,
                      const HookSet& hooks);

// Same block stack but only the final position's logits are unembedded.
// This is the decode-loop fast path; activations are not retained.
std::vector<double> forward_last_logits(const Weights& weights,
                                        const TokenSequence& tokens,
                                        const HookSet& hooks);

// Mean negative log-probability (natural log) of tokens[1..n-1] given their
// prefixes, with no hooks active.
double sequence_log_likelihood(const Weights& weights, const TokenSequence& tokens);

}  // namespace fusion
