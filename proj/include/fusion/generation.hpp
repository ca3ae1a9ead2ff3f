#pragma once

#include <string>

#include "fusion/capture.hpp"
#include "fusion/model.hpp"
#include "fusion/steering.hpp"

namespace fusion {

struct GenerationSettings {
    int max_new_tokens = 100;
    bool stop_on_eos = true;

    void validate() const;
};

// The bare inference prompt: "Question: {question}\nAnswer:". The model sees
// only the question; the enriched template exists solely for capture.
std::string inference_prompt(const PromptRecord& record);

// Greedy decoding: at each step the full forward is recomputed (hooks apply
// to every position), the argmax over the final position's logits is
// appended (ties broken by lowest token id), and decoding stops at EOS, the
// token budget, or the context limit. Returns only the generated tokens.
TokenSequence generate(const Weights& weights, const TokenSequence& prompt_tokens,
                       const HookSet& hooks, const GenerationSettings& settings);

// Generate from the bare question prompt with no hooks and decode to text.
std::string generate_baseline(const Weights& weights, const PromptRecord& record,
                              const GenerationSettings& settings);

// Compute mu from the bare prompt, build the shift and hooks for the given
// config, generate, decode.
std::string generate_steered(const Weights& weights, const PromptRecord& record,
                             const ReferenceActivations& reference,
                             const SteeringConfig& config,
                             const GenerationSettings& settings);

}  // namespace fusion
