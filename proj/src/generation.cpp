#include "fusion/generation.hpp"

#include <vector>

#include "fusion/errors.hpp"

namespace fusion {

void GenerationSettings::validate() const {
    if (max_new_tokens < 1) {
        throw ConfigError("GenerationSettings: max_new_tokens must be >= 1");
    }
}

std::string inference_prompt(const PromptRecord& record) {
    return "Question: " + record.question + "\nAnswer:";
}

TokenSequence generate(const Weights& weights, const TokenSequence& prompt_tokens,
                       const HookSet& hooks, const GenerationSettings& settings) {
    settings.validate();
    const auto max_context = static_cast<std::size_t>(weights.config.max_context);
    if (prompt_tokens.empty()) throw InputError("generate: empty prompt");
    if (prompt_tokens.size() + 1 > max_context) {
        throw InputError("generate: no room in context for a new token");
    }

    TokenSequence sequence = prompt_tokens;
    TokenSequence continuation;
    for (int step = 0; step < settings.max_new_tokens; ++step) {
        if (sequence.size() + 1 > max_context) break;
        const std::vector<double> logits = forward_last_logits(weights, sequence, hooks);
        // argmax; strict > keeps the lowest id on ties
        std::size_t best = 0;
        for (std::size_t t = 1; t < logits.size(); ++t) {
            if (logits[t] > logits[best]) best = t;
        }
        const TokenId next = static_cast<TokenId>(best);
        sequence.ids.push_back(next);
        continuation.ids.push_back(next);
        if (settings.stop_on_eos && next == kEos) break;
    }
    return continuation;
}

std::string generate_baseline(const Weights& weights, const PromptRecord& record,
                              const GenerationSettings& settings) {
    record.validate();
    const TokenSequence prompt = encode(inference_prompt(record));
    return decode(generate(weights, prompt, HookSet{}, settings));
}

std::string generate_steered(const Weights& weights, const PromptRecord& record,
                             const ReferenceActivations& reference,
                             const SteeringConfig& config,
                             const GenerationSettings& settings) {
    record.validate();
    config.validate();
    const TokenSequence prompt = encode(inference_prompt(record));
    const Matrix mu = compute_mu(weights, prompt);
    const ShiftState shift = compute_shift(reference, mu);
    const LayerGrouping grouping = partition_layers(weights.config.n_layers);
    const HookSet hooks = build_hooks(shift, config, grouping);
    return decode(generate(weights, prompt, hooks, settings));
}

}  // namespace fusion
