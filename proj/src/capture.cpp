#include "fusion/capture.hpp"

#include "fusion/errors.hpp"

namespace fusion {

void PromptRecord::validate() const {
    if (question.empty()) throw InputError("PromptRecord: empty question");
    if (ground_truth.empty()) throw InputError("PromptRecord: empty ground_truth");
}

EnrichedPrompt build_enriched_prompt(const PromptRecord& record) {
    record.validate();
    EnrichedPrompt out;
    out.text = "Question: " + record.question + "\nAnswer and Explanation: ";
    out.answer_begin = out.text.size();
    out.text += record.ground_truth;
    if (!record.explanation.empty()) {
        out.text += ' ';
        out.text += record.explanation;
    }
    out.answer_end = out.text.size();
    return out;
}

ReferenceActivations capture_reference(const Weights& weights,
                                       const EnrichedPrompt& enriched,
                                       const std::string& prompt_id) {
    const TokenSequence tokens = encode(enriched.text);
    if (tokens.size() > static_cast<std::size_t>(weights.config.max_context)) {
        throw InputError("capture_reference: enriched prompt exceeds max_context");
    }
    if (enriched.answer_begin >= enriched.answer_end) {
        throw InputError("capture_reference: empty answer span");
    }
    const TokenSpan mask =
        span_locate(enriched.text, enriched.answer_begin, enriched.answer_end);

    const ForwardResult fwd = forward(weights, tokens, HookSet{});

    const auto n_layers = fwd.acts.layers.size();
    const auto d = static_cast<std::size_t>(weights.config.d_model);
    ReferenceActivations ref;
    ref.h = Matrix(n_layers, d);
    ref.source_prompt_id = prompt_id;
    ref.mask_size = mask.size();

    for (std::size_t l = 0; l < n_layers; ++l) {
        const Matrix& layer = fwd.acts.layers[l];
        double* out = ref.h.row(l);
        for (std::size_t t = mask.begin; t < mask.end; ++t) {
            const double* row = layer.row(t);
            for (std::size_t j = 0; j < d; ++j) out[j] += row[j];
        }
        const double inv = 1.0 / static_cast<double>(mask.size());
        for (std::size_t j = 0; j < d; ++j) out[j] *= inv;
    }
    return ref;
}

}  // namespace fusion
