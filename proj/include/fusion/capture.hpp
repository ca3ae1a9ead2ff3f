#pragma once

#include <string>

#include "fusion/model.hpp"
#include "fusion/tokenizer.hpp"

namespace fusion {

struct PromptRecord {
    std::string id;
    std::string question;
    std::string ground_truth;
    std::string explanation;  // may be empty
    std::string topic;        // optional metadata

    // question and ground_truth must be non-empty.
    void validate() const;
};

// The answer-enriched capture prompt plus the byte range of the answer
// region within it.
struct EnrichedPrompt {
    std::string text;
    std::size_t answer_begin = 0;  // byte offsets into text
    std::size_t answer_end = 0;
};

// One pooled reference vector per layer.
struct ReferenceActivations {
    Matrix h;  // [n_layers x d_model]
    std::string source_prompt_id;
    std::size_t mask_size = 0;
};

// "Question: {question}\nAnswer and Explanation: {ground_truth} {explanation}"
// with the trailing " {explanation}" omitted when the explanation is empty.
// The answer span covers exactly the ground_truth (+ explanation) region.
EnrichedPrompt build_enriched_prompt(const PromptRecord& record);

// No-hook forward over the enriched prompt; h[l] is the mean of the layer's
// activations over the token positions of the answer span.
ReferenceActivations capture_reference(const Weights& weights,
                                       const EnrichedPrompt& enriched,
                                       const std::string& prompt_id = {});

}  // namespace fusion
