#pragma once

#include <memory>
#include <string>

#include "fusion/metrics.hpp"

namespace fusion {

struct FactualityGrade {
    Factuality label = Factuality::Incorrect;
    std::string raw_reply;
};

struct QualityGrade {
    int score = 1;  // 1-5
    bool hallucination = false;
    std::string notes;
    std::string raw_reply;
};

struct GradePair {
    FactualityGrade factuality;
    QualityGrade quality;
};

// Rubric prompts with {question}/{target}/{predicted_answer} and
// {question}/{generated_text}/{ground_truth} substituted. All fields must be
// non-empty.
std::string render_factuality_prompt(const std::string& question,
                                     const std::string& target,
                                     const std::string& predicted);
std::string render_quality_prompt(const std::string& question,
                                  const std::string& generated,
                                  const std::string& ground_truth);

// First non-whitespace character A/B/C (case-insensitive) maps to
// CORRECT/INCORRECT/NOT_ATTEMPTED; anything else is a ParseError carrying
// the raw reply.
FactualityGrade parse_factuality_reply(const std::string& reply);

// score: first standalone 1-5 after a "score" token, falling back to the
// first standalone 1-5 digit anywhere; hallucination: first standalone Y/N
// after "hallucination", skipping the literal "(Y/N)" echo, defaulting to N;
// notes: text after "Notes:".
QualityGrade parse_quality_reply(const std::string& reply);

// Deterministic lexical grading rules keyed on the unigram-recall overlap;
// an offline stand-in for an LLM judge, not a reproduction of one.
GradePair grade_with_stub(const std::string& question, const std::string& predicted,
                          const std::string& ground_truth);

struct RemoteGraderConfig {
    std::string url;    // chat-completions endpoint, e.g. http://host:1234/v1/chat/completions
    std::string api_key;
    std::string model = "grader";
    int max_retries = 3;     // additional attempts after the first failure
    int backoff_ms = 250;    // doubles per retry
    int max_in_flight = 4;
    int connect_timeout_ms = 10000;
    int read_timeout_ms = 60000;
    bool verbose = false;

    // Fills url/api_key from FS_GRADER_URL / FS_GRADER_KEY when unset.
    void apply_env();
};

// Sends each rendered rubric prompt as a single-message chat completion at
// temperature 0 and parses the replies. Transport failures (connect errors,
// 429, 5xx) are retried with exponential backoff; exhausting retries throws
// GradingError. Rubric-level parse failures throw ParseError with the raw
// reply preserved.
GradePair grade_with_remote(const RemoteGraderConfig& config,
                            const std::string& question, const std::string& predicted,
                            const std::string& ground_truth);

class Grader {
public:
    virtual ~Grader() = default;
    virtual GradePair grade(const std::string& question, const std::string& predicted,
                            const std::string& ground_truth) = 0;
};

class StubGrader final : public Grader {
public:
    GradePair grade(const std::string& question, const std::string& predicted,
                    const std::string& ground_truth) override {
        return grade_with_stub(question, predicted, ground_truth);
    }
};

// Bounds concurrent in-flight request pairs to config.max_in_flight.
class RemoteGrader final : public Grader {
public:
    explicit RemoteGrader(RemoteGraderConfig config);
    ~RemoteGrader() override;
    GradePair grade(const std::string& question, const std::string& predicted,
                    const std::string& ground_truth) override;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace fusion
