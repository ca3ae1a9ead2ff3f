#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fusion/model.hpp"

namespace fusion {

inline constexpr double kDefaultLambda = 0.7;
inline constexpr double kDefaultPplCap = 1000.0;

enum class Factuality { Correct, Incorrect, NotAttempted };

std::string_view factuality_name(Factuality f);
std::optional<Factuality> factuality_from_name(std::string_view name);

// Scores for one completion. composite, llm_grade and factuality are filled
// in once the completion is graded.
struct ScoreCard {
    double token_overlap = 0.0;
    double perplexity = 1.0;
    double perplexity_normed = 0.0;
    double optimization_metric = 0.0;
    std::optional<double> composite;
    std::optional<int> llm_grade;  // 1-5
    std::optional<Factuality> factuality;

    bool graded() const { return llm_grade.has_value(); }
};

// Unigram recall of the ground-truth words in the prediction: both strings
// lowercased and split on non-alphanumeric boundaries, multiset
// intersection size over ground-truth word count, clamped to [0, 1].
double token_overlap(const std::string& prediction, const std::string& ground_truth);

// Words as used by token_overlap; exposed for the grading stub.
std::vector<std::string> overlap_words(const std::string& text);

struct PerplexityScore {
    double perplexity = 0.0;
    double normed = 0.0;  // min(1, ln(ppl)/ln(cap))
};

// Perplexity of the continuation under the unsteered model, as a fluency
// proxy. An empty continuation scores (cap, 1), the worst fluency; text
// that encodes past the model's context window is scored on its first
// max_context tokens.
PerplexityScore normalized_perplexity(const std::string& continuation,
                                      const Weights& weights,
                                      double ppl_cap = kDefaultPplCap);

// lambda * overlap - (1 - lambda) * normed.
double optimization_metric(double token_overlap, double perplexity_normed,
                           double lambda);

// 0.5 * overlap + 0.5 * (grade / 5).
double composite_metric(double token_overlap, int llm_grade);

struct DistributionStats {
    double mean = 0.0;
    double median = 0.0;
    double variance = 0.0;  // population variance
};

DistributionStats distribution_stats(std::vector<double> values);

struct ThresholdSummary {
    std::size_t count = 0;
    double accuracy_composite = 0.0;  // composite >= 0.6
    double accuracy_overlap = 0.0;    // overlap >= 0.5
    double accuracy_grade = 0.0;      // grade >= 4
    std::array<std::size_t, 5> grade_histogram{};     // grades 1..5
    std::array<std::size_t, 3> factuality_counts{};   // CORRECT, INCORRECT, NOT_ATTEMPTED
    DistributionStats overlap_stats;
    DistributionStats composite_stats;
};

inline constexpr double kCompositeThreshold = 0.6;
inline constexpr double kOverlapThreshold = 0.5;
inline constexpr int kGradeThreshold = 4;

// All cards must be graded.
ThresholdSummary threshold_accuracies(const std::vector<ScoreCard>& cards);

}  // namespace fusion
