#include "fusion/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>

#include "fusion/errors.hpp"
#include "fusion/tokenizer.hpp"

namespace fusion {

std::string_view factuality_name(Factuality f) {
    switch (f) {
        case Factuality::Correct: return "CORRECT";
        case Factuality::Incorrect: return "INCORRECT";
        case Factuality::NotAttempted: return "NOT_ATTEMPTED";
    }
    return "INCORRECT";
}

std::optional<Factuality> factuality_from_name(std::string_view name) {
    if (name == "CORRECT") return Factuality::Correct;
    if (name == "INCORRECT") return Factuality::Incorrect;
    if (name == "NOT_ATTEMPTED") return Factuality::NotAttempted;
    return std::nullopt;
}

std::vector<std::string> overlap_words(const std::string& text) {
    std::vector<std::string> words;
    std::string current;
    for (unsigned char c : text) {
        if (std::isalnum(c)) {
            current.push_back(static_cast<char>(std::tolower(c)));
        } else if (!current.empty()) {
            words.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) words.push_back(std::move(current));
    return words;
}

double token_overlap(const std::string& prediction, const std::string& ground_truth) {
    if (ground_truth.empty()) throw InputError("token_overlap: empty ground_truth");
    const std::vector<std::string> truth_words = overlap_words(ground_truth);
    if (truth_words.empty()) {
        throw InputError("token_overlap: ground_truth has no words");
    }
    std::map<std::string, std::size_t> available;
    for (const auto& w : overlap_words(prediction)) ++available[w];
    std::size_t hits = 0;
    for (const auto& w : truth_words) {
        auto it = available.find(w);
        if (it != available.end() && it->second > 0) {
            --it->second;
            ++hits;
        }
    }
    const double score = static_cast<double>(hits) / static_cast<double>(truth_words.size());
    return std::clamp(score, 0.0, 1.0);
}

PerplexityScore normalized_perplexity(const std::string& continuation,
                                      const Weights& weights, double ppl_cap) {
    if (ppl_cap <= 1.0) throw ConfigError("normalized_perplexity: cap must be > 1");
    if (continuation.empty()) return PerplexityScore{ppl_cap, 1.0};
    TokenSequence tokens = encode(continuation);
    if (tokens.size() < 2) tokens.ids.push_back(kEos);
    // Sanitized text can re-encode longer than the sequence it was decoded
    // from (U+FFFD is three bytes); score at most one context window.
    const auto max_context = static_cast<std::size_t>(weights.config.max_context);
    if (tokens.size() > max_context) {
        tokens.ids.resize(max_context);
    }
    const double mean_nll = sequence_log_likelihood(weights, tokens);
    const double ppl = std::exp(mean_nll);
    const double normed = std::min(1.0, mean_nll / std::log(ppl_cap));
    return PerplexityScore{ppl, normed};
}

double optimization_metric(double token_overlap, double perplexity_normed,
                           double lambda) {
    if (!(lambda >= 0.0 && lambda <= 1.0)) {
        throw ConfigError("optimization_metric: lambda must be in [0, 1]");
    }
    return lambda * token_overlap - (1.0 - lambda) * perplexity_normed;
}

double composite_metric(double token_overlap, int llm_grade) {
    if (llm_grade < 1 || llm_grade > 5) {
        throw InputError("composite_metric: grade must be in 1..5");
    }
    if (!(token_overlap >= 0.0 && token_overlap <= 1.0)) {
        throw InputError("composite_metric: overlap must lie in [0, 1]");
    }
    return 0.5 * token_overlap + 0.5 * (static_cast<double>(llm_grade) / 5.0);
}

DistributionStats distribution_stats(std::vector<double> values) {
    DistributionStats stats;
    if (values.empty()) return stats;
    const double n = static_cast<double>(values.size());
    double sum = 0.0;
    for (double v : values) sum += v;
    stats.mean = sum / n;
    double ss = 0.0;
    for (double v : values) ss += (v - stats.mean) * (v - stats.mean);
    stats.variance = ss / n;
    std::sort(values.begin(), values.end());
    const std::size_t mid = values.size() / 2;
    stats.median = (values.size() % 2 == 1)
                       ? values[mid]
                       : 0.5 * (values[mid - 1] + values[mid]);
    return stats;
}

ThresholdSummary threshold_accuracies(const std::vector<ScoreCard>& cards) {
    ThresholdSummary summary;
    summary.count = cards.size();
    if (cards.empty()) return summary;

    std::vector<double> overlaps, composites;
    std::size_t n_composite = 0, n_overlap = 0, n_grade = 0;
    for (const auto& card : cards) {
        if (!card.graded() || !card.composite || !card.factuality) {
            throw InputError("threshold_accuracies: ungraded ScoreCard");
        }
        const int grade = *card.llm_grade;
        if (grade < 1 || grade > 5) {
            throw InputError("threshold_accuracies: grade out of range");
        }
        if (*card.composite >= kCompositeThreshold) ++n_composite;
        if (card.token_overlap >= kOverlapThreshold) ++n_overlap;
        if (grade >= kGradeThreshold) ++n_grade;
        ++summary.grade_histogram[static_cast<std::size_t>(grade - 1)];
        ++summary.factuality_counts[static_cast<std::size_t>(*card.factuality)];
        overlaps.push_back(card.token_overlap);
        composites.push_back(*card.composite);
    }
    const double n = static_cast<double>(cards.size());
    summary.accuracy_composite = static_cast<double>(n_composite) / n;
    summary.accuracy_overlap = static_cast<double>(n_overlap) / n;
    summary.accuracy_grade = static_cast<double>(n_grade) / n;
    summary.overlap_stats = distribution_stats(std::move(overlaps));
    summary.composite_stats = distribution_stats(std::move(composites));
    return summary;
}

}  // namespace fusion
