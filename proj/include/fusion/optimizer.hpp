#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "fusion/generation.hpp"
#include "fusion/metrics.hpp"
#include "fusion/steering.hpp"

namespace fusion {

enum class Sampler { Random, Tpe };

struct SearchSpace {
    double lower = 0.01;
    double upper = 1.0;
    int n_trials = 5;
    Sampler sampler = Sampler::Random;
    std::uint64_t seed = 0;

    void validate() const;
};

struct TrialRecord {
    int trial_index = 0;
    SteeringConfig config;
    std::string continuation;
    double token_overlap = 0.0;
    double perplexity_normed = 0.0;
    double objective = 0.0;
    bool failed = false;
    std::string error;
};

struct StudyResult {
    std::string prompt_id;
    SteeringMode mode = SteeringMode::FullLayer;
    std::vector<TrialRecord> trials;
    TrialRecord best;  // earliest trial attaining the max objective
};

// Sampled parameters in flat order: FullLayer [alpha, gamma]; Segmented
// [alpha, gamma] per group, early to late.
std::vector<double> flatten_params(const SteeringConfig& config);
SteeringConfig config_from_params(SteeringMode mode, const std::vector<double>& flat);

// Draw one trial's configuration. Random: each parameter is uniform over
// [lower, upper], keyed by (seed, fnv1a(prompt_id), trial_index, parameter
// index) so any trial regenerates independently. Tpe: the first
// max(2, n_trials/2) trials are random; later trials are drawn from a
// width-0.2 normal around the best parameter vector so far, clamped to the
// bounds (best_params empty falls back to random).
SteeringConfig sample_config(const SearchSpace& space, SteeringMode mode,
                             const std::string& prompt_id, int trial_index,
                             const std::optional<std::vector<double>>& best_params =
                                 std::nullopt);

struct TrialEvaluation {
    std::string continuation;
    double token_overlap = 0.0;
    double perplexity_normed = 0.0;
};

using TrialEvaluator =
    std::function<TrialEvaluation(const SteeringConfig& config, int trial_index)>;

// Study mechanics with an injectable evaluator: sample, evaluate, score via
// the optimization metric, argmax with earliest-trial tie-break. A throwing
// evaluator marks that trial failed (objective -inf) and the study
// continues; a study where every trial failed throws.
StudyResult run_trials(const std::string& prompt_id, SteeringMode mode,
                       const SearchSpace& space, double lambda,
                       const TrialEvaluator& evaluate);

// Production study for one prompt: mu and the shift are computed once and
// shared by all trials; each trial builds hooks for its sampled config,
// generates, and is scored against the record's ground truth.
StudyResult run_study(const Weights& weights, const PromptRecord& record,
                      const ReferenceActivations& reference, SteeringMode mode,
                      const SearchSpace& space, const GenerationSettings& settings,
                      double lambda = kDefaultLambda, double ppl_cap = kDefaultPplCap);

}  // namespace fusion
