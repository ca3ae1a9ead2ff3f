#include "fusion/optimizer.hpp"

#include <algorithm>
#include <limits>

#include "fusion/errors.hpp"
#include "fusion/rng.hpp"

namespace fusion {

namespace {

constexpr double kTpeWidth = 0.2;
constexpr std::uint64_t kTpeTag = 0x7065;  // distinct counter stream for proposals

}  // namespace

void SearchSpace::validate() const {
    if (!(lower > 0.0 && lower < upper)) {
        throw ConfigError("SearchSpace: need 0 < lower < upper");
    }
    if (n_trials < 1) throw ConfigError("SearchSpace: n_trials must be >= 1");
}

std::vector<double> flatten_params(const SteeringConfig& config) {
    if (config.mode == SteeringMode::FullLayer) {
        return {config.full.alpha, config.full.gamma};
    }
    std::vector<double> flat;
    flat.reserve(6);
    for (const auto& g : config.groups) {
        flat.push_back(g.alpha);
        flat.push_back(g.gamma);
    }
    return flat;
}

SteeringConfig config_from_params(SteeringMode mode, const std::vector<double>& flat) {
    if (mode == SteeringMode::FullLayer) {
        if (flat.size() != 2) throw ConfigError("config_from_params: expected 2 values");
        return SteeringConfig::full_layer({flat[0], flat[1]});
    }
    if (flat.size() != 6) throw ConfigError("config_from_params: expected 6 values");
    return SteeringConfig::segmented({flat[0], flat[1]}, {flat[2], flat[3]},
                                     {flat[4], flat[5]});
}

SteeringConfig sample_config(const SearchSpace& space, SteeringMode mode,
                             const std::string& prompt_id, int trial_index,
                             const std::optional<std::vector<double>>& best_params) {
    space.validate();
    if (trial_index < 0 || trial_index >= space.n_trials) {
        throw InputError("sample_config: trial_index out of range");
    }
    const std::size_t n_params = (mode == SteeringMode::FullLayer) ? 2 : 6;
    const std::uint64_t prompt_hash = fnv1a64(prompt_id);
    const auto trial = static_cast<std::uint64_t>(trial_index);

    const int n_random = std::max(2, space.n_trials / 2);
    const bool propose = space.sampler == Sampler::Tpe && trial_index >= n_random &&
                         best_params.has_value() && best_params->size() == n_params;

    std::vector<double> flat(n_params);
    for (std::size_t p = 0; p < n_params; ++p) {
        if (propose) {
            const double z = normal_at({space.seed, prompt_hash, trial, kTpeTag}, p);
            flat[p] = std::clamp((*best_params)[p] + kTpeWidth * z, space.lower,
                                 space.upper);
        } else {
            flat[p] = uniform_at({space.seed, prompt_hash, trial}, p, space.lower,
                                 space.upper);
        }
    }
    return config_from_params(mode, flat);
}

StudyResult run_trials(const std::string& prompt_id, SteeringMode mode,
                       const SearchSpace& space, double lambda,
                       const TrialEvaluator& evaluate) {
    space.validate();
    StudyResult study;
    study.prompt_id = prompt_id;
    study.mode = mode;
    study.trials.reserve(static_cast<std::size_t>(space.n_trials));

    std::optional<std::vector<double>> best_params;
    double best_objective = -std::numeric_limits<double>::infinity();
    std::size_t best_index = 0;
    bool any_ok = false;

    for (int t = 0; t < space.n_trials; ++t) {
        TrialRecord trial;
        trial.trial_index = t;
        trial.config = sample_config(space, mode, prompt_id, t, best_params);
        try {
            TrialEvaluation eval = evaluate(trial.config, t);
            trial.continuation = std::move(eval.continuation);
            trial.token_overlap = eval.token_overlap;
            trial.perplexity_normed = eval.perplexity_normed;
            trial.objective =
                optimization_metric(trial.token_overlap, trial.perplexity_normed, lambda);
        } catch (const std::exception& e) {
            trial.failed = true;
            trial.error = e.what();
            trial.objective = -std::numeric_limits<double>::infinity();
        }
        if (!trial.failed && trial.objective > best_objective) {
            best_objective = trial.objective;
            best_index = study.trials.size();
            best_params = flatten_params(trial.config);
        }
        if (!trial.failed) any_ok = true;
        study.trials.push_back(std::move(trial));
    }
    if (!any_ok) throw Error("run_trials: all trials failed for prompt " + prompt_id);
    study.best = study.trials[best_index];
    return study;
}

StudyResult run_study(const Weights& weights, const PromptRecord& record,
                      const ReferenceActivations& reference, SteeringMode mode,
                      const SearchSpace& space, const GenerationSettings& settings,
                      double lambda, double ppl_cap) {
    record.validate();
    settings.validate();
    const TokenSequence prompt = encode(inference_prompt(record));
    const Matrix mu = compute_mu(weights, prompt);
    const ShiftState shift = compute_shift(reference, mu);
    const LayerGrouping grouping = partition_layers(weights.config.n_layers);

    const TrialEvaluator evaluate = [&](const SteeringConfig& config, int) {
        const HookSet hooks = build_hooks(shift, config, grouping);
        const std::string continuation =
            decode(generate(weights, prompt, hooks, settings));
        TrialEvaluation eval;
        eval.continuation = continuation;
        eval.token_overlap = token_overlap(continuation, record.ground_truth);
        eval.perplexity_normed =
            normalized_perplexity(continuation, weights, ppl_cap).normed;
        return eval;
    };
    return run_trials(record.id, mode, space, lambda, evaluate);
}

}  // namespace fusion
