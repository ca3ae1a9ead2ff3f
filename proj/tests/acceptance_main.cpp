// Acceptance runner: one line per criterion, [PASS]/[FAIL] plus timing and a
// short detail. The process exit code is the number of failed criteria, so
// ctest (or a shell) can gate on it directly. Unlike the per-module doctest
// suites, every check here goes through an independent oracle: closed-form
// algebra, brute-force recomputation, or artifact round-trips.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fusion/capture.hpp"
#include "fusion/dataset.hpp"
#include "fusion/generation.hpp"
#include "fusion/grader.hpp"
#include "fusion/metrics.hpp"
#include "fusion/model.hpp"
#include "fusion/optimizer.hpp"
#include "fusion/pipeline.hpp"
#include "fusion/rng.hpp"
#include "fusion/steering.hpp"
#include "fusion/tokenizer.hpp"

namespace {

using namespace fusion;

struct Failure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void require(bool ok, const std::string& message) {
    if (!ok) throw Failure(message);
}

template <typename... Args>
std::string strf(const char* pattern, Args... args) {
    char buf[512];
    std::snprintf(buf, sizeof(buf), pattern, args...);
    return std::string(buf);
}

std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Small-but-realistic generation model: large enough that a strong steering
// shift moves the greedy argmax, small enough that 100-prompt sweeps take
// seconds. The context leaves room for the longest enriched prompt in the
// synthetic dataset.
ModelConfig small_gen_config() {
    ModelConfig config;
    config.n_layers = 4;
    config.d_model = 32;
    config.n_heads = 4;
    config.d_ff = 64;
    config.max_context = 320;
    config.seed = 7;
    return config;
}

// ---------------------------------------------------------------------------
// 1. Fusion algebra: hook output == original + alpha*gamma*(h - mu), and each
//    row moves by exactly alpha*gamma*||h - mu||, over 1,000 random instances.
// ---------------------------------------------------------------------------
std::string c1_fusion_algebra() {
    double max_elem = 0.0;
    double max_norm = 0.0;
    for (std::uint64_t inst = 0; inst < 1000; ++inst) {
        const int n_layers = 3 + static_cast<int>(mix_key({401, inst}) % 5);
        const std::size_t d_model = 4 + mix_key({402, inst}) % 13;
        const std::size_t n_rows = 1 + mix_key({403, inst}) % 8;

        ReferenceActivations ref;
        ref.h = Matrix(static_cast<std::size_t>(n_layers), d_model);
        ref.mask_size = 1;
        Matrix mu(static_cast<std::size_t>(n_layers), d_model);
        for (std::size_t k = 0; k < ref.h.data.size(); ++k) {
            ref.h.data[k] = normal_at({404, inst}, k);
            mu.data[k] = normal_at({405, inst}, k);
        }

        SteeringConfig config;
        if (inst % 2 == 0) {
            config = SteeringConfig::full_layer({uniform_at({406, inst}, 0, 0.0, 1.0),
                                                 uniform_at({406, inst}, 1, 0.01, 5.0)});
        } else {
            config = SteeringConfig::segmented({uniform_at({406, inst}, 2, 0.0, 1.0),
                                                uniform_at({406, inst}, 3, 0.01, 5.0)},
                                               {uniform_at({406, inst}, 4, 0.0, 1.0),
                                                uniform_at({406, inst}, 5, 0.01, 5.0)},
                                               {uniform_at({406, inst}, 6, 0.0, 1.0),
                                                uniform_at({406, inst}, 7, 0.01, 5.0)});
        }
        const LayerGrouping grouping = partition_layers(n_layers);
        const ShiftState shift = compute_shift(ref, mu);
        const HookSet hooks = build_hooks(shift, config, grouping);

        for (std::size_t l = 0; l < static_cast<std::size_t>(n_layers); ++l) {
            Matrix original(n_rows, d_model);
            for (std::size_t k = 0; k < original.data.size(); ++k) {
                original.data[k] = normal_at({407, inst, l}, k);
            }
            Matrix hooked = original;
            if (hooks.has(l)) hooks.at(l)(hooked);

            const SteeringParams params =
                resolve_params(config, grouping, l, static_cast<std::size_t>(n_layers));
            const double scale = params.alpha * params.gamma;
            double delta_norm_sq = 0.0;
            for (std::size_t j = 0; j < d_model; ++j) {
                const double delta = ref.h(l, j) - mu(l, j);
                delta_norm_sq += delta * delta;
            }
            const double expected_row_norm = scale * std::sqrt(delta_norm_sq);

            for (std::size_t r = 0; r < n_rows; ++r) {
                double moved_sq = 0.0;
                for (std::size_t j = 0; j < d_model; ++j) {
                    const double expected =
                        original(r, j) + scale * (ref.h(l, j) - mu(l, j));
                    const double rel = std::abs(hooked(r, j) - expected) /
                                       std::max(1.0, std::abs(expected));
                    max_elem = std::max(max_elem, rel);
                    const double moved = hooked(r, j) - original(r, j);
                    moved_sq += moved * moved;
                }
                const double rel_norm =
                    std::abs(std::sqrt(moved_sq) - expected_row_norm) /
                    std::max(1.0, expected_row_norm);
                max_norm = std::max(max_norm, rel_norm);
            }
        }
    }
    require(max_elem <= 1e-6, strf("element rel err %.3e exceeds 1e-6", max_elem));
    require(max_norm <= 1e-6, strf("row-norm rel err %.3e exceeds 1e-6", max_norm));
    return strf("1000 instances; max element rel err %.1e, max row-norm rel err %.1e",
                max_elem, max_norm);
}

// ---------------------------------------------------------------------------
// 2. Identity degeneracies: alpha=0 (any gamma) and gamma=0 (any alpha) are
//    token-identical to the unhooked baseline on 100 prompts.
// ---------------------------------------------------------------------------
std::string c2_identity_degeneracies() {
    const Weights weights = init_weights(small_gen_config());
    const std::vector<PromptRecord> records = gen_dataset(100, 202);
    GenerationSettings settings;
    settings.max_new_tokens = 16;
    const LayerGrouping grouping = partition_layers(weights.config.n_layers);

    for (std::size_t i = 0; i < records.size(); ++i) {
        const PromptRecord& record = records[i];
        const std::uint64_t key = static_cast<std::uint64_t>(i);
        const TokenSequence prompt = encode(inference_prompt(record));
        const ReferenceActivations ref =
            capture_reference(weights, build_enriched_prompt(record), record.id);
        const ShiftState shift = compute_shift(ref, compute_mu(weights, prompt));
        const double gamma = uniform_at({411, key}, 0, 0.1, 10.0);
        const double alpha = uniform_at({411, key}, 1, 0.1, 1.0);

        const TokenSequence baseline = generate(weights, prompt, HookSet{}, settings);
        const TokenSequence alpha_zero = generate(
            weights, prompt,
            build_hooks(shift, SteeringConfig::full_layer({0.0, gamma}), grouping),
            settings);
        const TokenSequence gamma_zero = generate(
            weights, prompt,
            build_hooks(shift, SteeringConfig::full_layer({alpha, 0.0}), grouping),
            settings);
        require(alpha_zero == baseline,
                strf("alpha=0 diverged from baseline on %s", record.id.c_str()));
        require(gamma_zero == baseline,
                strf("gamma=0 diverged from baseline on %s", record.id.c_str()));
    }
    return "100 prompts; alpha=0 and gamma=0 token-identical to baseline";
}

// ---------------------------------------------------------------------------
// 3. Mode degeneracy: segmented(p, p, p) generates the same tokens as
//    full-layer(p) on 50 prompts.
// ---------------------------------------------------------------------------
std::string c3_mode_degeneracy() {
    const Weights weights = init_weights(small_gen_config());
    const std::vector<PromptRecord> records = gen_dataset(50, 303);
    GenerationSettings settings;
    settings.max_new_tokens = 16;
    const LayerGrouping grouping = partition_layers(weights.config.n_layers);

    for (std::size_t i = 0; i < records.size(); ++i) {
        const PromptRecord& record = records[i];
        const std::uint64_t key = static_cast<std::uint64_t>(i);
        const TokenSequence prompt = encode(inference_prompt(record));
        const ReferenceActivations ref =
            capture_reference(weights, build_enriched_prompt(record), record.id);
        const ShiftState shift = compute_shift(ref, compute_mu(weights, prompt));
        const SteeringParams pair{uniform_at({421, key}, 0, 0.0, 1.0),
                                  uniform_at({421, key}, 1, 0.0, 5.0)};

        const TokenSequence full = generate(
            weights, prompt,
            build_hooks(shift, SteeringConfig::full_layer(pair), grouping), settings);
        const TokenSequence segmented = generate(
            weights, prompt,
            build_hooks(shift, SteeringConfig::segmented(pair, pair, pair), grouping),
            settings);
        require(full == segmented,
                strf("segmented(p,p,p) diverged from full(p) on %s", record.id.c_str()));
    }
    return "50 prompts; segmented(p,p,p) token-identical to full-layer(p)";
}

// ---------------------------------------------------------------------------
// 4. Layer partition: 26 layers split as [0,9), [9,18), [18,26) exactly.
// ---------------------------------------------------------------------------
std::string c4_layer_partition() {
    const LayerGrouping grouping = partition_layers(26);
    const std::array<std::size_t, 4> expected{0, 9, 18, 26};
    require(grouping.bounds == expected,
            strf("bounds {%zu,%zu,%zu,%zu} != {0,9,18,26}", grouping.bounds[0],
                 grouping.bounds[1], grouping.bounds[2], grouping.bounds[3]));
    require(grouping.group_of(0) == 0 && grouping.group_of(8) == 0 &&
                grouping.group_of(9) == 1 && grouping.group_of(17) == 1 &&
                grouping.group_of(18) == 2 && grouping.group_of(25) == 2,
            "group_of misassigns a boundary layer");
    return "26 layers partition as [0,9), [9,18), [18,26)";
}

// ---------------------------------------------------------------------------
// 5. Capture pooling oracle: capture_reference equals a brute-force mean over
//    the answer-span positions of a plain forward, to 1e-12.
// ---------------------------------------------------------------------------
std::string c5_capture_oracle() {
    ModelConfig config;
    config.n_layers = 3;
    config.d_model = 16;
    config.n_heads = 2;
    config.d_ff = 32;
    config.max_context = 320;
    config.seed = 13;
    const Weights weights = init_weights(config);

    const std::vector<PromptRecord> records = gen_dataset(20, 0);
    double max_err = 0.0;
    for (const PromptRecord& record : records) {
        const EnrichedPrompt enriched = build_enriched_prompt(record);
        const ReferenceActivations ref =
            capture_reference(weights, enriched, record.id);
        const TokenSpan span =
            span_locate(enriched.text, enriched.answer_begin, enriched.answer_end);
        require(ref.mask_size == span.size(),
                strf("mask size %zu != span size %zu on %s", ref.mask_size,
                     span.size(), record.id.c_str()));

        const ForwardResult fw = forward(weights, encode(enriched.text), HookSet{});
        for (std::size_t l = 0; l < static_cast<std::size_t>(config.n_layers); ++l) {
            for (std::size_t j = 0; j < static_cast<std::size_t>(config.d_model); ++j) {
                double sum = 0.0;
                for (std::size_t t = span.begin; t < span.end; ++t) {
                    sum += fw.acts.layers[l](t, j);
                }
                const double oracle = sum / static_cast<double>(span.size());
                const double err =
                    std::abs(ref.h(l, j) - oracle) / std::max(1.0, std::abs(oracle));
                max_err = std::max(max_err, err);
            }
        }
    }
    require(max_err <= 1e-12, strf("pooled mean rel err %.3e exceeds 1e-12", max_err));
    return strf("20 enriched prompts; max pooled-mean rel err %.1e", max_err);
}

// ---------------------------------------------------------------------------
// 6. Metric oracles: tabulated values at 1e-9 and exact lambda degeneracies.
// ---------------------------------------------------------------------------
std::string c6_metric_oracles() {
    require(std::abs(optimization_metric(0.8, 0.9, 0.7) - 0.29) <= 1e-9,
            strf("optimization_metric(0.8, 0.9, 0.7) = %.12f, want 0.29",
                 optimization_metric(0.8, 0.9, 0.7)));
    require(std::abs(composite_metric(0.4, 4) - 0.60) <= 1e-9,
            strf("composite_metric(0.4, 4) = %.12f, want 0.60",
                 composite_metric(0.4, 4)));
    require(std::abs(composite_metric(1.0, 5) - 1.0) <= 1e-9,
            "composite_metric(1.0, 5) must be 1.0");
    require(std::abs(composite_metric(0.0, 1) - 0.1) <= 1e-9,
            "composite_metric(0.0, 1) must be 0.1");

    for (std::uint64_t i = 0; i < 100; ++i) {
        const double overlap = uniform_at({431, i}, 0, 0.0, 1.0);
        const double normed = uniform_at({431, i}, 1, 0.0, 1.0);
        require(optimization_metric(overlap, normed, 1.0) == overlap,
                "lambda=1 must return the overlap exactly");
        require(optimization_metric(overlap, normed, 0.0) == -normed,
                "lambda=0 must return minus the normed perplexity exactly");
    }
    return "tabulated values at 1e-9; lambda 1/0 degeneracies exact over 100 draws";
}

bool same_trial(const TrialRecord& a, const TrialRecord& b) {
    return a.trial_index == b.trial_index &&
           flatten_params(a.config) == flatten_params(b.config) &&
           a.continuation == b.continuation && a.token_overlap == b.token_overlap &&
           a.perplexity_normed == b.perplexity_normed && a.objective == b.objective &&
           a.failed == b.failed && a.error == b.error;
}

bool same_study(const StudyResult& a, const StudyResult& b) {
    if (a.prompt_id != b.prompt_id || a.mode != b.mode ||
        a.trials.size() != b.trials.size() || !same_trial(a.best, b.best)) {
        return false;
    }
    for (std::size_t i = 0; i < a.trials.size(); ++i) {
        if (!same_trial(a.trials[i], b.trials[i])) return false;
    }
    return true;
}

// ---------------------------------------------------------------------------
// 7. Optimizer contract: argmax with earliest-trial tie-break, doubling
//    n_trials never hurts under the prefix-stable sampler, and identical
//    seeds reproduce identical studies.
// ---------------------------------------------------------------------------
std::string c7_optimizer_contract() {
    {
        SearchSpace space;
        space.lower = 0.1;
        space.upper = 0.9;
        space.n_trials = 4;
        space.sampler = Sampler::Random;
        space.seed = 5;
        const std::vector<double> overlaps{0.2, 0.7, 0.7, 0.1};
        const StudyResult study = run_trials(
            "acc-tie", SteeringMode::FullLayer, space, 1.0,
            [&](const SteeringConfig&, int trial) {
                return TrialEvaluation{"t" + std::to_string(trial),
                                       overlaps[static_cast<std::size_t>(trial)], 0.0};
            });
        require(study.best.trial_index == 1,
                strf("tie-break picked trial %d, want earliest trial 1",
                     study.best.trial_index));
        require(study.best.objective == 0.7, "best objective must be exactly 0.7");
    }

    const TrialEvaluator evaluator = [](const SteeringConfig& config, int) {
        const std::vector<double> flat = flatten_params(config);
        return TrialEvaluation{"e",
                               0.5 + 0.5 * std::sin(3.1 * flat[0] + 1.7 * flat[1]),
                               0.5 + 0.5 * std::cos(2.3 * flat[0] - 0.9 * flat[1])};
    };
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        SearchSpace space;
        space.lower = 0.05;
        space.upper = 1.0;
        space.sampler = Sampler::Random;
        space.seed = seed;
        space.n_trials = 6;
        const StudyResult six =
            run_trials("acc-seed", SteeringMode::FullLayer, space, 0.7, evaluator);
        double best = -1e300;
        int best_trial = -1;
        for (const TrialRecord& trial : six.trials) {
            if (trial.objective > best) {
                best = trial.objective;
                best_trial = trial.trial_index;
            }
        }
        require(six.best.objective == best && six.best.trial_index == best_trial,
                strf("best is not the earliest argmax at seed %llu",
                     static_cast<unsigned long long>(seed)));

        space.n_trials = 12;
        const StudyResult twelve =
            run_trials("acc-seed", SteeringMode::FullLayer, space, 0.7, evaluator);
        require(twelve.best.objective >= six.best.objective,
                strf("doubling n_trials decreased the best objective at seed %llu",
                     static_cast<unsigned long long>(seed)));
    }

    ModelConfig config;
    config.n_layers = 3;
    config.d_model = 16;
    config.n_heads = 2;
    config.d_ff = 32;
    config.max_context = 320;
    config.seed = 11;
    const Weights weights = init_weights(config);
    const PromptRecord record = gen_dataset(3, 11)[2];
    const ReferenceActivations ref =
        capture_reference(weights, build_enriched_prompt(record), record.id);
    SearchSpace space;
    space.lower = 0.05;
    space.upper = 1.0;
    space.n_trials = 4;
    space.sampler = Sampler::Random;
    space.seed = 3;
    GenerationSettings settings;
    settings.max_new_tokens = 8;
    const StudyResult first =
        run_study(weights, record, ref, SteeringMode::Segmented, space, settings);
    const StudyResult second =
        run_study(weights, record, ref, SteeringMode::Segmented, space, settings);
    require(same_study(first, second),
            "identical seeds did not reproduce an identical study");
    return "earliest-argmax, doubling monotone over 10 seeds, studies reproducible";
}

// ---------------------------------------------------------------------------
// 8. Steering effect: alpha=1, gamma=10 changes at least 90 of 100
//    continuations by >= 1 token.
// ---------------------------------------------------------------------------
std::string c8_steering_effect() {
    const Weights weights = init_weights(small_gen_config());
    const std::vector<PromptRecord> records = gen_dataset(100, 123);
    GenerationSettings settings;
    settings.max_new_tokens = 24;
    const LayerGrouping grouping = partition_layers(weights.config.n_layers);

    int changed = 0;
    for (const PromptRecord& record : records) {
        const TokenSequence prompt = encode(inference_prompt(record));
        const ReferenceActivations ref =
            capture_reference(weights, build_enriched_prompt(record), record.id);
        const ShiftState shift = compute_shift(ref, compute_mu(weights, prompt));
        const HookSet hooks =
            build_hooks(shift, SteeringConfig::full_layer({1.0, 10.0}), grouping);
        const TokenSequence baseline = generate(weights, prompt, HookSet{}, settings);
        const TokenSequence steered = generate(weights, prompt, hooks, settings);
        if (!(baseline == steered)) ++changed;
    }
    require(changed >= 90, strf("only %d/100 continuations changed; need >= 90", changed));
    return strf("alpha=1 gamma=10 changed %d/100 continuations", changed);
}

// ---------------------------------------------------------------------------
// 9. Run determinism: two identical runs produce byte-identical artifacts.
// ---------------------------------------------------------------------------
std::string c9_run_determinism() {
    RunConfig config;
    config.model = small_gen_config();
    config.search.lower = 0.05;
    config.search.upper = 1.0;
    config.search.n_trials = 2;
    config.search.sampler = Sampler::Random;
    config.search.seed = 9;
    config.generation.max_new_tokens = 12;
    config.grader = GraderKind::Stub;
    config.output_dir = "acceptance-run";
    config.workers = 2;
    const std::vector<PromptRecord> records = gen_dataset(4, 77);

    namespace fs = std::filesystem;
    const fs::path base = fs::temp_directory_path() / "fusion-acceptance";
    const fs::path dir_a = base / "det-a";
    const fs::path dir_b = base / "det-b";
    fs::remove_all(dir_a);
    fs::remove_all(dir_b);

    const RunOutput first = run_experiment(config, records);
    write_artifacts(first, config, dir_a.string());
    const RunOutput second = run_experiment(config, records);
    write_artifacts(second, config, dir_b.string());

    for (const char* name :
         {"report.json", "completions.csv", "trials.jsonl", "plotdata.csv"}) {
        require(slurp(dir_a / name) == slurp(dir_b / name),
                strf("%s differs between identical runs", name));
    }
    fs::remove_all(dir_a);
    fs::remove_all(dir_b);
    return "report.json, completions.csv, trials.jsonl, plotdata.csv byte-identical";
}

bool same_stats(const DistributionStats& a, const DistributionStats& b) {
    return a.mean == b.mean && a.median == b.median && a.variance == b.variance;
}

bool same_report(const RunReport& a, const RunReport& b) {
    if (a.prompt_count != b.prompt_count || a.arms.size() != b.arms.size()) {
        return false;
    }
    for (std::size_t i = 0; i < a.arms.size(); ++i) {
        const ArmSummary& x = a.arms[i];
        const ArmSummary& y = b.arms[i];
        if (x.arm != y.arm || x.rows != y.rows || x.ok != y.ok ||
            x.failed != y.failed || x.summary.count != y.summary.count ||
            x.summary.accuracy_composite != y.summary.accuracy_composite ||
            x.summary.accuracy_overlap != y.summary.accuracy_overlap ||
            x.summary.accuracy_grade != y.summary.accuracy_grade ||
            x.summary.grade_histogram != y.summary.grade_histogram ||
            x.summary.factuality_counts != y.summary.factuality_counts ||
            !same_stats(x.summary.overlap_stats, y.summary.overlap_stats) ||
            !same_stats(x.summary.composite_stats, y.summary.composite_stats)) {
            return false;
        }
    }
    return true;
}

// ---------------------------------------------------------------------------
// 10. Desk-scale pipeline: 20 prompts, three arms, 5 trials per steered arm
//     on the default model, single worker, stub grader, in under 10 minutes;
//     the report recomputes exactly from completions.csv.
// ---------------------------------------------------------------------------
std::string c10_desk_scale_pipeline() {
    RunConfig config;  // default model (12 layers, d_model 64), 5 trials, 3 arms
    config.workers = 1;
    config.output_dir = "acceptance-run";
    const std::vector<PromptRecord> records = gen_dataset(20, 0);

    const auto t0 = std::chrono::steady_clock::now();
    const RunOutput output = run_experiment(config, records);
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    require(secs < 600.0, strf("pipeline took %.1fs, budget is 600s", secs));

    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "fusion-acceptance" / "desk";
    fs::remove_all(dir);
    write_artifacts(output, config, dir.string());
    const std::vector<CompletionRow> rows =
        read_completions_csv((dir / "completions.csv").string());
    const RunReport recomputed = report_from_rows(rows);
    require(same_report(recomputed, output.report),
            "report does not recompute exactly from completions.csv");
    std::size_t ok_rows = 0;
    for (const CompletionRow& row : rows) {
        if (row.ok()) ++ok_rows;
    }
    fs::remove_all(dir);
    return strf("20 prompts x 3 arms in %.1fs; %zu/%zu rows ok; report matches CSV",
                secs, ok_rows, rows.size());
}

// ---------------------------------------------------------------------------
// 11. Grader templates and parsers: rubric headers are present verbatim and
//     the reply parsers round-trip, including the refusal mapping.
// ---------------------------------------------------------------------------
std::string c11_grader_contract() {
    const std::string factuality_prompt = render_factuality_prompt(
        "What is the capital of France?", "Paris", "paris");
    require(factuality_prompt.find("You are a factuality grader") != std::string::npos,
            "factuality rubric header missing");
    const std::string quality_prompt = render_quality_prompt(
        "What is the capital of France?", "paris", "Paris");
    require(quality_prompt.find("You are a strict but fair evaluator") !=
                std::string::npos,
            "quality rubric header missing");

    require(parse_factuality_reply("A").label == Factuality::Correct,
            "reply 'A' must parse as CORRECT");
    require(parse_factuality_reply(" b\n").label == Factuality::Incorrect,
            "reply ' b' must parse as INCORRECT");
    require(parse_factuality_reply("C").label == Factuality::NotAttempted,
            "reply 'C' must parse as NOT_ATTEMPTED");
    const QualityGrade quality =
        parse_quality_reply("Score: 4\nHallucination (Y/N): N\nNotes: close enough");
    require(quality.score == 4 && !quality.hallucination &&
                quality.notes == "close enough",
            "structured quality reply did not round-trip");

    const GradePair refusal =
        grade_with_stub("What is the capital of France?", "I don't know.", "Paris");
    require(refusal.factuality.label == Factuality::NotAttempted,
            "\"I don't know.\" must grade as NOT_ATTEMPTED");

    const char* predictions[] = {"Paris", "paris, certainly", "I don't know.",
                                 "the moon", "It is Paris I think"};
    for (const char* predicted : predictions) {
        const GradePair pair = grade_with_stub("What is the capital of France?",
                                               predicted, "Paris");
        require(parse_factuality_reply(pair.factuality.raw_reply).label ==
                    pair.factuality.label,
                strf("stub factuality reply for '%s' does not parse back", predicted));
        const QualityGrade round = parse_quality_reply(pair.quality.raw_reply);
        require(round.score == pair.quality.score &&
                    round.hallucination == pair.quality.hallucination,
                strf("stub quality reply for '%s' does not parse back", predicted));
    }
    return "rubric headers verbatim; parsers round-trip; refusal maps to NOT_ATTEMPTED";
}

}  // namespace

int main() {
    struct Criterion {
        const char* name;
        std::function<std::string()> run;
    };
    const std::vector<Criterion> criteria{
        {"fusion algebra", c1_fusion_algebra},
        {"identity degeneracies", c2_identity_degeneracies},
        {"mode degeneracy", c3_mode_degeneracy},
        {"layer partition", c4_layer_partition},
        {"capture pooling oracle", c5_capture_oracle},
        {"metric oracles", c6_metric_oracles},
        {"optimizer contract", c7_optimizer_contract},
        {"steering effect", c8_steering_effect},
        {"run determinism", c9_run_determinism},
        {"desk-scale pipeline", c10_desk_scale_pipeline},
        {"grader templates & parsers", c11_grader_contract},
    };

    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        std::string detail;
        bool ok = true;
        try {
            detail = criteria[i].run();
        } catch (const std::exception& e) {
            ok = false;
            detail = e.what();
        }
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                .count();
        std::printf("[%s] %2zu. %-26s (%7.2fs) %s\n", ok ? "PASS" : "FAIL", i + 1,
                    criteria[i].name, secs, detail.c_str());
        std::fflush(stdout);
        if (!ok) ++failures;
    }
    std::printf("%zu/%zu criteria passed\n", criteria.size() - failures,
                criteria.size());
    return failures;
}
