#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fusion/capture.hpp"
#include "fusion/generation.hpp"
#include "fusion/grader.hpp"
#include "fusion/metrics.hpp"
#include "fusion/model.hpp"
#include "fusion/optimizer.hpp"

namespace fusion {

enum class Arm { Baseline, Full, Segmented };

std::string_view arm_name(Arm arm);
std::optional<Arm> arm_from_name(std::string_view name);

enum class GraderKind { Stub, Remote };

std::string_view grader_kind_name(GraderKind kind);
std::optional<GraderKind> grader_kind_from_name(std::string_view name);

struct RunConfig {
    ModelConfig model;
    SearchSpace search;
    double lambda = kDefaultLambda;
    GenerationSettings generation;
    std::vector<Arm> arms{Arm::Baseline, Arm::Full, Arm::Segmented};
    GraderKind grader = GraderKind::Stub;
    std::string output_dir = "out";
    double ppl_cap = kDefaultPplCap;
    std::size_t workers = 0;  // 0 = one worker per available core
    RemoteGraderConfig remote;

    // arms non-empty and duplicate-free, lambda in [0, 1], ppl_cap > 1,
    // plus the nested model/search/generation invariants.
    void validate() const;
};

// JSON config mirroring RunConfig; unknown keys are rejected, missing keys
// take the defaults above. The remote api_key is accepted on input but
// never serialized back (secrets stay out of artifacts).
RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::string& path);
std::string run_config_to_json(const RunConfig& config);

// One completions.csv row. Failed rows keep status="failed" with the error
// message and leave every score column empty, so downstream filtering is a
// column query rather than a guess.
struct CompletionRow {
    std::string prompt_id;
    Arm arm = Arm::Baseline;
    std::string status = "ok";  // "ok" | "failed"
    std::string question;
    std::string ground_truth;
    std::string completion;
    double overlap = 0.0;
    double ppl_normed = 0.0;
    int grade = 0;  // 1-5
    Factuality factuality = Factuality::Incorrect;
    bool hallucination = false;
    double composite = 0.0;
    std::string error;

    bool ok() const { return status == "ok"; }
};

// One optimizer trial in trials.jsonl.
struct TrialRow {
    std::string prompt_id;
    Arm arm = Arm::Full;
    TrialRecord record;
    bool is_best = false;
};

struct ArmSummary {
    Arm arm = Arm::Baseline;
    std::size_t rows = 0;
    std::size_t ok = 0;
    std::size_t failed = 0;
    ThresholdSummary summary;  // over the ok rows only
};

struct RunReport {
    std::size_t prompt_count = 0;
    std::vector<ArmSummary> arms;  // canonical order: baseline, full, segmented
};

// Pure fold over completion rows; the report never looks at anything else,
// which is what lets `report` recompute it from the CSV byte-exactly.
RunReport report_from_rows(const std::vector<CompletionRow>& rows);

struct RunOutput {
    std::vector<CompletionRow> rows;  // ordered by (prompt index, arm)
    std::vector<TrialRow> trials;     // ordered by (prompt index, arm, trial)
    RunReport report;
};

// Full experiment: shared weights from config.model, reference captured
// once per prompt (only when a steered arm is requested), baseline
// generation and/or per-arm studies, grading, and the report fold. Prompts
// are distributed over a bounded worker pool; results are assembled in
// prompt order so the output is independent of scheduling.
RunOutput run_experiment(const RunConfig& config,
                         const std::vector<PromptRecord>& records);

// Wall-clock details for meta.json; everything inside the deterministic
// artifacts is timestamp-free.
struct RunMeta {
    std::string started_at;
    std::string finished_at;
    double duration_seconds = 0.0;
};

std::string iso8601_utc_now();

// Writes report.json, completions.csv, trials.jsonl, plotdata.csv, and
// meta.json into output_dir (created if missing).
void write_artifacts(const RunOutput& output, const RunConfig& config,
                     const std::string& output_dir, const RunMeta& meta = {});

std::vector<CompletionRow> read_completions_csv(const std::string& path);

// Re-folds completions.csv in run_dir and rewrites report.json and
// plotdata.csv (preserving the existing config echo). Returns the report.
RunReport recompute_report(const std::string& run_dir);

// Re-grades every ok row of completions.csv with the given grader, rewrites
// the CSV, and recomputes the report files.
RunReport regrade_completions(const std::string& run_dir, Grader& grader);

// Shortest decimal form that parses back to the identical double; used for
// every floating-point value written to CSV.
std::string format_double(double value);

}  // namespace fusion
