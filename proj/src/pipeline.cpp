#include "fusion/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include "fusion/dataset.hpp"
#include "fusion/errors.hpp"
#include "json.hpp"

namespace fusion {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

std::string_view arm_name(Arm arm) {
    switch (arm) {
        case Arm::Baseline: return "baseline";
        case Arm::Full: return "full";
        case Arm::Segmented: return "segmented";
    }
    return "baseline";
}

std::optional<Arm> arm_from_name(std::string_view name) {
    if (name == "baseline") return Arm::Baseline;
    if (name == "full") return Arm::Full;
    if (name == "segmented") return Arm::Segmented;
    return std::nullopt;
}

std::string_view grader_kind_name(GraderKind kind) {
    return kind == GraderKind::Stub ? "stub" : "remote";
}

std::optional<GraderKind> grader_kind_from_name(std::string_view name) {
    if (name == "stub") return GraderKind::Stub;
    if (name == "remote") return GraderKind::Remote;
    return std::nullopt;
}

void RunConfig::validate() const {
    model.validate();
    search.validate();
    generation.validate();
    if (!(lambda >= 0.0 && lambda <= 1.0)) {
        throw ConfigError("lambda must lie in [0, 1]");
    }
    if (!(ppl_cap > 1.0)) {
        throw ConfigError("ppl_cap must be greater than 1");
    }
    if (arms.empty()) {
        throw ConfigError("arms must name at least one of baseline, full, segmented");
    }
    for (std::size_t i = 0; i < arms.size(); ++i) {
        for (std::size_t j = i + 1; j < arms.size(); ++j) {
            if (arms[i] == arms[j]) {
                throw ConfigError("arms contains a duplicate entry");
            }
        }
    }
    if (grader == GraderKind::Remote && remote.max_in_flight < 1) {
        throw ConfigError("remote grader max_in_flight must be at least 1");
    }
}

namespace {

void check_keys(const json& object, const char* where,
                std::initializer_list<const char*> allowed) {
    for (auto it = object.begin(); it != object.end(); ++it) {
        bool known = false;
        for (const char* key : allowed) {
            if (it.key() == key) {
                known = true;
                break;
            }
        }
        if (!known) {
            throw ConfigError("unknown key '" + it.key() + "' in " + where);
        }
    }
}

template <typename T>
void read_key(const json& object, const char* key, T& target) {
    if (object.contains(key)) {
        target = object.at(key).get<T>();
    }
}

std::vector<Arm> canonical_arms(const std::vector<Arm>& arms) {
    std::vector<Arm> out;
    for (Arm arm : {Arm::Baseline, Arm::Full, Arm::Segmented}) {
        if (std::find(arms.begin(), arms.end(), arm) != arms.end()) {
            out.push_back(arm);
        }
    }
    return out;
}

}  // namespace

RunConfig parse_run_config(const std::string& json_text) {
    json root = json::parse(json_text, nullptr, false);
    if (root.is_discarded() || !root.is_object()) {
        throw ConfigError("run config is not a JSON object");
    }
    try {
        check_keys(root, "config",
                   {"model", "search", "lambda", "generation", "arms", "grader",
                    "output_dir", "ppl_cap", "workers", "remote"});
        RunConfig config;
        if (root.contains("model")) {
            const json& m = root["model"];
            check_keys(m, "config.model",
                       {"n_layers", "d_model", "n_heads", "d_ff", "vocab_size",
                        "max_context", "seed"});
            read_key(m, "n_layers", config.model.n_layers);
            read_key(m, "d_model", config.model.d_model);
            read_key(m, "n_heads", config.model.n_heads);
            read_key(m, "d_ff", config.model.d_ff);
            read_key(m, "vocab_size", config.model.vocab_size);
            read_key(m, "max_context", config.model.max_context);
            read_key(m, "seed", config.model.seed);
        }
        if (root.contains("search")) {
            const json& s = root["search"];
            check_keys(s, "config.search",
                       {"lower", "upper", "n_trials", "sampler", "seed"});
            read_key(s, "lower", config.search.lower);
            read_key(s, "upper", config.search.upper);
            read_key(s, "n_trials", config.search.n_trials);
            read_key(s, "seed", config.search.seed);
            if (s.contains("sampler")) {
                const auto name = s["sampler"].get<std::string>();
                if (name == "random") {
                    config.search.sampler = Sampler::Random;
                } else if (name == "tpe") {
                    config.search.sampler = Sampler::Tpe;
                } else {
                    throw ConfigError("config.search.sampler must be 'random' or 'tpe'");
                }
            }
        }
        read_key(root, "lambda", config.lambda);
        if (root.contains("generation")) {
            const json& g = root["generation"];
            check_keys(g, "config.generation", {"max_new_tokens", "stop_on_eos"});
            read_key(g, "max_new_tokens", config.generation.max_new_tokens);
            read_key(g, "stop_on_eos", config.generation.stop_on_eos);
        }
        if (root.contains("arms")) {
            if (!root["arms"].is_array()) {
                throw ConfigError("config.arms must be an array of arm names");
            }
            config.arms.clear();
            for (const json& entry : root["arms"]) {
                const auto arm = arm_from_name(entry.get<std::string>());
                if (!arm) {
                    throw ConfigError("config.arms entries must be baseline, full, or segmented");
                }
                config.arms.push_back(*arm);
            }
        }
        if (root.contains("grader")) {
            const auto kind = grader_kind_from_name(root["grader"].get<std::string>());
            if (!kind) {
                throw ConfigError("config.grader must be 'stub' or 'remote'");
            }
            config.grader = *kind;
        }
        read_key(root, "output_dir", config.output_dir);
        read_key(root, "ppl_cap", config.ppl_cap);
        read_key(root, "workers", config.workers);
        if (root.contains("remote")) {
            const json& r = root["remote"];
            check_keys(r, "config.remote",
                       {"url", "api_key", "model", "max_retries", "backoff_ms",
                        "max_in_flight", "connect_timeout_ms", "read_timeout_ms",
                        "verbose"});
            read_key(r, "url", config.remote.url);
            read_key(r, "api_key", config.remote.api_key);
            read_key(r, "model", config.remote.model);
            read_key(r, "max_retries", config.remote.max_retries);
            read_key(r, "backoff_ms", config.remote.backoff_ms);
            read_key(r, "max_in_flight", config.remote.max_in_flight);
            read_key(r, "connect_timeout_ms", config.remote.connect_timeout_ms);
            read_key(r, "read_timeout_ms", config.remote.read_timeout_ms);
            read_key(r, "verbose", config.remote.verbose);
        }
        config.validate();
        return config;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("run config: ") + e.what());
    }
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open config file: " + path);
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_run_config(buffer.str());
}

namespace {

ordered_json config_to_ordered_json(const RunConfig& config) {
    ordered_json j;
    j["model"] = {
        {"n_layers", config.model.n_layers},   {"d_model", config.model.d_model},
        {"n_heads", config.model.n_heads},     {"d_ff", config.model.d_ff},
        {"vocab_size", config.model.vocab_size},
        {"max_context", config.model.max_context},
        {"seed", config.model.seed},
    };
    j["search"] = {
        {"lower", config.search.lower},
        {"upper", config.search.upper},
        {"n_trials", config.search.n_trials},
        {"sampler", config.search.sampler == Sampler::Random ? "random" : "tpe"},
        {"seed", config.search.seed},
    };
    j["lambda"] = config.lambda;
    j["generation"] = {
        {"max_new_tokens", config.generation.max_new_tokens},
        {"stop_on_eos", config.generation.stop_on_eos},
    };
    ordered_json arms = ordered_json::array();
    for (Arm arm : config.arms) {
        arms.push_back(std::string(arm_name(arm)));
    }
    j["arms"] = arms;
    j["grader"] = std::string(grader_kind_name(config.grader));
    j["output_dir"] = config.output_dir;
    j["ppl_cap"] = config.ppl_cap;
    j["workers"] = config.workers;
    // api_key deliberately omitted: config echoes land in artifacts.
    j["remote"] = {
        {"url", config.remote.url},
        {"model", config.remote.model},
        {"max_retries", config.remote.max_retries},
        {"backoff_ms", config.remote.backoff_ms},
        {"max_in_flight", config.remote.max_in_flight},
        {"connect_timeout_ms", config.remote.connect_timeout_ms},
        {"read_timeout_ms", config.remote.read_timeout_ms},
        {"verbose", config.remote.verbose},
    };
    return j;
}

}  // namespace

std::string run_config_to_json(const RunConfig& config) {
    return config_to_ordered_json(config).dump(2) + "\n";
}

std::string format_double(double value) {
    char buffer[64];
    const auto result = std::to_chars(buffer, buffer + sizeof(buffer), value);
    return std::string(buffer, result.ptr);
}

namespace {

double parse_double_exact(const std::string& text, const std::string& where) {
    double value = 0.0;
    const auto result =
        std::from_chars(text.data(), text.data() + text.size(), value);
    if (result.ec != std::errc() || result.ptr != text.data() + text.size()) {
        throw InputError(where + ": malformed number '" + text + "'");
    }
    return value;
}

int parse_int_exact(const std::string& text, const std::string& where) {
    int value = 0;
    const auto result =
        std::from_chars(text.data(), text.data() + text.size(), value);
    if (result.ec != std::errc() || result.ptr != text.data() + text.size()) {
        throw InputError(where + ": malformed integer '" + text + "'");
    }
    return value;
}

std::string csv_escape(const std::string& field) {
    if (field.find_first_of(",\"\r\n") == std::string::npos) {
        return field;
    }
    std::string out;
    out.reserve(field.size() + 2);
    out.push_back('"');
    for (char c : field) {
        if (c == '"') {
            out.push_back('"');
        }
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

void write_csv_line(std::ostream& out, const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i > 0) {
            out.put(',');
        }
        out << csv_escape(fields[i]);
    }
    out.put('\n');
}

// RFC-4180 reader: quoted fields may contain commas, quotes ("" escape),
// and newlines. Rows are LF or CRLF terminated; a missing final newline is
// tolerated.
std::vector<std::vector<std::string>> parse_csv(const std::string& text,
                                                const std::string& where) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool in_quotes = false;
    bool any_field_content = false;

    const auto end_field = [&] {
        row.push_back(field);
        field.clear();
        any_field_content = true;
    };
    const auto end_row = [&] {
        end_field();
        rows.push_back(std::move(row));
        row.clear();
        any_field_content = false;
    };

    std::size_t i = 0;
    const std::size_t n = text.size();
    while (i < n) {
        const char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < n && text[i + 1] == '"') {
                    field.push_back('"');
                    i += 2;
                } else {
                    in_quotes = false;
                    ++i;
                }
            } else {
                field.push_back(c);
                ++i;
            }
            continue;
        }
        switch (c) {
            case '"':
                in_quotes = true;
                ++i;
                break;
            case ',':
                end_field();
                ++i;
                break;
            case '\r':
                if (i + 1 < n && text[i + 1] == '\n') {
                    ++i;
                }
                end_row();
                ++i;
                break;
            case '\n':
                end_row();
                ++i;
                break;
            default:
                field.push_back(c);
                ++i;
                break;
        }
    }
    if (in_quotes) {
        throw InputError(where + ": unterminated quoted CSV field");
    }
    if (!field.empty() || !row.empty() || any_field_content) {
        end_row();
    }
    return rows;
}

const std::vector<std::string> kCompletionsHeader = {
    "prompt_id", "arm",   "status",     "question",      "ground_truth",
    "completion", "overlap", "ppl_normed", "grade",      "factuality",
    "hallucination", "composite", "error"};

std::vector<std::string> completion_row_fields(const CompletionRow& row) {
    std::vector<std::string> fields;
    fields.reserve(kCompletionsHeader.size());
    fields.push_back(row.prompt_id);
    fields.push_back(std::string(arm_name(row.arm)));
    fields.push_back(row.status);
    fields.push_back(row.question);
    fields.push_back(row.ground_truth);
    fields.push_back(row.completion);
    if (row.ok()) {
        fields.push_back(format_double(row.overlap));
        fields.push_back(format_double(row.ppl_normed));
        fields.push_back(std::to_string(row.grade));
        fields.push_back(std::string(factuality_name(row.factuality)));
        fields.push_back(row.hallucination ? "true" : "false");
        fields.push_back(format_double(row.composite));
    } else {
        for (int i = 0; i < 6; ++i) {
            fields.emplace_back();
        }
    }
    fields.push_back(row.error);
    return fields;
}

void write_completions_csv(const std::vector<CompletionRow>& rows,
                           const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    write_csv_line(out, kCompletionsHeader);
    for (const CompletionRow& row : rows) {
        write_csv_line(out, completion_row_fields(row));
    }
    if (!out) {
        throw IoError("failed while writing " + path.string());
    }
}

ordered_json trial_params_json(const SteeringConfig& config) {
    if (config.mode == SteeringMode::FullLayer) {
        return {{"alpha", config.full.alpha}, {"gamma", config.full.gamma}};
    }
    ordered_json params;
    const char* names[3] = {"early", "middle", "late"};
    for (std::size_t g = 0; g < 3; ++g) {
        params[names[g]] = {{"alpha", config.groups[g].alpha},
                            {"gamma", config.groups[g].gamma}};
    }
    return params;
}

void write_trials_jsonl(const std::vector<TrialRow>& trials, const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    for (const TrialRow& trial : trials) {
        ordered_json line;
        line["prompt_id"] = trial.prompt_id;
        line["arm"] = std::string(arm_name(trial.arm));
        line["trial_index"] = trial.record.trial_index;
        line["params"] = trial_params_json(trial.record.config);
        line["continuation"] = trial.record.continuation;
        line["token_overlap"] = trial.record.token_overlap;
        line["perplexity_normed"] = trial.record.perplexity_normed;
        if (trial.record.failed) {
            line["objective"] = nullptr;  // -inf is not representable in JSON
        } else {
            line["objective"] = trial.record.objective;
        }
        line["failed"] = trial.record.failed;
        line["error"] = trial.record.error;
        line["best"] = trial.is_best;
        out << line.dump() << "\n";
    }
    if (!out) {
        throw IoError("failed while writing " + path.string());
    }
}

ordered_json stats_json(const DistributionStats& stats) {
    return {{"mean", stats.mean}, {"median", stats.median}, {"variance", stats.variance}};
}

ordered_json report_to_json(const RunReport& report, const ordered_json& config_echo) {
    ordered_json j;
    j["prompt_count"] = report.prompt_count;
    ordered_json arms = ordered_json::object();
    for (const ArmSummary& arm : report.arms) {
        ordered_json a;
        a["rows"] = arm.rows;
        a["ok"] = arm.ok;
        a["failed"] = arm.failed;
        a["threshold_accuracies"] = {
            {"composite", arm.summary.accuracy_composite},
            {"overlap", arm.summary.accuracy_overlap},
            {"grade", arm.summary.accuracy_grade},
        };
        a["grade_histogram"] = arm.summary.grade_histogram;
        a["factuality_counts"] = {
            {"CORRECT", arm.summary.factuality_counts[0]},
            {"INCORRECT", arm.summary.factuality_counts[1]},
            {"NOT_ATTEMPTED", arm.summary.factuality_counts[2]},
        };
        a["overlap"] = stats_json(arm.summary.overlap_stats);
        a["composite"] = stats_json(arm.summary.composite_stats);
        arms[std::string(arm_name(arm.arm))] = std::move(a);
    }
    j["arms"] = std::move(arms);
    j["config"] = config_echo;
    return j;
}

void write_text_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    out << text;
    if (!out) {
        throw IoError("failed while writing " + path.string());
    }
}

void write_report_files(const RunReport& report, const ordered_json& config_echo,
                        const fs::path& dir) {
    write_text_file(dir / "report.json",
                    report_to_json(report, config_echo).dump(2) + "\n");

    std::ostringstream plot;
    write_csv_line(plot, {"arm", "series", "key", "value"});
    for (const ArmSummary& arm : report.arms) {
        const std::string name(arm_name(arm.arm));
        for (std::size_t g = 0; g < 5; ++g) {
            write_csv_line(plot, {name, "grade_histogram", std::to_string(g + 1),
                                  std::to_string(arm.summary.grade_histogram[g])});
        }
        const char* labels[3] = {"CORRECT", "INCORRECT", "NOT_ATTEMPTED"};
        for (std::size_t f = 0; f < 3; ++f) {
            write_csv_line(plot, {name, "factuality", labels[f],
                                  std::to_string(arm.summary.factuality_counts[f])});
        }
        write_csv_line(plot, {name, "threshold_accuracy", "composite",
                              format_double(arm.summary.accuracy_composite)});
        write_csv_line(plot, {name, "threshold_accuracy", "overlap",
                              format_double(arm.summary.accuracy_overlap)});
        write_csv_line(plot, {name, "threshold_accuracy", "grade",
                              format_double(arm.summary.accuracy_grade)});
        const struct {
            const char* series;
            const DistributionStats& stats;
        } blocks[2] = {{"overlap_stats", arm.summary.overlap_stats},
                       {"composite_stats", arm.summary.composite_stats}};
        for (const auto& block : blocks) {
            write_csv_line(plot, {name, block.series, "mean", format_double(block.stats.mean)});
            write_csv_line(plot, {name, block.series, "median", format_double(block.stats.median)});
            write_csv_line(plot,
                           {name, block.series, "variance", format_double(block.stats.variance)});
        }
    }
    write_text_file(dir / "plotdata.csv", plot.str());
}

ordered_json read_existing_config_echo(const fs::path& dir) {
    std::ifstream in(dir / "report.json", std::ios::binary);
    if (!in) {
        return nullptr;
    }
    ordered_json existing = ordered_json::parse(in, nullptr, false);
    if (existing.is_discarded() || !existing.is_object() || !existing.contains("config")) {
        return nullptr;
    }
    return existing["config"];
}

}  // namespace

RunReport report_from_rows(const std::vector<CompletionRow>& rows) {
    RunReport report;
    std::set<std::string> prompt_ids;
    for (const CompletionRow& row : rows) {
        prompt_ids.insert(row.prompt_id);
    }
    report.prompt_count = prompt_ids.size();
    for (Arm arm : {Arm::Baseline, Arm::Full, Arm::Segmented}) {
        ArmSummary summary;
        summary.arm = arm;
        std::vector<ScoreCard> cards;
        for (const CompletionRow& row : rows) {
            if (row.arm != arm) {
                continue;
            }
            ++summary.rows;
            if (!row.ok()) {
                ++summary.failed;
                continue;
            }
            ++summary.ok;
            ScoreCard card;
            card.token_overlap = row.overlap;
            card.perplexity_normed = row.ppl_normed;
            card.composite = row.composite;
            card.llm_grade = row.grade;
            card.factuality = row.factuality;
            cards.push_back(std::move(card));
        }
        if (summary.rows == 0) {
            continue;
        }
        summary.summary = threshold_accuracies(cards);
        report.arms.push_back(std::move(summary));
    }
    return report;
}

namespace {

struct PromptResult {
    std::vector<CompletionRow> rows;
    std::vector<TrialRow> trials;
};

// Remote rubric prompts refuse empty slots, and the stub grades "(empty)"
// identically to "" (zero overlap, no refusal marker), so one placeholder
// serves both graders.
const std::string& grading_view(const std::string& completion) {
    static const std::string kEmptyPlaceholder = "(empty)";
    return completion.empty() ? kEmptyPlaceholder : completion;
}

PromptResult process_prompt(const Weights& weights, const RunConfig& config,
                            const std::vector<Arm>& arms, bool wants_steering,
                            const PromptRecord& record, Grader& grader) {
    PromptResult result;

    std::optional<ReferenceActivations> reference;
    std::string capture_error;
    if (wants_steering) {
        try {
            reference = capture_reference(weights, build_enriched_prompt(record), record.id);
        } catch (const std::exception& e) {
            capture_error = e.what();
        }
    }

    for (Arm arm : arms) {
        CompletionRow row;
        row.prompt_id = record.id;
        row.arm = arm;
        row.question = record.question;
        row.ground_truth = record.ground_truth;
        try {
            if (arm == Arm::Baseline) {
                row.completion = generate_baseline(weights, record, config.generation);
                row.overlap = token_overlap(row.completion, record.ground_truth);
                row.ppl_normed =
                    normalized_perplexity(row.completion, weights, config.ppl_cap).normed;
            } else {
                if (!reference) {
                    throw Error("reference capture failed: " + capture_error);
                }
                const SteeringMode mode = arm == Arm::Full ? SteeringMode::FullLayer
                                                           : SteeringMode::Segmented;
                StudyResult study =
                    run_study(weights, record, *reference, mode, config.search,
                              config.generation, config.lambda, config.ppl_cap);
                for (const TrialRecord& trial : study.trials) {
                    result.trials.push_back(
                        {record.id, arm, trial,
                         trial.trial_index == study.best.trial_index});
                }
                // Greedy decoding makes the best trial's stored continuation
                // identical to a fresh generation, so it is evaluated as-is.
                row.completion = study.best.continuation;
                row.overlap = study.best.token_overlap;
                row.ppl_normed = study.best.perplexity_normed;
            }
            const GradePair grades =
                grader.grade(record.question, grading_view(row.completion),
                             record.ground_truth);
            row.grade = grades.quality.score;
            row.factuality = grades.factuality.label;
            row.hallucination = grades.quality.hallucination;
            row.composite = composite_metric(row.overlap, row.grade);
        } catch (const std::exception& e) {
            row.status = "failed";
            row.error = e.what();
        }
        result.rows.push_back(std::move(row));
    }
    return result;
}

std::unique_ptr<Grader> make_grader(const RunConfig& config) {
    if (config.grader == GraderKind::Stub) {
        return std::make_unique<StubGrader>();
    }
    RemoteGraderConfig remote = config.remote;
    remote.apply_env();
    return std::make_unique<RemoteGrader>(std::move(remote));
}

}  // namespace

RunOutput run_experiment(const RunConfig& config,
                         const std::vector<PromptRecord>& records) {
    config.validate();
    if (records.empty()) {
        throw InputError("run requires at least one prompt record");
    }
    for (const PromptRecord& record : records) {
        record.validate();
    }

    const Weights weights = init_weights(config.model);
    const std::vector<Arm> arms = canonical_arms(config.arms);
    const bool wants_steering =
        std::find(arms.begin(), arms.end(), Arm::Full) != arms.end() ||
        std::find(arms.begin(), arms.end(), Arm::Segmented) != arms.end();
    const std::unique_ptr<Grader> grader = make_grader(config);

    std::vector<PromptResult> results(records.size());
    std::atomic<std::size_t> next{0};
    const auto worker = [&] {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= records.size()) {
                return;
            }
            try {
                results[i] = process_prompt(weights, config, arms, wants_steering,
                                            records[i], *grader);
            } catch (const std::exception& e) {
                // process_prompt contains its own failures; this is a last
                // resort so a thread never dies with an exception in flight.
                PromptResult fallback;
                for (Arm arm : arms) {
                    CompletionRow row;
                    row.prompt_id = records[i].id;
                    row.arm = arm;
                    row.question = records[i].question;
                    row.ground_truth = records[i].ground_truth;
                    row.status = "failed";
                    row.error = e.what();
                    fallback.rows.push_back(std::move(row));
                }
                results[i] = std::move(fallback);
            }
        }
    };

    std::size_t n_workers = config.workers;
    if (n_workers == 0) {
        n_workers = std::max(1u, std::thread::hardware_concurrency());
    }
    n_workers = std::min(n_workers, records.size());
    if (n_workers <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(n_workers);
        for (std::size_t t = 0; t < n_workers; ++t) {
            pool.emplace_back(worker);
        }
        for (std::thread& thread : pool) {
            thread.join();
        }
    }

    RunOutput output;
    for (PromptResult& result : results) {
        for (CompletionRow& row : result.rows) {
            output.rows.push_back(std::move(row));
        }
        for (TrialRow& trial : result.trials) {
            output.trials.push_back(std::move(trial));
        }
    }
    const bool any_ok = std::any_of(output.rows.begin(), output.rows.end(),
                                    [](const CompletionRow& row) { return row.ok(); });
    if (!any_ok) {
        throw Error("every prompt failed in every arm; nothing to report");
    }
    output.report = report_from_rows(output.rows);
    return output;
}

std::string iso8601_utc_now() {
    const std::time_t now = std::chrono::system_clock::to_time_t(
        std::chrono::system_clock::now());
    std::tm utc{};
    gmtime_r(&now, &utc);
    char buffer[32];
    std::strftime(buffer, sizeof(buffer), "%Y-%m-%dT%H:%M:%SZ", &utc);
    return buffer;
}

void write_artifacts(const RunOutput& output, const RunConfig& config,
                     const std::string& output_dir, const RunMeta& meta) {
    if (output.report.arms.empty()) {
        throw InputError("refusing to write artifacts: report covers no arms");
    }
    const fs::path dir(output_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        throw IoError("cannot create output directory " + output_dir + ": " + ec.message());
    }

    write_completions_csv(output.rows, dir / "completions.csv");
    write_trials_jsonl(output.trials, dir / "trials.jsonl");
    write_report_files(output.report, config_to_ordered_json(config), dir);

    ordered_json meta_json;
    meta_json["started_at"] = meta.started_at;
    meta_json["finished_at"] = meta.finished_at;
    meta_json["duration_seconds"] = meta.duration_seconds;
    write_text_file(dir / "meta.json", meta_json.dump(2) + "\n");
}

std::vector<CompletionRow> read_completions_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path);
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    const auto table = parse_csv(buffer.str(), path);
    if (table.empty() || table[0] != kCompletionsHeader) {
        throw InputError(path + ": missing or unexpected completions.csv header");
    }
    std::vector<CompletionRow> rows;
    rows.reserve(table.size() - 1);
    for (std::size_t r = 1; r < table.size(); ++r) {
        const auto& fields = table[r];
        const std::string where = path + " row " + std::to_string(r);
        if (fields.size() != kCompletionsHeader.size()) {
            throw InputError(where + ": expected " +
                             std::to_string(kCompletionsHeader.size()) + " columns, got " +
                             std::to_string(fields.size()));
        }
        CompletionRow row;
        row.prompt_id = fields[0];
        const auto arm = arm_from_name(fields[1]);
        if (!arm) {
            throw InputError(where + ": unknown arm '" + fields[1] + "'");
        }
        row.arm = *arm;
        row.status = fields[2];
        if (row.status != "ok" && row.status != "failed") {
            throw InputError(where + ": unknown status '" + fields[2] + "'");
        }
        row.question = fields[3];
        row.ground_truth = fields[4];
        row.completion = fields[5];
        if (row.ok()) {
            row.overlap = parse_double_exact(fields[6], where);
            row.ppl_normed = parse_double_exact(fields[7], where);
            row.grade = parse_int_exact(fields[8], where);
            const auto factuality = factuality_from_name(fields[9]);
            if (!factuality) {
                throw InputError(where + ": unknown factuality '" + fields[9] + "'");
            }
            row.factuality = *factuality;
            if (fields[10] != "true" && fields[10] != "false") {
                throw InputError(where + ": hallucination must be true or false");
            }
            row.hallucination = fields[10] == "true";
            row.composite = parse_double_exact(fields[11], where);
        }
        row.error = fields[12];
        rows.push_back(std::move(row));
    }
    return rows;
}

RunReport recompute_report(const std::string& run_dir) {
    const fs::path dir(run_dir);
    const auto rows = read_completions_csv((dir / "completions.csv").string());
    RunReport report = report_from_rows(rows);
    write_report_files(report, read_existing_config_echo(dir), dir);
    return report;
}

RunReport regrade_completions(const std::string& run_dir, Grader& grader) {
    const fs::path dir(run_dir);
    const std::string csv_path = (dir / "completions.csv").string();
    auto rows = read_completions_csv(csv_path);
    for (CompletionRow& row : rows) {
        if (!row.ok()) {
            continue;
        }
        try {
            const GradePair grades =
                grader.grade(row.question, grading_view(row.completion), row.ground_truth);
            row.grade = grades.quality.score;
            row.factuality = grades.factuality.label;
            row.hallucination = grades.quality.hallucination;
            row.composite = composite_metric(row.overlap, row.grade);
        } catch (const std::exception& e) {
            row.status = "failed";
            row.error = std::string("grading: ") + e.what();
        }
    }
    write_completions_csv(rows, dir / "completions.csv");
    RunReport report = report_from_rows(rows);
    write_report_files(report, read_existing_config_echo(dir), dir);
    return report;
}

}  // namespace fusion
