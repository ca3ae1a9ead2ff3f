#include <chrono>
#include <cstdint>
#include <iostream>
#include <memory>
#include <string>

#include "CLI11.hpp"
#include "fusion/dataset.hpp"
#include "fusion/errors.hpp"
#include "fusion/pipeline.hpp"

namespace {

void print_report(const fusion::RunReport& report) {
    std::cout << "prompts: " << report.prompt_count << "\n";
    for (const fusion::ArmSummary& arm : report.arms) {
        std::cout << arm_name(arm.arm) << ": rows " << arm.rows << ", ok " << arm.ok
                  << ", failed " << arm.failed << " | accuracy composite "
                  << fusion::format_double(arm.summary.accuracy_composite) << ", overlap "
                  << fusion::format_double(arm.summary.accuracy_overlap) << ", grade "
                  << fusion::format_double(arm.summary.accuracy_grade) << "\n";
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Fusion steering experiment harness"};
    app.require_subcommand(1);

    auto* gen = app.add_subcommand("gen-dataset", "Write a synthetic JSONL prompt suite");
    std::string gen_out = "dataset.jsonl";
    std::size_t gen_count = 20;
    std::uint64_t gen_seed = 0;
    gen->add_option("--out", gen_out, "Output JSONL path")->capture_default_str();
    gen->add_option("--count", gen_count, "Number of records")->capture_default_str();
    gen->add_option("--seed", gen_seed, "Seed for records beyond the fixed fact table")
        ->capture_default_str();

    auto* run = app.add_subcommand("run", "Run the experiment over a prompt suite");
    std::string run_config_path;
    std::string run_data_path;
    std::string run_out_dir;
    std::int64_t run_workers = -1;
    run->add_option("--config", run_config_path, "JSON run config (defaults when omitted)");
    run->add_option("--data", run_data_path, "Input prompts (JSONL)")->required();
    run->add_option("--out", run_out_dir, "Output directory (overrides config output_dir)");
    run->add_option("--workers", run_workers, "Worker threads (0 = all cores)");

    auto* report = app.add_subcommand("report", "Recompute the report from completions.csv");
    std::string report_dir;
    report->add_option("--in", report_dir, "Run directory")->required();

    auto* grade = app.add_subcommand("grade", "Re-grade the completions of an existing run");
    std::string grade_dir;
    std::string grade_kind = "remote";
    std::string grade_url;
    std::string grade_model;
    bool grade_verbose = false;
    grade->add_option("--in", grade_dir, "Run directory")->required();
    grade->add_option("--grader", grade_kind, "Grader: stub or remote")->capture_default_str();
    grade->add_option("--grader-url", grade_url,
                      "Chat-completions endpoint (default: FS_GRADER_URL)");
    grade->add_option("--grader-model", grade_model, "Model name sent to the grader");
    grade->add_flag("--verbose", grade_verbose, "Log grader requests (key redacted)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) {
            const auto records = fusion::gen_dataset(gen_count, gen_seed);
            fusion::write_jsonl(records, gen_out);
            std::cout << "wrote " << records.size() << " records to " << gen_out << "\n";
            return 0;
        }
        if (run->parsed()) {
            fusion::RunConfig config;
            if (!run_config_path.empty()) {
                config = fusion::load_run_config(run_config_path);
            }
            if (!run_out_dir.empty()) {
                config.output_dir = run_out_dir;
            }
            if (run_workers >= 0) {
                config.workers = static_cast<std::size_t>(run_workers);
            }
            config.validate();

            fusion::RunMeta meta;
            meta.started_at = fusion::iso8601_utc_now();
            const auto t0 = std::chrono::steady_clock::now();
            const auto records = fusion::ingest(run_data_path);
            const fusion::RunOutput output = fusion::run_experiment(config, records);
            meta.finished_at = fusion::iso8601_utc_now();
            meta.duration_seconds =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            fusion::write_artifacts(output, config, config.output_dir, meta);

            std::cout << "run complete: " << config.output_dir << "\n";
            print_report(output.report);
            return 0;
        }
        if (report->parsed()) {
            print_report(fusion::recompute_report(report_dir));
            return 0;
        }
        if (grade->parsed()) {
            const auto kind = fusion::grader_kind_from_name(grade_kind);
            if (!kind) {
                std::cerr << "error: --grader must be stub or remote\n";
                return 2;
            }
            std::unique_ptr<fusion::Grader> grader;
            if (*kind == fusion::GraderKind::Stub) {
                grader = std::make_unique<fusion::StubGrader>();
            } else {
                fusion::RemoteGraderConfig remote;
                remote.url = grade_url;
                if (!grade_model.empty()) {
                    remote.model = grade_model;
                }
                remote.verbose = grade_verbose;
                remote.apply_env();
                grader = std::make_unique<fusion::RemoteGrader>(std::move(remote));
            }
            print_report(fusion::regrade_completions(grade_dir, *grader));
            return 0;
        }
    } catch (const fusion::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "unexpected error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
