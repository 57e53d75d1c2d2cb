#include <cstdint>
#include <filesystem>
#include <iostream>
#include <memory>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "cadenza/errors.hpp"
#include "cadenza/harness.hpp"

namespace {

using namespace cadenza;

int cmd_validate(const std::string& manifest_path) {
    const Manifest m = validate_manifest(manifest_path);
    for (const auto& w : m.warnings) {
        std::cerr << "warning: " << w << "\n";
    }
    std::cout << "manifest ok: " << m.tracks.size() << " tracks, " << m.scenes.size()
              << " scenes, " << m.warnings.size() << " warnings\n";
    return 0;
}

int cmd_run(const std::string& task, const std::string& manifest_path,
            const std::string& listeners_path, const std::string& hrir_dir,
            const std::string& out_path, uint64_t seed, int jobs, const std::string& backend_name) {
    Manifest manifest = validate_manifest(manifest_path);
    for (const auto& w : manifest.warnings) {
        std::cerr << "warning: " << w << "\n";
    }

    std::string lp = listeners_path.empty() ? manifest.listeners_path : listeners_path;
    if (lp.empty()) {
        throw ValidationError("no listener file: pass --listeners or set listeners_path in the manifest");
    }
    const auto listeners = load_listeners(resolve_path(lp, manifest.base_dir));

    RunConfig cfg;
    cfg.seed = seed;
    cfg.jobs = jobs;

    RunResult result;
    if (task == "task1") {
        std::unique_ptr<SeparationBackend> backend;
        if (backend_name == "oracle") {
            backend = std::make_unique<OracleBackend>();
        } else if (backend_name == "null") {
            backend = std::make_unique<NullBackend>();
        } else {
            throw ValidationError("unknown backend '" + backend_name + "' (use oracle or null)");
        }
        result = run_task1(manifest, listeners, *backend, cfg);
    } else {
        if (hrir_dir.empty()) {
            throw ValidationError("task2 requires --hrir-dir");
        }
        const auto dir = resolve_path(hrir_dir, manifest.base_dir);
        const HrirSet anechoic = load_hrir_set(dir, HrirCondition::anechoic);
        const HrirSet car = load_hrir_set(dir, HrirCondition::car);
        const Enhancer baseline = [](const AudioBuffer& mix, const Listener& l) {
            return apply_task2_baseline(mix, l);
        };
        result = run_task2(manifest, listeners, anechoic, car, baseline, cfg);
    }

    write_records(result.records, result.system, out_path);
    std::cout << result.system << ": " << result.records.size() << " records ("
              << result.units_attempted << " units attempted, " << result.units_skipped
              << " skipped) -> " << out_path << "\n";
    return 0;
}

int cmd_report(const std::string& records_path, const std::string& group_by,
               const std::string& format, const std::string& out_path) {
    const RecordsFile file = read_records(records_path);

    GroupBy gb = GroupBy::all;
    if (group_by == "stem_ear") gb = GroupBy::stem_ear;
    else if (group_by == "genre") gb = GroupBy::genre;
    else if (group_by != "all") throw ValidationError("unknown group-by '" + group_by + "'");

    const ReportTable table = aggregate(file.records, gb, file.system);
    const ReportFormat fmt = format == "json" ? ReportFormat::json : ReportFormat::csv;
    if (out_path.empty()) {
        write_report(table, std::cout, fmt);
    } else {
        write_report(table, std::filesystem::path(out_path), fmt);
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Music personalization and evaluation pipeline for listeners with hearing loss"};
    app.require_subcommand(1);

    std::string manifest_path;
    auto* validate = app.add_subcommand("validate-manifest", "Check a manifest file");
    validate->add_option("manifest", manifest_path, "Manifest JSON path")->required();

    std::string run_task, listeners_path, hrir_dir, out_path = "records.json";
    std::string backend = "oracle";
    uint64_t seed = 0;
    int jobs = static_cast<int>(std::thread::hardware_concurrency());
    if (jobs < 1) jobs = 1;
    auto* run = app.add_subcommand("run", "Run an evaluation pipeline");
    run->add_option("task", run_task, "task1 or task2")
        ->required()
        ->check(CLI::IsMember({"task1", "task2"}));
    run->add_option("--manifest", manifest_path, "Manifest JSON path")->required();
    run->add_option("--listeners", listeners_path, "Listener JSON path (overrides the manifest)");
    run->add_option("--hrir-dir", hrir_dir, "Directory of HRIR WAV files (task2)");
    run->add_option("--out", out_path, "Output records JSON path");
    run->add_option("--seed", seed, "Global seed");
    run->add_option("--jobs", jobs, "Worker threads");
    run->add_option("--backend", backend, "Separation backend (task1)")
        ->check(CLI::IsMember({"oracle", "null"}));

    std::string records_path, group_by = "all", format = "csv", report_out;
    auto* report = app.add_subcommand("report", "Aggregate records into a score table");
    report->add_option("--records", records_path, "Records JSON path")->required();
    report->add_option("--group-by", group_by, "all, stem_ear, or genre")
        ->check(CLI::IsMember({"all", "stem_ear", "genre"}));
    report->add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
    report->add_option("--out", report_out, "Output path (default stdout)");

    try {
        app.parse(argc, argv);
        if (app.got_subcommand(validate)) return cmd_validate(manifest_path);
        if (app.got_subcommand(run)) {
            return cmd_run(run_task, manifest_path, listeners_path, hrir_dir, out_path, seed, jobs,
                           backend);
        }
        if (app.got_subcommand(report)) return cmd_report(records_path, group_by, format, report_out);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    } catch (const cadenza::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
