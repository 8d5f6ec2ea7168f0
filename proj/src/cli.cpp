#include "vsi/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "vsi/backends.hpp"
#include "vsi/harness.hpp"
#include "vsi/search.hpp"
#include "vsi/subtitle.hpp"

namespace vsi::cli {

namespace {

/// Command-line overrides for every SearchConfig field.
struct ConfigOverrides {
    std::optional<double> text_weight;
    std::optional<double> sim_threshold;
    std::optional<double> amplification;
    std::optional<double> segment_threshold;
    std::optional<double> extension_radius_s;
    std::optional<double> detection_threshold;
    std::optional<std::int64_t> frame_budget;
    std::optional<std::int64_t> max_grid_side;
    std::optional<std::int64_t> top_k;
    std::optional<double> znorm_epsilon;
    std::optional<std::uint64_t> rng_seed;
    bool uncapped_batches = false;
    bool rescale_fused = false;

    void add_to(CLI::App& app, bool with_text_weight) {
        if (with_text_weight)
            app.add_option("--text-weight", text_weight, "Fusion weight of the subtitle stream in [0,1]")
                ->check(CLI::Range(0.0, 1.0));
        app.add_option("--sim-threshold", sim_threshold, "Soft-threshold knee");
        app.add_option("--amplification", amplification, "Soft-threshold gain");
        app.add_option("--segment-threshold", segment_threshold, "Enhanced similarity needed to propagate");
        app.add_option("--extension-radius", extension_radius_s, "Seconds added around each subtitle segment");
        app.add_option("--detection-threshold", detection_threshold, "Confidence at which a target counts as found");
        app.add_option("--frame-budget", frame_budget, "Total frames the detector may examine");
        app.add_option("--max-grid-side", max_grid_side, "Largest grid side m (m*m frames per batch)");
        app.add_option("--top-k", top_k, "Number of keyframes to return");
        app.add_option("--znorm-epsilon", znorm_epsilon, "Z-score stabilizer");
        app.add_option("--seed", rng_seed, "Random seed");
        app.add_flag("--uncapped-batches", uncapped_batches, "Ignore --max-grid-side when sizing batches");
        app.add_flag("--rescale-fused", rescale_fused, "Min-max rescale fused scores before the distribution update");
    }

    void apply(SearchConfig& cfg) const {
        if (text_weight) cfg.text_weight = *text_weight;
        if (sim_threshold) cfg.sim_threshold = *sim_threshold;
        if (amplification) cfg.amplification = *amplification;
        if (segment_threshold) cfg.segment_threshold = *segment_threshold;
        if (extension_radius_s) cfg.extension_radius_s = *extension_radius_s;
        if (detection_threshold) cfg.detection_threshold = *detection_threshold;
        if (frame_budget) cfg.frame_budget = *frame_budget;
        if (max_grid_side) cfg.max_grid_side = *max_grid_side;
        if (top_k) cfg.top_k = *top_k;
        if (znorm_epsilon) cfg.znorm_epsilon = *znorm_epsilon;
        if (rng_seed) cfg.rng_seed = *rng_seed;
        if (uncapped_batches) cfg.uncapped_batches = true;
        if (rescale_fused) cfg.rescale_fused = true;
    }
};

/// Defaults, then $VSI_CONFIG (unless an explicit file is given), then the file.
SearchConfig base_config(const std::string& explicit_path) {
    if (!explicit_path.empty())
        return load_config_file(explicit_path);
    if (const char* env = std::getenv("VSI_CONFIG"); env && *env)
        return load_config_file(env);
    return {};
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary);
    if (!f)
        throw InvalidInput("cannot write '" + path + "'");
    f << content;
}

// ----------------------------------------------------------------------------

struct SearchArgs {
    std::int64_t frames = 0;
    double fps = 0.0;
    std::string subtitles;
    std::string query;
    std::string targets;
    std::string detector;
    std::string encoder;
    std::string output;
    std::string trace;
    std::string config;
    bool lenient_srt = false;
    ConfigOverrides overrides;
};

int cmd_search(const SearchArgs& a, std::ostream& out) {
    auto cfg = base_config(a.config);
    a.overrides.apply(cfg);
    cfg.validate();

    const VideoTimeline timeline(a.frames, a.fps);
    const auto track = load_srt_file(a.subtitles, {.lenient = a.lenient_srt});
    FileTargetPlanner planner(a.targets);
    plan_targets_from_file(a.targets);  // fail on a bad targets file before spawning backends

    const auto detector_spec = parse_backend_spec(a.detector);
    const auto encoder_spec = parse_backend_spec(a.encoder);
    auto detector = make_detector(detector_spec);
    auto encoder = make_encoder(encoder_spec);

    SearchOptions options;
    options.record_trace = !a.trace.empty();
    const auto outcome = search(timeline, track, a.query, cfg, *detector, *encoder, planner, options);

    auto result = outcome_to_json(outcome, cfg);
    result["targets"] = targets_to_json(outcome.targets);
    if (a.output.empty())
        out << result.dump(2) << '\n';
    else
        write_file(a.output, result.dump(2) + "\n");

    if (!a.trace.empty()) {
        std::string lines;
        for (const auto& record : outcome.trace)
            lines += record.dump() + "\n";
        write_file(a.trace, lines);
    }
    return kExitOk;
}

// ----------------------------------------------------------------------------

struct BenchArgs {
    std::string corpus;
    std::string generate;
    std::vector<std::string> configs;
    std::vector<double> text_weights;
    std::string output;
    std::string table;
    std::string write_corpus_dir;
    unsigned jobs = 1;
    ConfigOverrides overrides;
};

std::vector<SyntheticCase> bench_corpus(const BenchArgs& a) {
    if (!a.corpus.empty())
        return load_corpus(a.corpus);

    std::vector<std::string> parts;
    std::stringstream ss(a.generate);
    for (std::string item; std::getline(ss, item, ',');)
        parts.push_back(item);
    if (parts.size() < 2)
        throw InvalidInput("--generate expects SEED,COUNT[,key=value...]");
    std::uint64_t seed = 0;
    std::size_t count = 0;
    try {
        std::size_t used = 0;
        seed = std::stoull(parts[0], &used);
        if (used != parts[0].size())
            throw std::invalid_argument(parts[0]);
        count = std::stoul(parts[1], &used);
        if (used != parts[1].size())
            throw std::invalid_argument(parts[1]);
    } catch (const std::exception&) {
        throw InvalidInput("--generate expects numeric SEED,COUNT, got '" + a.generate + "'");
    }
    CaseParams params;
    for (std::size_t i = 2; i < parts.size(); ++i) {
        const auto eq = parts[i].find('=');
        if (eq == std::string::npos)
            throw InvalidInput("--generate parameter '" + parts[i] + "' is not key=value");
        set_case_param(params, parts[i].substr(0, eq), parts[i].substr(eq + 1));
    }
    return generate_corpus(seed, count, params);
}

int cmd_bench(const BenchArgs& a, std::ostream& out) {
    SearchConfig base = base_config("");
    a.overrides.apply(base);

    std::vector<LabelledConfig> rows;
    for (const auto& path : a.configs) {
        auto cfg = load_config_file(path, base);
        a.overrides.apply(cfg);
        rows.push_back({std::filesystem::path(path).stem().string(), cfg});
    }
    for (double w : a.text_weights) {
        auto cfg = base;
        cfg.text_weight = w;
        rows.push_back({fmt::format("text_weight={}", w), cfg});
    }
    if (rows.empty())
        throw InvalidInput("bench needs at least one --config or --text-weight");
    for (const auto& r : rows)
        r.config.validate();

    const auto corpus = bench_corpus(a);
    if (corpus.empty())
        throw InvalidInput("benchmark corpus is empty");
    if (!a.write_corpus_dir.empty())
        write_corpus(a.write_corpus_dir, corpus);

    const auto report = run_benchmark(corpus, rows, a.jobs);
    const auto table = report.to_table();
    out << table;
    if (!a.output.empty())
        write_file(a.output, report.to_json().dump(2) + "\n");
    if (!a.table.empty())
        write_file(a.table, table);

    std::size_t failures = 0, total = 0;
    for (const auto& row : report.rows) {
        failures += row.failures;
        total += row.cases;
    }
    if (failures > 0)
        spdlog::warn("{} of {} case runs failed", failures, total);
    return failures == total ? kExitBackend : kExitOk;
}

// ----------------------------------------------------------------------------

struct ValidateArgs {
    std::string subtitles;
    bool lenient_srt = false;
    std::string targets;
    std::string detector_script;
    std::string case_file;
    std::string corpus;
    std::string config;
};

int cmd_validate(const ValidateArgs& a, std::ostream& out) {
    bool any = false;
    if (!a.subtitles.empty()) {
        const auto track = load_srt_file(a.subtitles, {.lenient = a.lenient_srt});
        out << "ok: " << a.subtitles << " (" << track.size() << " segments)\n";
        any = true;
    }
    if (!a.targets.empty()) {
        const auto t = plan_targets_from_file(a.targets);
        out << "ok: " << a.targets << " (" << t.targets().size() << " targets, " << t.cues().size() << " cues)\n";
        any = true;
    }
    if (!a.detector_script.empty()) {
        ScriptedDetector::load(a.detector_script);
        out << "ok: " << a.detector_script << "\n";
        any = true;
    }
    if (!a.case_file.empty()) {
        std::ifstream in(a.case_file);
        if (!in)
            throw ValidationError("cannot open '" + a.case_file + "'");
        nlohmann::json doc;
        try {
            doc = nlohmann::json::parse(in);
        } catch (const nlohmann::json::parse_error& e) {
            throw ValidationError(std::string("not valid JSON: ") + e.what());
        }
        case_from_json(doc);
        out << "ok: " << a.case_file << "\n";
        any = true;
    }
    if (!a.corpus.empty()) {
        const auto cases = load_corpus(a.corpus);
        out << "ok: " << a.corpus << " (" << cases.size() << " cases)\n";
        any = true;
    }
    if (!a.config.empty()) {
        load_config_file(a.config).validate();
        out << "ok: " << a.config << "\n";
        any = true;
    }
    if (!any)
        throw InvalidInput("validate needs at least one of --subtitles, --targets, --detector-script, --case, "
                           "--corpus, --config");
    return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Keyframe search over long videos using subtitle and object-detection evidence", "vsi"};
    app.require_subcommand(1);
    std::string log_level = "warn";
    app.add_option("--log-level", log_level, "trace|debug|info|warn|error|off")
        ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));

    SearchArgs search_args;
    auto* search_cmd = app.add_subcommand("search", "Search one video for query-relevant keyframes");
    search_cmd->add_option("--frames", search_args.frames, "Frame count of the video")->required();
    search_cmd->add_option("--fps", search_args.fps, "Frames per second")->required();
    search_cmd->add_option("--subtitles", search_args.subtitles, "SRT subtitle file")->required();
    search_cmd->add_option("--query", search_args.query, "Question or description to search for")->required();
    search_cmd->add_option("--targets", search_args.targets, "Targets/cues JSON file")->required();
    search_cmd->add_option("--detector", search_args.detector, "stub:PATH | proc:CMDLINE | http:URL")->required();
    search_cmd->add_option("--encoder", search_args.encoder, "stub[:PATH] | proc:CMDLINE | http:URL")->required();
    search_cmd->add_option("--output", search_args.output, "Result JSON path (stdout when omitted)");
    search_cmd->add_option("--trace", search_args.trace, "Write one state snapshot per iteration (JSON lines)");
    search_cmd->add_option("--config", search_args.config, "Key-value config file (default: $VSI_CONFIG)");
    search_cmd->add_flag("--lenient-srt", search_args.lenient_srt, "Accept '.' as the millisecond separator");
    search_args.overrides.add_to(*search_cmd, true);

    BenchArgs bench_args;
    auto* bench_cmd = app.add_subcommand("bench", "Run the synthetic keyframe benchmark");
    auto* corpus_opt = bench_cmd->add_option("--corpus", bench_args.corpus, "Corpus manifest (JSON array of case files)");
    auto* generate_opt =
        bench_cmd->add_option("--generate", bench_args.generate, "Generate cases: SEED,COUNT[,key=value...]");
    corpus_opt->excludes(generate_opt);
    bench_cmd->add_option("--config", bench_args.configs, "Config file; one report row each");
    bench_cmd->add_option("--text-weight", bench_args.text_weights, "Text weight; one report row each")
        ->check(CLI::Range(0.0, 1.0));
    bench_cmd->add_option("--output", bench_args.output, "Report JSON path");
    bench_cmd->add_option("--table", bench_args.table, "Plain-text table path");
    bench_cmd->add_option("--write-corpus", bench_args.write_corpus_dir, "Save the corpus used into this directory");
    bench_cmd->add_option("--jobs", bench_args.jobs, "Worker threads")->check(CLI::PositiveNumber);
    bench_args.overrides.add_to(*bench_cmd, false);

    ValidateArgs validate_args;
    auto* validate_cmd = app.add_subcommand("validate", "Check input files without searching");
    validate_cmd->add_option("--subtitles", validate_args.subtitles, "SRT file");
    validate_cmd->add_flag("--lenient-srt", validate_args.lenient_srt, "Accept '.' as the millisecond separator");
    validate_cmd->add_option("--targets", validate_args.targets, "Targets JSON file");
    validate_cmd->add_option("--detector-script", validate_args.detector_script, "Scripted detector fixture");
    validate_cmd->add_option("--case", validate_args.case_file, "Synthetic case file");
    validate_cmd->add_option("--corpus", validate_args.corpus, "Corpus manifest");
    validate_cmd->add_option("--config", validate_args.config, "Key-value config file");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }
    spdlog::set_level(spdlog::level::from_str(log_level));

    try {
        if (*search_cmd)
            return cmd_search(search_args, out);
        if (*bench_cmd) {
            if (bench_args.corpus.empty() && bench_args.generate.empty())
                throw InvalidInput("bench needs --corpus or --generate");
            return cmd_bench(bench_args, out);
        }
        return cmd_validate(validate_args, out);
    } catch (const ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const InvalidInput& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const SearchError& e) {
        err << "backend failure: " << e.what() << '\n';
        return kExitBackend;
    } catch (const BackendError& e) {
        err << "backend failure: " << e.what() << '\n';
        return kExitBackend;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kExitBackend;
    }
}

}  // namespace vsi::cli
