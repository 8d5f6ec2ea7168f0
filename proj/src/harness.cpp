#include "vsi/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <thread>

#include <fmt/format.h>

#include "vsi/search.hpp"

namespace vsi {

using nlohmann::json;

namespace {

constexpr const char* kTopicWords[] = {
    "harbor",  "midnight", "signal", "ticket",  "promise", "engine",  "orchard", "thunder", "silver",  "canyon",
    "marble",  "compass",  "velvet", "glacier", "falcon",  "meadow",  "circuit", "saddle",  "ember",   "quartz",
    "ribbon",  "tunnel",   "walnut", "beacon",  "cobalt",  "dune",    "fossil",  "garnet",  "harvest", "island",
    "jasmine", "kettle",   "ledger", "mosaic",  "nectar",  "oracle",  "pepper",  "quiver",  "riddle",  "summit",
    "timber",  "voyage",   "whistle", "zephyr", "anchor",  "bramble", "cinder",  "delta",   "ferry",   "granite",
    "hollow",  "ivory",    "jigsaw", "kernel",  "lagoon",  "mirror",  "nickel",  "pebble",  "raven",   "tundra",
};

// Dialogue filler; shares no token with the query template below.
constexpr const char* kFillerWords[] = {
    "okay",   "yeah",    "really",   "think",   "going",    "maybe",   "later",   "come",   "look",    "right",
    "just",   "know",    "never",    "always",  "something", "everyone", "today", "tomorrow", "please", "thanks",
    "sure",   "great",   "wait",     "listen",  "again",    "together", "enough", "little", "better",  "sorry",
    "hello",  "goodbye", "perhaps",  "actually", "somehow", "anyway",  "exactly", "honestly", "quite",  "almost",
    "soon",   "still",   "already",  "also",    "very",     "much",    "many",    "some",   "other",   "only",
    "back",   "away",    "around",   "over",    "inside",   "outside", "here",    "there",  "why",     "how",
    "we",     "you",     "they",     "me",      "us",       "them",    "my",      "your",   "our",     "this",
    "that",   "go",      "get",      "make",    "take",     "see",     "said",    "tell",   "feel",    "want",
    "need",   "try",     "keep",     "let",     "help",     "start",   "turn",    "show",   "hear",    "play",
    "run",    "move",    "believe",  "bring",   "stand",    "lose",    "pay",     "meet",   "learn",   "change",
};

constexpr const char* kKeyObjects[] = {
    "red umbrella", "bicycle",    "guitar", "birthday cake", "fire truck", "chess board", "yellow kite", "violin",
    "telescope",    "surfboard",  "piano",  "camera",        "football",   "suitcase",    "parrot",      "skateboard",
};
constexpr const char* kCommonObjects[] = {"person", "car", "dog", "chair", "table", "tree"};
constexpr const char* kCueObjects[] = {"window", "street sign", "sofa", "lamp", "bench", "door", "cup", "backpack"};

template <std::size_t N>
const char* pick(Rng& rng, const char* const (&words)[N]) {
    return words[rng.below(N)];
}

template <std::size_t N>
std::vector<std::string> pick_distinct(Rng& rng, const char* const (&words)[N], std::size_t count) {
    std::vector<std::string> out;
    while (out.size() < count) {
        std::string w = pick(rng, words);
        if (std::find(out.begin(), out.end(), w) == out.end())
            out.push_back(std::move(w));
    }
    return out;
}

double round_to(double v, double step) { return std::round(v / step) * step; }

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

void check_probability(double p, const char* name) {
    if (!(p >= 0.0 && p <= 1.0))
        throw InvalidInput(std::string(name) + " must be in [0, 1]");
}

}  // namespace

SyntheticCase generate_case(std::uint64_t seed, const CaseParams& params) {
    if (params.n_frames < 100)
        throw InvalidInput("n_frames must be >= 100");
    if (params.n_gt < 1)
        throw InvalidInput("n_gt must be >= 1");
    if (!(params.fps > 0.0) || !std::isfinite(params.fps))
        throw InvalidInput("fps must be positive");
    if (!(params.event_radius_s >= 0.0))
        throw InvalidInput("event_radius_s must be >= 0");
    check_probability(params.subtitle_alignment, "subtitle_alignment");
    check_probability(params.distractor_rate, "distractor_rate");
    check_probability(params.noise, "noise");

    // Each ground-truth frame owns a slot wide enough for its hit window.
    const FrameIndex slot = params.n_frames / params.n_gt;
    if (slot < 2 * kHitWindowFrames + 1)
        throw InvalidInput(fmt::format("{} ground-truth windows do not fit in {} frames", params.n_gt, params.n_frames));

    Rng rng(splitmix64(seed));
    SyntheticCase c;
    c.id = fmt::format("case-{:016x}", seed);
    c.seed = seed;
    c.timeline = VideoTimeline(params.n_frames, params.fps);
    const double fps = params.fps;
    const auto n = params.n_frames;

    for (std::int64_t g = 0; g < params.n_gt; ++g) {
        const FrameIndex lo = g * slot + kHitWindowFrames / 2;
        const FrameIndex hi = (g + 1) * slot - kHitWindowFrames / 2;
        c.gt_frames.push_back(lo + static_cast<FrameIndex>(rng.below(static_cast<std::uint64_t>(hi - lo))));
    }

    const std::string key_object = pick(rng, kKeyObjects);
    const std::string common_object = pick(rng, kCommonObjects);
    const auto cues = pick_distinct(rng, kCueObjects, 2);
    c.targets = SemanticTargets({{key_object, 1.0}, {common_object, 1.0}},
                                {{cues[0], kDefaultCueWeight}, {cues[1], kDefaultCueWeight}});

    const auto topic = pick_distinct(rng, kTopicWords, 3);
    c.query = fmt::format("when does the speaker mention the {} {} {}", topic[0], topic[1], topic[2]);

    // --- subtitles -----------------------------------------------------------
    std::vector<std::pair<double, double>> spoken;  // matched spans, kept free of filler
    std::int64_t cue_no = 0;
    for (auto gt : c.gt_frames) {
        if (!rng.bernoulli(params.subtitle_alignment))
            continue;
        const double center = static_cast<double>(gt) / fps + rng.uniform(-1.0, 1.0);
        const double half = rng.uniform(1.0, 2.5);
        const double b = round_to(std::max(0.0, center - half), 0.001);
        const double e = round_to(std::max(b, center + half), 0.001);
        c.track.segments.push_back({0, b, e,
                                    fmt::format("{} the {} {} {} {}", pick(rng, kFillerWords), topic[0], topic[1],
                                                topic[2], pick(rng, kFillerWords))});
        spoken.emplace_back(b - 1.0, e + 1.0);
    }

    const double duration = static_cast<double>(n) / fps;
    for (double t = rng.uniform(0.0, 2.0); t < duration;) {
        const double len = rng.uniform(1.5, 4.0);
        const double b = round_to(t, 0.001);
        const double e = round_to(std::min(t + len, duration), 0.001);
        const bool clashes = std::any_of(spoken.begin(), spoken.end(),
                                         [&](const auto& s) { return b < s.second && e > s.first; });
        if (!clashes && e > b) {
            const auto words = 4 + rng.below(5);
            std::string text;
            for (std::uint64_t k = 0; k < words; ++k) {
                if (!text.empty())
                    text.push_back(' ');
                text += pick(rng, kFillerWords);
            }
            if (rng.bernoulli(params.noise))
                text += " " + topic[rng.below(topic.size())];
            c.track.segments.push_back({0, b, e, std::move(text)});
        }
        t += len + rng.uniform(0.5, 3.0);
    }
    sort_track(c.track);
    for (auto& seg : c.track.segments)
        seg.index = ++cue_no;

    // --- detector script -----------------------------------------------------
    auto fire = [&](FrameIndex f, const std::string& name, double lo, double hi) {
        if (f < 0 || f >= n || rng.bernoulli(params.noise))
            return;
        c.detector_script[f].push_back({f, name, round_to(rng.uniform(lo, hi), 0.001)});
    };

    // Scenes away from the ground truth: the generic target, a low-confidence
    // look-alike of the key object and the cue objects appear at random.
    for (FrameIndex start = 0; start < n;) {
        const auto len = static_cast<FrameIndex>(rng.uniform(3.0, 12.0) * fps) + 1;
        const bool common = rng.bernoulli(params.distractor_rate);
        const bool lookalike = rng.bernoulli(params.distractor_rate / 2.0);
        const bool cue0 = rng.bernoulli(params.distractor_rate);
        const bool cue1 = rng.bernoulli(params.distractor_rate);
        for (FrameIndex f = start; f < std::min(n, start + len); ++f) {
            if (common) fire(f, common_object, 0.6, 0.95);
            if (lookalike) fire(f, key_object, 0.2, 0.45);
            if (cue0) fire(f, cues[0], 0.5, 0.9);
            if (cue1) fire(f, cues[1], 0.5, 0.9);
        }
        start += len;
    }

    const auto event_radius = static_cast<FrameIndex>(std::llround(params.event_radius_s * fps));
    const auto context_radius = static_cast<FrameIndex>(std::llround(2.0 * fps));
    for (auto gt : c.gt_frames) {
        for (FrameIndex f = gt - context_radius; f <= gt + context_radius; ++f)
            fire(f, common_object, 0.6, 0.95);
        for (FrameIndex f = gt - event_radius; f <= gt + event_radius; ++f)
            fire(f, key_object, 0.5, 0.8);
    }
    return c;
}

std::vector<SyntheticCase> generate_corpus(std::uint64_t master_seed, std::size_t count, const CaseParams& params) {
    std::vector<SyntheticCase> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i)
        out.push_back(generate_case(splitmix64(master_seed * 1'000'003ULL + i), params));
    return out;
}

void set_case_param(CaseParams& params, std::string_view key, std::string_view value) {
    auto number = [&]<typename T>(T& out) {
        const auto* end = value.data() + value.size();
        auto [ptr, ec] = std::from_chars(value.data(), end, out);
        if (ec != std::errc{} || ptr != end)
            throw InvalidInput("bad value for " + std::string(key) + ": '" + std::string(value) + "'");
    };
    if (key == "n_frames") number(params.n_frames);
    else if (key == "fps") number(params.fps);
    else if (key == "n_gt") number(params.n_gt);
    else if (key == "alignment" || key == "subtitle_alignment") number(params.subtitle_alignment);
    else if (key == "distractor_rate") number(params.distractor_rate);
    else if (key == "noise") number(params.noise);
    else if (key == "event_radius_s") number(params.event_radius_s);
    else throw InvalidInput("unknown case parameter '" + std::string(key) + "'");
}

// ----------------------------------------------------------------------------

json case_to_json(const SyntheticCase& c) {
    auto subtitles = json::array();
    for (const auto& s : c.track.segments)
        subtitles.push_back({{"index", s.index}, {"begin_s", s.begin_s}, {"end_s", s.end_s}, {"text", s.text}});
    return {
        {"id", c.id},
        {"seed", c.seed},
        {"frame_count", c.timeline.frame_count()},
        {"fps", c.timeline.fps()},
        {"query", c.query},
        {"gt_frames", c.gt_frames},
        {"targets", targets_to_json(c.targets)},
        {"subtitles", std::move(subtitles)},
        {"detector_script", detector_script_to_json(c.detector_script)},
    };
}

SyntheticCase case_from_json(const json& doc) {
    try {
        SyntheticCase c;
        c.id = doc.at("id").get<std::string>();
        c.seed = doc.at("seed").get<std::uint64_t>();
        c.timeline = VideoTimeline(doc.at("frame_count").get<FrameIndex>(), doc.at("fps").get<double>());
        c.query = doc.at("query").get<std::string>();
        c.gt_frames = doc.at("gt_frames").get<std::vector<FrameIndex>>();
        c.targets = targets_from_json(doc.at("targets"));
        for (const auto& s : doc.at("subtitles")) {
            SubtitleSegment seg{s.at("index").get<std::int64_t>(), s.at("begin_s").get<double>(),
                                s.at("end_s").get<double>(), s.at("text").get<std::string>()};
            if (!(seg.begin_s >= 0.0 && seg.begin_s <= seg.end_s) || seg.text.empty())
                throw ValidationError("invalid subtitle segment " + std::to_string(seg.index));
            c.track.segments.push_back(std::move(seg));
        }
        sort_track(c.track);
        c.detector_script = detector_script_from_json(doc.at("detector_script"));

        if (c.gt_frames.empty())
            throw ValidationError("case has no ground-truth frames");
        for (auto g : c.gt_frames)
            if (g < 0 || g >= c.timeline.frame_count())
                throw ValidationError("ground-truth frame " + std::to_string(g) + " outside the video");
        for (const auto& [f, _] : c.detector_script)
            if (f >= c.timeline.frame_count())
                throw ValidationError("detector script frame " + std::to_string(f) + " outside the video");
        return c;
    } catch (const json::exception& e) {
        throw ValidationError(std::string("malformed case document: ") + e.what());
    } catch (const InvalidInput& e) {
        throw ValidationError(std::string("malformed case document: ") + e.what());
    }
}

namespace {

json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw ValidationError("cannot open '" + path.string() + "'");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ValidationError("'" + path.string() + "' is not valid JSON: " + e.what());
    }
}

}  // namespace

std::vector<SyntheticCase> load_corpus(const std::string& manifest_path) {
    const std::filesystem::path manifest(manifest_path);
    const auto doc = read_json_file(manifest);
    if (!doc.is_array())
        throw ValidationError("corpus manifest must be a JSON array of case file paths");
    std::vector<SyntheticCase> cases;
    for (const auto& entry : doc) {
        if (!entry.is_string())
            throw ValidationError("corpus manifest entries must be strings");
        std::filesystem::path p = entry.get<std::string>();
        if (p.is_relative())
            p = manifest.parent_path() / p;
        cases.push_back(case_from_json(read_json_file(p)));
    }
    return cases;
}

std::string write_corpus(const std::string& dir, const std::vector<SyntheticCase>& cases) {
    std::filesystem::create_directories(dir);
    auto manifest = json::array();
    for (std::size_t i = 0; i < cases.size(); ++i) {
        const auto name = fmt::format("case_{:04}.json", i);
        std::ofstream(std::filesystem::path(dir) / name) << case_to_json(cases[i]).dump() << '\n';
        manifest.push_back(name);
    }
    const auto path = (std::filesystem::path(dir) / "manifest.json").string();
    std::ofstream(path) << manifest.dump(2) << '\n';
    return path;
}

// ----------------------------------------------------------------------------

bool keyframe_hit(const std::vector<FrameIndex>& predicted, const std::vector<FrameIndex>& gt_frames,
                  FrameIndex window) {
    for (auto p : predicted)
        for (auto g : gt_frames)
            if (std::abs(p - g) <= window)
                return true;
    return false;
}

CaseResult run_case(const SyntheticCase& c, const SearchConfig& cfg) {
    CaseResult r;
    r.case_id = c.id;
    SearchConfig local = cfg;
    local.rng_seed = splitmix64(cfg.rng_seed ^ splitmix64(c.seed));

    HashedBagOfWordsEncoder encoder;
    ScriptedDetector detector(c.detector_script);
    StaticTargetPlanner planner(c.targets);
    try {
        const auto outcome = search(c.timeline, c.track, c.query, local, detector, encoder, planner);
        for (const auto& k : outcome.keyframes)
            r.keyframes.push_back(k.frame);
        r.hit = keyframe_hit(r.keyframes, c.gt_frames);
        r.iterations = outcome.iterations;
        r.frames_examined = outcome.frames_examined;
        r.termination = std::string(to_string(outcome.termination));
    } catch (const Error& e) {
        r.failed = true;
        r.error = e.what();
    }
    return r;
}

BenchmarkReport run_benchmark(const std::vector<SyntheticCase>& corpus, const std::vector<LabelledConfig>& configs,
                              unsigned jobs) {
    if (corpus.empty())
        throw InvalidInput("benchmark corpus is empty");
    if (configs.empty())
        throw InvalidInput("benchmark needs at least one configuration");
    for (const auto& c : configs)
        c.config.validate();

    const std::size_t total = corpus.size() * configs.size();
    std::vector<CaseResult> results(total);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < total; i = next++)
            results[i] = run_case(corpus[i % corpus.size()], configs[i / corpus.size()].config);
    };
    const unsigned threads = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(total)));
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < threads; ++t)
            pool.emplace_back(worker);
    }

    BenchmarkReport report;
    for (std::size_t ci = 0; ci < configs.size(); ++ci) {
        BenchmarkRow row;
        row.label = configs[ci].label;
        row.config = configs[ci].config;
        row.cases = corpus.size();
        double iterations = 0.0, frames = 0.0;
        for (std::size_t k = 0; k < corpus.size(); ++k) {
            auto& r = results[ci * corpus.size() + k];
            if (r.failed) {
                ++row.failures;
            } else {
                row.hits += r.hit ? 1 : 0;
                iterations += static_cast<double>(r.iterations);
                frames += static_cast<double>(r.frames_examined);
            }
            row.details.push_back(std::move(r));
        }
        const auto ok = static_cast<double>(row.cases - row.failures);
        if (ok > 0) {
            row.hit_rate = static_cast<double>(row.hits) / ok;
            row.mean_iterations = iterations / ok;
            row.mean_frames_examined = frames / ok;
        }
        report.rows.push_back(std::move(row));
    }
    return report;
}

json BenchmarkReport::to_json() const {
    auto rows_json = json::array();
    for (const auto& row : rows) {
        auto details = json::array();
        for (const auto& d : row.details) {
            json entry = {{"case", d.case_id}, {"failed", d.failed}};
            if (d.failed) {
                entry["error"] = d.error;
            } else {
                entry["hit"] = d.hit;
                entry["iterations"] = d.iterations;
                entry["frames_examined"] = d.frames_examined;
                entry["termination"] = d.termination;
                entry["keyframes"] = d.keyframes;
            }
            details.push_back(std::move(entry));
        }
        rows_json.push_back({
            {"label", row.label},
            {"config", config_to_json(row.config)},
            {"cases", row.cases},
            {"failures", row.failures},
            {"hits", row.hits},
            {"hit_rate", row.hit_rate},
            {"mean_iterations", row.mean_iterations},
            {"mean_frames_examined", row.mean_frames_examined},
            {"cases_detail", std::move(details)},
        });
    }
    return {
        {"metric",
         {{"name", "keyframe_hit"},
          {"window_frames", kHitWindowFrames},
          {"rule", "a case is a hit when any top-K keyframe is within window_frames (inclusive) of any "
                   "ground-truth frame; cases with several ground-truth frames count a match to any of them"}}},
        {"rows", std::move(rows_json)},
    };
}

std::string BenchmarkReport::to_table() const {
    std::size_t label_width = 6;
    for (const auto& row : rows)
        label_width = std::max(label_width, row.label.size());
    std::string out = fmt::format("{:<{}}  {:>11}  {:>5}  {:>6}  {:>8}  {:>9}  {:>11}\n", "config", label_width,
                                  "text_weight", "cases", "failed", "hit_rate", "mean_iter", "mean_frames");
    for (const auto& row : rows)
        out += fmt::format("{:<{}}  {:>11.2f}  {:>5}  {:>6}  {:>7.2f}%  {:>9.2f}  {:>11.2f}\n", row.label, label_width,
                           row.config.text_weight, row.cases, row.failures, 100.0 * row.hit_rate,
                           row.mean_iterations, row.mean_frames_examined);
    return out;
}

}  // namespace vsi
