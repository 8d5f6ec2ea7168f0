#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "vsi/backends.hpp"
#include "vsi/fusion.hpp"
#include "vsi/search.hpp"

using namespace vsi;

namespace {

struct Scene {
    VideoTimeline timeline{4000, 30.0};
    SubtitleTrack track;
    DetectorScript script;
    SemanticTargets targets{{{"dog", 1.0}}, {{"frisbee", 0.5}}};
};

/// A dog is visible on frames 500..520 and the dialogue mentions it at the same time.
Scene planted_scene() {
    Scene s;
    s.track.segments = {
        {1, 2.0, 5.0, "good morning everyone"},
        {2, 500 / 30.0, 520 / 30.0, "look at the dog catching the frisbee"},
        {3, 60.0, 63.0, "lovely weather today"},
        {4, 100.0, 104.0, "we should head home soon"},
    };
    for (FrameIndex f = 500; f <= 520; ++f)
        s.script[f] = {{f, "dog", 0.9}};
    for (FrameIndex f = 2000; f < 2100; f += 10)
        s.script[f] = {{f, "frisbee", 0.8}};
    return s;
}

struct FailingDetector final : DetectorBackend {
    int ok_calls;
    explicit FailingDetector(int n) : ok_calls(n) {}
    std::vector<Detection> detect(const std::vector<FrameIndex>& frames, const std::vector<std::string>&) override {
        if (ok_calls-- <= 0)
            throw BackendError("connection reset");
        return {{frames.front(), "dog", 0.3}};
    }
};

struct RogueDetector final : DetectorBackend {
    Detection reply;
    std::vector<Detection> detect(const std::vector<FrameIndex>&, const std::vector<std::string>&) override {
        return {reply};
    }
};

struct EmptyPlanner final : TargetPlannerBackend {
    SemanticTargets plan(const std::string&, std::int64_t) override { return {}; }
};

}  // namespace

TEST_CASE("planted scenario: text guidance finds the event") {
    // The search stops as soon as the dog is seen, which can leave fewer than
    // four visited frames under the subtitle; the remaining slots then go to
    // frames with no text evidence, all tied below the in-window frames.
    auto scene = planted_scene();
    SearchConfig cfg;
    cfg.text_weight = 1.0;
    cfg.top_k = 4;
    cfg.frame_budget = 512;
    int all_inside = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        cfg.rng_seed = seed;
        ScriptedDetector det(scene.script);
        HashedBagOfWordsEncoder enc;
        StaticTargetPlanner planner(scene.targets);
        const auto out = search(scene.timeline, scene.track, "when does the dog catch the frisbee", cfg, det, enc,
                                planner);
        CAPTURE(seed);
        CHECK(out.termination == Termination::all_targets_found);
        REQUIRE(out.keyframes.size() == 4);
        CHECK(out.keyframes[0].frame >= 300);
        CHECK(out.keyframes[0].frame <= 720);
        double weakest_inside = INFINITY;
        std::vector<double> outside;
        for (const auto& k : out.keyframes) {
            if (k.frame >= 300 && k.frame <= 720)
                weakest_inside = std::min(weakest_inside, k.score);
            else
                outside.push_back(k.score);
        }
        for (double s : outside) {
            CHECK(s == outside.front());
            CHECK(s < weakest_inside);
        }
        all_inside += outside.empty();
    }
    CHECK(all_inside >= 10);
}

TEST_CASE("budget of one frame") {
    auto scene = planted_scene();
    SearchConfig cfg;
    cfg.frame_budget = 1;
    ScriptedDetector det(scene.script);
    HashedBagOfWordsEncoder enc;
    StaticTargetPlanner planner(scene.targets);
    const auto out = search(scene.timeline, scene.track, "dog", cfg, det, enc, planner);
    CHECK(out.iterations == 1);
    CHECK(out.frames_examined == 1);
    CHECK(out.termination == Termination::budget_exhausted);
    CHECK(out.keyframes.size() == 1);
}

TEST_CASE("empty subtitles at full text weight fall back to frame order") {
    auto scene = planted_scene();
    SearchConfig cfg;
    cfg.text_weight = 1.0;
    ScriptedDetector det(scene.script);
    HashedBagOfWordsEncoder enc;
    StaticTargetPlanner planner(scene.targets);
    ScoreState last(1);
    SearchOptions opts;
    opts.on_iteration = [&](const ScoreState& s, std::int64_t) { last = s; };
    const auto out = search(scene.timeline, SubtitleTrack{}, "dog", cfg, det, enc, planner, opts);
    CHECK(out.warnings.size() == 1);
    REQUIRE(out.keyframes.size() == 4);
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(out.keyframes[i].frame == last.visited[i]);
        CHECK(out.keyframes[i].score == 0.0);
    }
}

TEST_CASE("all frames visited before the budget runs out") {
    const VideoTimeline tl(30, 10.0);
    SearchConfig cfg;
    cfg.frame_budget = 100;
    ScriptedDetector det({});
    HashedBagOfWordsEncoder enc;
    StaticTargetPlanner planner({{{"ghost", 1.0}}, {}});
    const auto out = search(tl, SubtitleTrack{}, "ghost", cfg, det, enc, planner);
    CHECK(out.termination == Termination::frames_exhausted);
    CHECK(out.frames_examined == 30);
}

TEST_CASE("trace records one snapshot per iteration and runs are reproducible") {
    auto scene = planted_scene();
    SearchConfig cfg;
    cfg.max_grid_side = 3;
    cfg.frame_budget = 60;
    cfg.rng_seed = 99;
    SearchOptions opts;
    opts.record_trace = true;
    auto run = [&] {
        ScriptedDetector det(scene.script);
        HashedBagOfWordsEncoder enc;
        StaticTargetPlanner planner(scene.targets);
        return search(scene.timeline, scene.track, "frisbee", cfg, det, enc, planner, opts);
    };
    const auto a = run();
    const auto b = run();
    CHECK(static_cast<std::int64_t>(a.trace.size()) == a.iterations);
    REQUIRE(a.trace.size() == b.trace.size());
    for (std::size_t i = 0; i < a.trace.size(); ++i)
        CHECK(a.trace[i].dump() == b.trace[i].dump());
    CHECK(outcome_to_json(a, cfg).dump() == outcome_to_json(b, cfg).dump());
}

TEST_CASE("detector failure carries the partial outcome") {
    auto scene = planted_scene();
    SearchConfig cfg;
    cfg.max_grid_side = 2;
    FailingDetector det(3);
    HashedBagOfWordsEncoder enc;
    StaticTargetPlanner planner(scene.targets);
    try {
        search(scene.timeline, scene.track, "dog", cfg, det, enc, planner);
        FAIL("expected SearchError");
    } catch (const SearchError& e) {
        CHECK(e.partial().iterations == 3);
        CHECK(e.partial().frames_examined == 12);
        CHECK(e.partial().keyframes.size() == 4);
    }
}

TEST_CASE("detections outside the contract are ignored") {
    auto scene = planted_scene();
    SearchConfig cfg;
    cfg.text_weight = 0.0;
    HashedBagOfWordsEncoder enc;
    StaticTargetPlanner planner(scene.targets);
    for (const Detection& bad : {Detection{0, "dog", 1.5}, Detection{0, "unicorn", 0.9}, Detection{-4, "dog", 0.9}}) {
        RogueDetector det;
        det.reply = bad;
        const auto out = search(scene.timeline, scene.track, "dog", cfg, det, enc, planner);
        CHECK(out.termination == Termination::budget_exhausted);
        for (const auto& k : out.keyframes)
            CHECK(k.score == 0.0);
    }
}

TEST_CASE("planner without targets is a configuration error") {
    auto scene = planted_scene();
    ScriptedDetector det(scene.script);
    HashedBagOfWordsEncoder enc;
    EmptyPlanner planner;
    CHECK_THROWS_AS(search(scene.timeline, scene.track, "dog", SearchConfig{}, det, enc, planner), ConfigError);
    CHECK(det.calls() == 0);
}

TEST_CASE("invalid config is rejected before any work") {
    auto scene = planted_scene();
    ScriptedDetector det(scene.script);
    HashedBagOfWordsEncoder enc;
    StaticTargetPlanner planner(scene.targets);
    SearchConfig cfg;
    cfg.text_weight = -0.1;
    CHECK_THROWS_AS(search(scene.timeline, scene.track, "dog", cfg, det, enc, planner), ConfigError);
}

TEST_CASE("select_topk") {
    ScoreState s(10);
    const std::vector<FrameScore> scored{{0, 0.2}, {5, 0.9}, {9, 0.9}};
    assign_scores(s, scored);
    CHECK(select_topk(s, 2) == std::vector<FrameScore>{{5, 0.9}, {9, 0.9}});
    CHECK(select_topk(s, 1) == std::vector<FrameScore>{{5, 0.9}});
    CHECK(select_topk(s, 10).size() == 3);
    CHECK_THROWS_AS(select_topk(ScoreState(3), 1), InvalidState);
}

TEST_CASE("termination names round-trip") {
    for (auto t : {Termination::budget_exhausted, Termination::all_targets_found, Termination::frames_exhausted})
        CHECK(termination_from_string(to_string(t)) == t);
    CHECK_THROWS(termination_from_string("nope"));
}
