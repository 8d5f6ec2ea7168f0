#include <doctest.h>

#include <cmath>
#include <limits>
#include <set>

#include "support/test_support.hpp"
#include "vsi/core.hpp"

using namespace vsi;

TEST_CASE("seconds_to_frame floors and clamps") {
    const VideoTimeline tl(900, 30.0);
    CHECK(seconds_to_frame(0.0, tl) == 0);
    CHECK(seconds_to_frame(2.0, tl) == 60);
    CHECK(seconds_to_frame(1e9, tl) == 899);
    CHECK(seconds_to_frame(-5.0, tl) == 0);
    CHECK(seconds_to_frame(2.0 - 1e-9, tl) == 59);
    CHECK_THROWS_AS(seconds_to_frame(std::nan(""), tl), InvalidInput);
    CHECK_THROWS_AS(seconds_to_frame(std::numeric_limits<double>::infinity(), tl), InvalidInput);
}

TEST_CASE("VideoTimeline validation") {
    CHECK_THROWS_AS(VideoTimeline(0, 30.0), InvalidInput);
    CHECK_THROWS_AS(VideoTimeline(10, 0.0), InvalidInput);
    CHECK_THROWS_AS(VideoTimeline(10, std::nan("")), InvalidInput);
    const VideoTimeline tl(300, 25.0);
    CHECK(tl.duration_s() == doctest::Approx(12.0));
    CHECK(tl.frame_to_seconds(50) == doctest::Approx(2.0));
}

TEST_CASE("SemanticTargets rules") {
    const SemanticTargets t({{"dog", 0.8}}, {{"park bench", 0.5}});
    CHECK(t.weight_of("dog") == 0.8);
    CHECK(t.weight_of("park bench") == 0.5);
    CHECK_FALSE(t.weight_of("cat").has_value());
    CHECK(t.is_target("dog"));
    CHECK_FALSE(t.is_target("park bench"));
    CHECK(t.vocabulary() == std::vector<std::string>{"dog", "park bench"});

    CHECK_THROWS_AS(SemanticTargets({{"dog", 1.0}}, {{"dog", 0.5}}), ValidationError);
    CHECK_THROWS_AS(SemanticTargets({{"dog", 0.0}}, {}), ValidationError);
    CHECK_THROWS_AS(SemanticTargets({{"dog", 1.5}}, {}), ValidationError);
    CHECK_THROWS_AS(SemanticTargets({{"", 1.0}}, {}), ValidationError);
}

TEST_CASE("SearchConfig validation") {
    SearchConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.text_weight = 1.5;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = {};
    cfg.frame_budget = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = {};
    cfg.top_k = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = {};
    cfg.extension_radius_s = -1;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("config text round-trips losslessly") {
    SearchConfig cfg;
    cfg.text_weight = 0.1 + 0.2;
    cfg.sim_threshold = 1.0 / 3.0;
    cfg.frame_budget = 999;
    cfg.rng_seed = 18446744073709551615ull;
    cfg.uncapped_batches = true;
    CHECK(parse_config(serialize_config(cfg)) == cfg);
}

TEST_CASE("parse_config syntax") {
    const auto cfg = parse_config("# comment\n\ntext_weight = 0.7\n  top_k=2  # trailing\nrescale_fused = true\n");
    CHECK(cfg.text_weight == 0.7);
    CHECK(cfg.top_k == 2);
    CHECK(cfg.rescale_fused);
    CHECK(cfg.frame_budget == SearchConfig{}.frame_budget);

    CHECK_THROWS_AS(parse_config("bogus = 1\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("top_k = two\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("top_k\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("rescale_fused = maybe\n"), ConfigError);
}

TEST_CASE("parse_config layers onto a base") {
    SearchConfig base;
    base.top_k = 9;
    const auto cfg = parse_config("text_weight = 0.25\n", base);
    CHECK(cfg.top_k == 9);
    CHECK(cfg.text_weight == 0.25);
}

TEST_CASE("every config key is settable") {
    for (const auto& key : config_keys()) {
        SearchConfig cfg;
        const bool is_bool = key == "uncapped_batches" || key == "rescale_fused";
        CHECK_NOTHROW(set_config_value(cfg, key, is_bool ? "true" : "3"));
        CHECK_FALSE(cfg == SearchConfig{});
    }
}

TEST_CASE("load_config_file") {
    testing::TempDir dir;
    testing::write_file(dir.file("c.cfg"), "frame_budget = 64\n");
    CHECK(load_config_file(dir.file("c.cfg")).frame_budget == 64);
    CHECK_THROWS_AS(load_config_file(dir.file("missing.cfg")), ConfigError);
}

TEST_CASE("ScoreState starts uniform and tracks visits in order") {
    ScoreState s(5);
    for (double p : s.distribution)
        CHECK(p == doctest::Approx(0.2));
    s.mark_visited(3);
    s.mark_visited(1);
    s.mark_visited(3);
    CHECK(s.visited == std::vector<FrameIndex>{1, 3});
    CHECK(s.is_visited(1));
    CHECK_FALSE(s.is_visited(0));
}

TEST_CASE("Rng is seeded and bounded") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i)
        CHECK(a.next() == b.next());
    Rng r(1);
    std::set<std::uint64_t> seen;
    for (int i = 0; i < 10000; ++i) {
        const double u = r.uniform01();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        const auto k = r.below(7);
        CHECK(k < 7);
        seen.insert(k);
    }
    CHECK(seen.size() == 7);
    CHECK_THROWS_AS(r.below(0), InvalidInput);
}
