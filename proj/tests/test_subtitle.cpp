#include <doctest.h>

#include <nlohmann/json.hpp>

#include "support/test_support.hpp"
#include "vsi/subtitle.hpp"

using namespace vsi;

TEST_CASE("parse_srt: single cue") {
    const auto track = parse_srt("1\n00:00:01,000 --> 00:00:03,500\nhello world\n\n");
    REQUIRE(track.size() == 1);
    CHECK(track.segments[0].begin_s == 1.0);
    CHECK(track.segments[0].end_s == 3.5);
    CHECK(track.segments[0].text == "hello world");
    CHECK(track.segments[0].index == 1);
}

TEST_CASE("parse_srt: empty input") {
    CHECK(parse_srt("").empty());
}

TEST_CASE("parse_srt: begin after end is rejected at the timing line") {
    try {
        parse_srt("1\n00:00:05,000 --> 00:00:02,000\nbad\n");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line() == 2);
    }
}

TEST_CASE("parse_srt: lenient mode only affects the separator") {
    const std::string dotted = "1\n00:00:01.250 --> 00:00:02.000\nx\n";
    CHECK_THROWS_AS(parse_srt(dotted), ParseError);
    const auto t = parse_srt(dotted, {.lenient = true});
    REQUIRE(t.size() == 1);
    CHECK(t.segments[0].begin_s == 1.25);
    CHECK_THROWS_AS(parse_srt("1\n00:00:01;250 --> 00:00:02,000\nx\n", {.lenient = true}), ParseError);
}

TEST_CASE("parse_srt: huge numbers are parse errors, not crashes") {
    CHECK_THROWS_AS(parse_srt("99999999999999999999999\n00:00:01,000 --> 00:00:02,000\nx\n"), ParseError);
    CHECK_THROWS_AS(parse_srt("1\n99999999999999999999:00:01,000 --> 00:00:02,000\nx\n"), ParseError);
}

TEST_CASE("segment_center") {
    CHECK(segment_center({.begin_s = 10, .end_s = 14}) == 12.0);
    CHECK(segment_center({.begin_s = 3, .end_s = 3}) == 3.0);
    CHECK(segment_center({.begin_s = 0, .end_s = 1}) == 0.5);
}

TEST_CASE("to_srt round-trips") {
    const auto track = parse_srt("1\n00:00:01,000 --> 00:00:02,500\nalpha beta\n\n2\n01:02:03,004 --> 01:02:04,000\ngamma\n");
    CHECK(parse_srt(to_srt(track)) == track);
}

TEST_CASE("SRT fixture suite parses and rejects as annotated") {
    const auto dir = testing::fixture_dir() / "srt";
    const auto annotations = nlohmann::json::parse(testing::read_file(dir / "annotations.json"));
    std::size_t valid = 0, malformed = 0;
    for (const auto& a : annotations) {
        const auto file = a.at("file").get<std::string>();
        CAPTURE(file);
        const SrtOptions opts{.lenient = a.value("lenient", false)};
        if (a.at("valid").get<bool>()) {
            ++valid;
            const auto track = load_srt_file((dir / file).string(), opts);
            CHECK(track.size() == a.at("segments").get<std::size_t>());
            auto check_seg = [&](const SubtitleSegment& seg, const nlohmann::json& want) {
                CHECK(seg.begin_s == want.at("begin_s").get<double>());
                CHECK(seg.end_s == want.at("end_s").get<double>());
                CHECK(seg.text == want.at("text").get<std::string>());
            };
            if (a.contains("first"))
                check_seg(track.segments.front(), a["first"]);
            if (a.contains("last"))
                check_seg(track.segments.back(), a["last"]);
        } else {
            ++malformed;
            try {
                load_srt_file((dir / file).string(), opts);
                FAIL("accepted a malformed file");
            } catch (const ParseError& e) {
                CHECK(e.line() == a.at("line").get<std::size_t>());
            }
        }
    }
    CHECK(valid == 20);
    CHECK(malformed == 10);
}
