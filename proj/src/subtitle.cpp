#include "vsi/subtitle.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <regex>
#include <sstream>

#include <fmt/format.h>

namespace vsi {

namespace {

std::string_view trim(std::string_view s) {
    const auto ws = " \t\r\n\f\v";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos)
        return {};
    return s.substr(b, s.find_last_not_of(ws) - b + 1);
}

std::vector<std::string_view> split_lines(std::string_view raw) {
    std::vector<std::string_view> lines;
    std::size_t pos = 0;
    while (pos < raw.size()) {
        auto nl = raw.find('\n', pos);
        if (nl == std::string_view::npos)
            nl = raw.size();
        auto line = raw.substr(pos, nl - pos);
        if (!line.empty() && line.back() == '\r')
            line.remove_suffix(1);
        lines.push_back(line);
        pos = nl + 1;
    }
    return lines;
}

bool is_cue_number(std::string_view s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

std::string strip_tags(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '<') {
            const auto close = s.find('>', i + 1);
            if (close != std::string_view::npos) {
                i = close;
                continue;
            }
        }
        out.push_back(s[i]);
    }
    return out;
}

struct Timing {
    std::int64_t begin_ms;
    std::int64_t end_ms;
};

bool parse_timing(std::string_view line, bool lenient, Timing& out) {
    static const std::regex strict(R"(^[ \t]*(\d{2,}):(\d{2}):(\d{2}),(\d{3})[ \t]+-->[ \t]+(\d{2,}):(\d{2}):(\d{2}),(\d{3})[ \t]*$)");
    static const std::regex loose(R"(^[ \t]*(\d{2,}):(\d{2}):(\d{2})[,.](\d{3})[ \t]+-->[ \t]+(\d{2,}):(\d{2}):(\d{2})[,.](\d{3})[ \t]*$)");

    std::match_results<std::string_view::const_iterator> m;
    if (!std::regex_match(line.begin(), line.end(), m, lenient ? loose : strict))
        return false;

    auto field = [&](int i, std::int64_t& v) {
        const auto sv = std::string_view(&*m[i].first, static_cast<std::size_t>(m[i].length()));
        const auto [ptr, ec] = std::from_chars(sv.data(), sv.data() + sv.size(), v);
        return ec == std::errc{} && v < 1'000'000;
    };
    auto stamp = [&](int first, std::int64_t& ms) {
        std::int64_t h = 0, mi = 0, s = 0, milli = 0;
        if (!field(first, h) || !field(first + 1, mi) || !field(first + 2, s) || !field(first + 3, milli))
            return false;
        if (mi >= 60 || s >= 60)
            return false;
        ms = ((h * 60 + mi) * 60 + s) * 1000 + milli;
        return true;
    };
    return stamp(1, out.begin_ms) && stamp(5, out.end_ms);
}

std::string format_stamp(double seconds) {
    const auto total = static_cast<std::int64_t>(std::llround(seconds * 1000.0));
    const auto ms = total % 1000;
    const auto s = (total / 1000) % 60;
    const auto m = (total / 60000) % 60;
    const auto h = total / 3600000;
    return fmt::format("{:02}:{:02}:{:02},{:03}", h, m, s, ms);
}

}  // namespace

void sort_track(SubtitleTrack& track) {
    std::stable_sort(track.segments.begin(), track.segments.end(),
                     [](const SubtitleSegment& a, const SubtitleSegment& b) { return a.begin_s < b.begin_s; });
}

SubtitleTrack parse_srt(std::string_view raw, SrtOptions options) {
    if (raw.starts_with("\xEF\xBB\xBF"))
        raw.remove_prefix(3);

    const auto lines = split_lines(raw);
    SubtitleTrack track;
    std::size_t i = 0;
    while (i < lines.size()) {
        const auto header = trim(lines[i]);
        if (header.empty()) {
            ++i;
            continue;
        }
        if (!is_cue_number(header))
            throw ParseError(i + 1, "expected cue number, got '" + std::string(header) + "'");
        std::int64_t cue_number = 0;
        if (std::from_chars(header.data(), header.data() + header.size(), cue_number).ec != std::errc{})
            throw ParseError(i + 1, "cue number out of range");

        ++i;
        if (i >= lines.size() || trim(lines[i]).empty())
            throw ParseError(i + 1, "missing timestamp line after cue " + std::to_string(cue_number));
        Timing timing{};
        if (!parse_timing(lines[i], options.lenient, timing))
            throw ParseError(i + 1, "malformed timestamp line, expected 'HH:MM:SS,mmm --> HH:MM:SS,mmm'");
        if (timing.begin_ms > timing.end_ms)
            throw ParseError(i + 1, "cue begins after it ends");
        ++i;

        std::string text;
        for (; i < lines.size() && !trim(lines[i]).empty(); ++i) {
            const auto cleaned = strip_tags(lines[i]);
            const auto piece = trim(cleaned);
            if (piece.empty())
                continue;
            if (!text.empty())
                text.push_back(' ');
            text.append(piece);
        }
        if (text.empty())
            continue;

        track.segments.push_back(SubtitleSegment{
            .index = cue_number,
            .begin_s = static_cast<double>(timing.begin_ms) / 1000.0,
            .end_s = static_cast<double>(timing.end_ms) / 1000.0,
            .text = std::move(text),
        });
    }
    sort_track(track);
    return track;
}

SubtitleTrack load_srt_file(const std::string& path, SrtOptions options) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw InvalidInput("cannot open subtitle file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_srt(ss.str(), options);
}

std::string to_srt(const SubtitleTrack& track) {
    std::string out;
    std::int64_t n = 0;
    for (const auto& seg : track.segments) {
        ++n;
        out += std::to_string(seg.index >= 1 ? seg.index : n);
        out += '\n';
        out += format_stamp(seg.begin_s);
        out += " --> ";
        out += format_stamp(seg.end_s);
        out += '\n';
        out += seg.text;
        out += "\n\n";
    }
    return out;
}

}  // namespace vsi
