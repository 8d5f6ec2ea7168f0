#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "vsi/core.hpp"

namespace vsi {

struct SubtitleSegment {
    std::int64_t index = 0;  // cue number as written in the file
    double begin_s = 0.0;
    double end_s = 0.0;
    std::string text;

    friend bool operator==(const SubtitleSegment&, const SubtitleSegment&) = default;
};

/// Timed text segments sorted by begin time (stable on ties).
struct SubtitleTrack {
    std::vector<SubtitleSegment> segments;

    bool empty() const noexcept { return segments.empty(); }
    std::size_t size() const noexcept { return segments.size(); }

    friend bool operator==(const SubtitleTrack&, const SubtitleTrack&) = default;
};

struct SrtOptions {
    /// Also accept '.' as the millisecond separator.
    bool lenient = false;
};

/// Parse SRT text. Accepts an optional UTF-8 BOM and both LF and CRLF line
/// endings. Multi-line cue text is joined with single spaces, HTML-style tags
/// are removed and cues left empty are dropped.
///
/// Throws ParseError with the 1-based line number of the offending line.
SubtitleTrack parse_srt(std::string_view raw, SrtOptions options = {});
SubtitleTrack load_srt_file(const std::string& path, SrtOptions options = {});

/// Write a track back as SRT. Timestamps are rounded to the millisecond; cues
/// keep their number (segments without one are numbered by position).
std::string to_srt(const SubtitleTrack& track);

/// Segment midpoint in seconds.
inline double segment_center(const SubtitleSegment& seg) { return (seg.begin_s + seg.end_s) / 2.0; }

/// Sort by begin_s ascending, keeping file order on ties.
void sort_track(SubtitleTrack& track);

}  // namespace vsi
