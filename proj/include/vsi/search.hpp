#pragma once

#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "vsi/core.hpp"
#include "vsi/subtitle.hpp"
#include "vsi/textstream.hpp"
#include "vsi/videostream.hpp"

namespace vsi {

enum class Termination { budget_exhausted, all_targets_found, frames_exhausted };

std::string_view to_string(Termination t);
Termination termination_from_string(std::string_view s);

struct Keyframe {
    FrameIndex frame = 0;
    double score = 0.0;
    double time_s = 0.0;
};

struct SearchOutcome {
    std::vector<Keyframe> keyframes;  // best first, ties by ascending frame
    std::int64_t iterations = 0;
    std::int64_t frames_examined = 0;
    Termination termination = Termination::budget_exhausted;
    SemanticTargets targets;
    std::vector<std::string> warnings;
    std::vector<nlohmann::json> trace;  // one snapshot per iteration when requested
};

/// Raised when a backend fails mid-search; carries what had been computed so far.
class SearchError : public Error {
public:
    SearchError(const std::string& what, SearchOutcome partial) : Error(what), partial_(std::move(partial)) {}
    const SearchOutcome& partial() const noexcept { return partial_; }

private:
    SearchOutcome partial_;
};

struct SearchOptions {
    bool record_trace = false;
    /// Called after every iteration with the state and the 1-based iteration number.
    std::function<void(const ScoreState&, std::int64_t)> on_iteration;
};

/// The k best stored fused scores among visited frames, ties broken by
/// ascending frame index. Throws InvalidState when nothing has been visited.
std::vector<FrameScore> select_topk(const ScoreState& state, std::int64_t k);

/// Iterative keyframe search:
///
///   plan targets -> subtitle stream once -> uniform distribution, then
///   sample batch -> detect -> object scores -> fuse -> update distribution
///
/// until the frame budget is spent, every target has been seen at
/// >= detection_threshold, or no unvisited frames remain. Returns the top_k
/// visited frames by fused score.
SearchOutcome search(const VideoTimeline& timeline, const SubtitleTrack& track, const std::string& query,
                     const SearchConfig& cfg, DetectorBackend& detector, TextEncoderBackend& encoder,
                     TargetPlannerBackend& planner, const SearchOptions& options = {});

nlohmann::json config_to_json(const SearchConfig& cfg);

/// Result document: keyframes, iteration count, frames examined, termination
/// reason and the configuration that produced them.
nlohmann::json outcome_to_json(const SearchOutcome& outcome, const SearchConfig& cfg);

}  // namespace vsi
