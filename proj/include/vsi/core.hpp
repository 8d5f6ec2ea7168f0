#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace vsi {

// ----------------------------------------------------------------------------
// Errors
// ----------------------------------------------------------------------------

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Caller passed a value outside an operation's domain.
class InvalidInput : public Error {
public:
    using Error::Error;
};

/// A user-supplied document (targets file, detector script, case file) is inconsistent.
class ValidationError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class InvalidState : public Error {
public:
    using Error::Error;
};

/// Transport or protocol failure talking to a detector / encoder / planner.
class BackendError : public Error {
public:
    using Error::Error;
};

/// Parse failure with the 1-based source line it was detected on.
class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& what)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

// ----------------------------------------------------------------------------
// Timeline
// ----------------------------------------------------------------------------

/// 0-based frame index.
using FrameIndex = std::int64_t;

class VideoTimeline {
public:
    VideoTimeline(FrameIndex frame_count, double fps);

    FrameIndex frame_count() const noexcept { return frame_count_; }
    double fps() const noexcept { return fps_; }
    std::size_t size() const noexcept { return static_cast<std::size_t>(frame_count_); }

    double frame_to_seconds(FrameIndex frame) const noexcept {
        return static_cast<double>(frame) / fps_;
    }
    double duration_s() const noexcept { return static_cast<double>(frame_count_) / fps_; }

private:
    FrameIndex frame_count_;
    double fps_;
};

/// clamp(floor(t * fps), 0, frame_count - 1). Throws InvalidInput on non-finite t.
FrameIndex seconds_to_frame(double t, const VideoTimeline& timeline);

// ----------------------------------------------------------------------------
// Semantic targets
// ----------------------------------------------------------------------------

struct WeightedObject {
    std::string name;
    double weight = 1.0;

    friend bool operator==(const WeightedObject&, const WeightedObject&) = default;
};

inline constexpr double kDefaultTargetWeight = 1.0;
inline constexpr double kDefaultCueWeight = 0.5;

/// Target objects (required for termination) and cue objects (contextual hints),
/// each carrying an importance weight in (0, 1].
class SemanticTargets {
public:
    SemanticTargets() = default;
    SemanticTargets(std::vector<WeightedObject> targets, std::vector<WeightedObject> cues);

    const std::vector<WeightedObject>& targets() const noexcept { return targets_; }
    const std::vector<WeightedObject>& cues() const noexcept { return cues_; }

    /// Weight of `name` in targets ∪ cues, or nullopt when it is in neither.
    std::optional<double> weight_of(std::string_view name) const;
    bool is_target(std::string_view name) const;

    /// Targets followed by cues, in declaration order.
    std::vector<std::string> vocabulary() const;

    friend bool operator==(const SemanticTargets&, const SemanticTargets&) = default;

private:
    std::vector<WeightedObject> targets_;
    std::vector<WeightedObject> cues_;
};

// ----------------------------------------------------------------------------
// Configuration
// ----------------------------------------------------------------------------

struct SearchConfig {
    double text_weight = 1.0;          // fusion weight of the subtitle stream; objects get 1 - this
    double sim_threshold = 0.5;        // soft-threshold knee
    double amplification = 2.0;        // soft-threshold gain above the knee
    double segment_threshold = 0.2;    // enhanced similarity a segment needs to propagate
    double extension_radius_s = 2.0;   // seconds added on both sides of a subtitle segment
    double detection_threshold = 0.5;  // confidence at which a target counts as found
    std::int64_t frame_budget = 128;
    std::int64_t max_grid_side = 8;
    std::int64_t top_k = 4;
    double znorm_epsilon = 1e-6;
    std::uint64_t rng_seed = 0;
    // Size every batch as floor(sqrt(remaining))^2, ignoring max_grid_side.
    bool uncapped_batches = false;
    // Min-max rescale fused scores to [0, 1] before they enter the distribution update.
    bool rescale_fused = false;

    /// Throws ConfigError naming the first offending field.
    void validate() const;

    friend bool operator==(const SearchConfig&, const SearchConfig&) = default;
};

/// Field names accepted by the key-value config format, in serialization order.
const std::vector<std::string>& config_keys();

/// Apply one `key = value` assignment. Throws ConfigError on unknown keys or bad values.
void set_config_value(SearchConfig& cfg, std::string_view key, std::string_view value);

/// Parse `key = value` lines (blank lines and `#` comments ignored) on top of `base`.
SearchConfig parse_config(std::string_view text, SearchConfig base = {});
SearchConfig load_config_file(const std::string& path, SearchConfig base = {});

/// Lossless serialization: parse_config(serialize_config(c)) == c.
std::string serialize_config(const SearchConfig& cfg);

// ----------------------------------------------------------------------------
// Score state
// ----------------------------------------------------------------------------

/// Per-frame scores, visited set and current sampling distribution for one search run.
struct ScoreState {
    explicit ScoreState(std::size_t frame_count);

    std::vector<double> object_scores;
    std::vector<double> text_scores;
    std::vector<double> fused_scores;
    std::vector<FrameIndex> visited;  // sorted ascending
    std::vector<bool> visited_mask;
    std::vector<double> distribution;

    std::size_t size() const noexcept { return distribution.size(); }
    bool is_visited(FrameIndex f) const { return visited_mask[static_cast<std::size_t>(f)]; }
    void mark_visited(FrameIndex f);

    friend bool operator==(const ScoreState&, const ScoreState&) = default;
};

// ----------------------------------------------------------------------------
// Random numbers
// ----------------------------------------------------------------------------

/// Seeded generator with platform-independent derived distributions, so a seed
/// reproduces the same search on every standard library.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }
    /// Uniform in [0, 1).
    double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }
    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n);
    bool bernoulli(double p) { return uniform01() < p; }

private:
    std::mt19937_64 engine_;
};

}  // namespace vsi
