#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vsi/backends.hpp"
#include "vsi/core.hpp"
#include "vsi/subtitle.hpp"

namespace vsi {

/// A labelled synthetic video: subtitles, detector behaviour and the frames
/// a correct search should land near.
struct SyntheticCase {
    std::string id;
    VideoTimeline timeline{1, 1.0};
    SubtitleTrack track;
    std::string query;
    SemanticTargets targets;
    DetectorScript detector_script;
    std::vector<FrameIndex> gt_frames;
    std::uint64_t seed = 0;
};

struct CaseParams {
    FrameIndex n_frames = 4000;
    double fps = 30.0;
    std::int64_t n_gt = 1;
    // Probability that a ground-truth moment is accompanied by a subtitle matching the query.
    double subtitle_alignment = 1.0;
    // Fraction of scenes in which distracting objects appear away from the ground truth.
    double distractor_rate = 0.3;
    // Per-frame miss probability of the detector and chance of stray query words in filler dialogue.
    double noise = 0.1;
    // Seconds on either side of a ground-truth frame in which the key object is visible.
    double event_radius_s = 1.0;
};

/// Throws InvalidInput on infeasible parameters (too many ground-truth
/// windows for the video length, n_frames < 100, probabilities outside [0, 1]).
SyntheticCase generate_case(std::uint64_t seed, const CaseParams& params);

/// Cases seeded deterministically from `master_seed`.
std::vector<SyntheticCase> generate_corpus(std::uint64_t master_seed, std::size_t count, const CaseParams& params);

/// Parse "key=value" overrides (n_frames, fps, n_gt, alignment, distractor_rate, noise, event_radius_s).
void set_case_param(CaseParams& params, std::string_view key, std::string_view value);

nlohmann::json case_to_json(const SyntheticCase& c);
SyntheticCase case_from_json(const nlohmann::json& doc);

/// Manifest is a JSON array of case file paths, relative to the manifest's directory.
std::vector<SyntheticCase> load_corpus(const std::string& manifest_path);
/// Writes one file per case plus `manifest.json` into `dir`; returns the manifest path.
std::string write_corpus(const std::string& dir, const std::vector<SyntheticCase>& cases);

inline constexpr FrameIndex kHitWindowFrames = 200;

/// True iff some prediction lies within `window` frames (inclusive) of some ground-truth frame.
bool keyframe_hit(const std::vector<FrameIndex>& predicted, const std::vector<FrameIndex>& gt_frames,
                  FrameIndex window = kHitWindowFrames);

struct CaseResult {
    std::string case_id;
    bool failed = false;
    std::string error;
    bool hit = false;
    std::int64_t iterations = 0;
    std::int64_t frames_examined = 0;
    std::string termination;
    std::vector<FrameIndex> keyframes;
};

/// Run one case with in-process stub backends. The search seed is derived
/// from both cfg.rng_seed and the case seed.
CaseResult run_case(const SyntheticCase& c, const SearchConfig& cfg);

struct BenchmarkRow {
    std::string label;
    SearchConfig config;
    std::size_t cases = 0;
    std::size_t failures = 0;
    std::size_t hits = 0;
    double hit_rate = 0.0;  // hits / successful cases
    double mean_iterations = 0.0;
    double mean_frames_examined = 0.0;
    std::vector<CaseResult> details;
};

struct BenchmarkReport {
    std::vector<BenchmarkRow> rows;

    nlohmann::json to_json() const;
    /// Aligned plain-text table.
    std::string to_table() const;
};

struct LabelledConfig {
    std::string label;
    SearchConfig config;
};

/// Every config over every case. `jobs` > 1 runs cases on a worker pool; the
/// report does not depend on it.
BenchmarkReport run_benchmark(const std::vector<SyntheticCase>& corpus, const std::vector<LabelledConfig>& configs,
                              unsigned jobs = 1);

}  // namespace vsi
