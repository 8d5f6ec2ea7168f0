#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "vsi/core.hpp"

namespace vsi {

/// One detector request worth of frames, conceptually an m x m grid.
struct FrameBatch {
    std::vector<FrameIndex> indices;  // in draw order
    std::int64_t grid_side = 0;
    bool partial = false;  // fewer than grid_side^2 unvisited frames were left

    bool empty() const noexcept { return indices.empty(); }
    std::size_t size() const noexcept { return indices.size(); }
};

struct Detection {
    FrameIndex frame = 0;
    std::string object_name;
    double confidence = 0.0;

    friend bool operator==(const Detection&, const Detection&) = default;
};

class DetectorBackend {
public:
    virtual ~DetectorBackend() = default;
    virtual std::vector<Detection> detect(const std::vector<FrameIndex>& frames,
                                          const std::vector<std::string>& vocabulary) = 0;
};

class TargetPlannerBackend {
public:
    virtual ~TargetPlannerBackend() = default;
    /// `k` is passed through untouched; planners may use it as a hint for how
    /// many frames the caller wants.
    virtual SemanticTargets plan(const std::string& query, std::int64_t k) = 0;
};

/// Grid side for the next batch: min(floor(sqrt(remaining)), max_grid_side), at least 1.
/// `max_grid_side <= 0` disables the cap.
std::int64_t grid_side_for(std::int64_t remaining_budget, std::int64_t max_grid_side);

/// Draw up to m^2 distinct unvisited frames without replacement, each draw
/// proportional to `distribution` renormalized over the frames still eligible.
/// Returns every unvisited frame (flagged partial) when fewer than m^2 remain,
/// and an empty batch when none do.
FrameBatch sample_frames(std::span<const double> distribution, std::int64_t remaining_budget,
                         const std::vector<bool>& visited, std::int64_t max_grid_side, Rng& rng);

struct FrameScore {
    FrameIndex frame = 0;
    double score = 0.0;

    friend bool operator==(const FrameScore&, const FrameScore&) = default;
};

/// Object score per batch frame (batch order): the best confidence * weight
/// among detections of objects in targets ∪ cues, or 0. Detections of other
/// objects are ignored with a warning.
std::vector<FrameScore> score_objects(const std::vector<Detection>& detections, const SemanticTargets& targets,
                                      const FrameBatch& batch);

/// Best confidence seen so far per object name.
using FoundLog = std::map<std::string, double, std::less<>>;

void record_detections(FoundLog& log, const std::vector<Detection>& detections);

/// True iff every target (cues excluded) has been seen with confidence >= tau.
bool check_all_found(const FoundLog& found, const SemanticTargets& targets, double tau);

/// Targets document: {"targets": [...], "cues": [...]} where each entry is a
/// bare name or {"name": ..., "weight": ...}. Omitted weights default to 1.0
/// for targets and 0.5 for cues. Throws ValidationError.
SemanticTargets targets_from_json(const nlohmann::json& doc);
nlohmann::json targets_to_json(const SemanticTargets& targets);
SemanticTargets plan_targets_from_file(const std::string& path);

/// Planner that ignores the query and returns a fixed target set.
class StaticTargetPlanner final : public TargetPlannerBackend {
public:
    explicit StaticTargetPlanner(SemanticTargets targets) : targets_(std::move(targets)) {}
    SemanticTargets plan(const std::string&, std::int64_t) override { return targets_; }

private:
    SemanticTargets targets_;
};

/// Planner backed by a targets file, read on every call.
class FileTargetPlanner final : public TargetPlannerBackend {
public:
    explicit FileTargetPlanner(std::string path) : path_(std::move(path)) {}
    SemanticTargets plan(const std::string&, std::int64_t) override { return plan_targets_from_file(path_); }

private:
    std::string path_;
};

}  // namespace vsi
