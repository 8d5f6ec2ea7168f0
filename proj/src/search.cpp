#include "vsi/search.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include <spdlog/spdlog.h>

#include "vsi/fusion.hpp"

namespace vsi {

std::string_view to_string(Termination t) {
    switch (t) {
        case Termination::budget_exhausted: return "budget_exhausted";
        case Termination::all_targets_found: return "all_targets_found";
        case Termination::frames_exhausted: return "frames_exhausted";
    }
    return "unknown";
}

Termination termination_from_string(std::string_view s) {
    if (s == "budget_exhausted") return Termination::budget_exhausted;
    if (s == "all_targets_found") return Termination::all_targets_found;
    if (s == "frames_exhausted") return Termination::frames_exhausted;
    throw InvalidInput("unknown termination reason '" + std::string(s) + "'");
}

std::vector<FrameScore> select_topk(const ScoreState& state, std::int64_t k) {
    if (state.visited.empty())
        throw InvalidState("select_topk: no visited frames");
    if (k < 1)
        throw InvalidInput("select_topk: k must be >= 1");

    std::vector<FrameScore> ranked;
    ranked.reserve(state.visited.size());
    for (auto f : state.visited)
        ranked.push_back({f, state.fused_scores[static_cast<std::size_t>(f)]});
    const auto take = std::min<std::size_t>(static_cast<std::size_t>(k), ranked.size());
    std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(take), ranked.end(),
                      [](const FrameScore& a, const FrameScore& b) {
                          return a.score != b.score ? a.score > b.score : a.frame < b.frame;
                      });
    ranked.resize(take);
    return ranked;
}

namespace {

/// Drop detections that break the backend contract, keeping the rest.
std::vector<Detection> validated(std::vector<Detection> detections, const FrameBatch& batch,
                                 const SemanticTargets& targets) {
    const std::unordered_set<FrameIndex> requested(batch.indices.begin(), batch.indices.end());
    std::erase_if(detections, [&](const Detection& d) {
        if (!requested.contains(d.frame)) {
            spdlog::warn("detector returned frame {} which was not requested", d.frame);
            return true;
        }
        if (!targets.weight_of(d.object_name)) {
            spdlog::warn("detector returned '{}' which is not in the vocabulary", d.object_name);
            return true;
        }
        if (!std::isfinite(d.confidence) || d.confidence < 0.0 || d.confidence > 1.0) {
            spdlog::warn("detector returned confidence {} for '{}', outside [0, 1]", d.confidence, d.object_name);
            return true;
        }
        return false;
    });
    return detections;
}

/// Fused scores for every visited frame: text z-scores use whole-timeline
/// statistics, object z-scores the statistics of the frames examined so far.
std::vector<FrameScore> fuse_visited(const ScoreState& state, std::span<const double> text_z,
                                     const SearchConfig& cfg) {
    std::vector<double> object_scores, text_at;
    object_scores.reserve(state.visited.size());
    text_at.reserve(state.visited.size());
    for (auto f : state.visited) {
        object_scores.push_back(state.object_scores[static_cast<std::size_t>(f)]);
        text_at.push_back(text_z[static_cast<std::size_t>(f)]);
    }
    const auto object_z = znorm(object_scores, cfg.znorm_epsilon);
    auto fused = combine_normalized(text_at, object_z, cfg.text_weight);

    if (cfg.rescale_fused) {
        const auto [lo, hi] = std::minmax_element(fused.begin(), fused.end());
        const double low = *lo, span = *hi - *lo;
        for (auto& v : fused)
            v = span > 0.0 ? (v - low) / span : 0.0;
    }

    std::vector<FrameScore> out;
    out.reserve(fused.size());
    for (std::size_t i = 0; i < fused.size(); ++i)
        out.push_back({state.visited[i], fused[i]});
    return out;
}

nlohmann::json iteration_record(std::int64_t iteration, const FrameBatch& batch, std::int64_t remaining,
                                bool all_found, const ScoreState& state) {
    return {
        {"iteration", iteration},
        {"grid_side", batch.grid_side},
        {"batch", batch.indices},
        {"partial", batch.partial},
        {"remaining_budget", remaining},
        {"all_found", all_found},
        {"state", snapshot_to_json(state)},
    };
}

}  // namespace

SearchOutcome search(const VideoTimeline& timeline, const SubtitleTrack& track, const std::string& query,
                     const SearchConfig& cfg, DetectorBackend& detector, TextEncoderBackend& encoder,
                     TargetPlannerBackend& planner, const SearchOptions& options) {
    cfg.validate();

    SearchOutcome outcome;
    try {
        outcome.targets = planner.plan(query, cfg.top_k);
    } catch (const BackendError& e) {
        throw SearchError(std::string("target planner failed: ") + e.what(), outcome);
    }
    if (outcome.targets.targets().empty())
        throw ConfigError("target planner returned no target objects");

    auto warn = [&](std::string message) {
        spdlog::warn("{}", message);
        outcome.warnings.push_back(std::move(message));
    };

    ScoreState state(timeline.size());
    try {
        state.text_scores = compute_text_scores(query, track, timeline, cfg, encoder).frame_scores;
    } catch (const BackendError& e) {
        throw SearchError(std::string("text encoder failed: ") + e.what(), outcome);
    }
    if (track.empty() && cfg.text_weight > 0.0)
        warn("subtitle track is empty; the text stream is zero everywhere");
    else if (cfg.text_weight == 1.0 && std::all_of(state.text_scores.begin(), state.text_scores.end(),
                                              [](double s) { return s == 0.0; }))
        warn("text_weight is 1 but no subtitle segment matches the query; keyframes fall back to frame order");

    const auto text_z = znorm(state.text_scores, cfg.znorm_epsilon);
    const auto vocabulary = outcome.targets.vocabulary();
    const std::int64_t grid_cap = cfg.uncapped_batches ? 0 : cfg.max_grid_side;

    Rng rng(cfg.rng_seed);
    FoundLog found;
    std::int64_t remaining = cfg.frame_budget;

    while (true) {
        if (remaining <= 0) {
            outcome.termination = Termination::budget_exhausted;
            break;
        }
        const auto batch = sample_frames(state.distribution, remaining, state.visited_mask, grid_cap, rng);
        if (batch.empty()) {
            outcome.termination = Termination::frames_exhausted;
            break;
        }

        std::vector<Detection> detections;
        try {
            detections = validated(detector.detect(batch.indices, vocabulary), batch, outcome.targets);
        } catch (const BackendError& e) {
            if (!state.visited.empty())
                for (const auto& [f, s] : select_topk(state, cfg.top_k))
                    outcome.keyframes.push_back({f, s, timeline.frame_to_seconds(f)});
            throw SearchError(std::string("detector failed: ") + e.what(), std::move(outcome));
        }

        for (const auto& [f, s] : score_objects(detections, outcome.targets, batch)) {
            state.object_scores[static_cast<std::size_t>(f)] = s;
            state.mark_visited(f);
        }
        record_detections(found, detections);
        const auto scored = fuse_visited(state, text_z, cfg);

        remaining -= static_cast<std::int64_t>(batch.size());
        outcome.frames_examined += static_cast<std::int64_t>(batch.size());
        ++outcome.iterations;

        const bool all_found = check_all_found(found, outcome.targets, cfg.detection_threshold);
        if (all_found)
            assign_scores(state, scored);
        else
            update_distribution(state, scored);

        if (options.record_trace)
            outcome.trace.push_back(iteration_record(outcome.iterations, batch, remaining, all_found, state));
        if (options.on_iteration)
            options.on_iteration(state, outcome.iterations);

        if (all_found) {
            outcome.termination = Termination::all_targets_found;
            break;
        }
    }

    for (const auto& [f, s] : select_topk(state, cfg.top_k))
        outcome.keyframes.push_back({f, s, timeline.frame_to_seconds(f)});
    return outcome;
}

nlohmann::json config_to_json(const SearchConfig& cfg) {
    return {
        {"text_weight", cfg.text_weight},
        {"sim_threshold", cfg.sim_threshold},
        {"amplification", cfg.amplification},
        {"segment_threshold", cfg.segment_threshold},
        {"extension_radius_s", cfg.extension_radius_s},
        {"detection_threshold", cfg.detection_threshold},
        {"frame_budget", cfg.frame_budget},
        {"max_grid_side", cfg.max_grid_side},
        {"top_k", cfg.top_k},
        {"znorm_epsilon", cfg.znorm_epsilon},
        {"rng_seed", cfg.rng_seed},
        {"uncapped_batches", cfg.uncapped_batches},
        {"rescale_fused", cfg.rescale_fused},
    };
}

nlohmann::json outcome_to_json(const SearchOutcome& outcome, const SearchConfig& cfg) {
    auto keyframes = nlohmann::json::array();
    for (const auto& k : outcome.keyframes)
        keyframes.push_back({{"frame", k.frame}, {"score", k.score}, {"time_s", k.time_s}});
    return {
        {"keyframes", std::move(keyframes)},
        {"iterations", outcome.iterations},
        {"frames_examined", outcome.frames_examined},
        {"termination", std::string(to_string(outcome.termination))},
        {"warnings", outcome.warnings},
        {"config", config_to_json(cfg)},
    };
}

}  // namespace vsi
