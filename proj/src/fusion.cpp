#include "vsi/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "vsi/spline.hpp"

namespace vsi {

StreamMoments moments(std::span<const double> stream) {
    if (stream.empty())
        throw InvalidInput("moments: empty stream");
    double sum = 0.0;
    for (double v : stream)
        sum += v;
    const double mean = sum / static_cast<double>(stream.size());
    double sq = 0.0;
    for (double v : stream)
        sq += (v - mean) * (v - mean);
    return {mean, std::sqrt(sq / static_cast<double>(stream.size()))};
}

std::vector<double> znorm(std::span<const double> stream, double epsilon) {
    const auto [mean, sd] = moments(stream);
    std::vector<double> out(stream.size());
    const double denom = sd + epsilon;
    for (std::size_t i = 0; i < stream.size(); ++i)
        out[i] = denom > 0.0 ? (stream[i] - mean) / denom : 0.0;
    return out;
}

std::vector<double> combine_normalized(std::span<const double> text_z, std::span<const double> object_z,
                                       double text_weight) {
    if (text_z.size() != object_z.size())
        throw InvalidInput("fuse: stream lengths differ (" + std::to_string(text_z.size()) + " vs " +
                           std::to_string(object_z.size()) + ")");
    const double object_weight = 1.0 - text_weight;
    std::vector<double> out(text_z.size());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = text_weight * text_z[i] + object_weight * object_z[i];
    return out;
}

FusedScores fuse(std::span<const double> text_scores, std::span<const double> object_scores, double text_weight,
                 double epsilon) {
    if (!(text_weight >= 0.0 && text_weight <= 1.0))
        throw InvalidInput("fuse: text_weight must be in [0, 1]");
    if (text_scores.size() != object_scores.size())
        throw InvalidInput("fuse: stream lengths differ (" + std::to_string(text_scores.size()) + " vs " +
                           std::to_string(object_scores.size()) + ")");
    const auto tz = znorm(text_scores, epsilon);
    const auto oz = znorm(object_scores, epsilon);
    return {combine_normalized(tz, oz, text_weight), text_weight};
}

// ----------------------------------------------------------------------------

void assign_scores(ScoreState& state, std::span<const FrameScore> newly_scored) {
    const auto n = static_cast<FrameIndex>(state.size());
    std::set<FrameIndex> seen;
    for (const auto& [frame, score] : newly_scored) {
        if (frame < 0 || frame >= n)
            throw InvalidInput("update_distribution: frame " + std::to_string(frame) + " out of range");
        if (!seen.insert(frame).second)
            spdlog::warn("frame {} scored twice in one update, keeping the last score", frame);
        state.fused_scores[static_cast<std::size_t>(frame)] = score;
        state.mark_visited(frame);
    }
}

std::vector<double> lower_bounded_scores(const ScoreState& state) {
    if (state.visited.empty())
        throw InvalidState("no visited frames to interpolate from");
    const std::size_t n = state.size();

    std::vector<double> xs, ys;
    xs.reserve(state.visited.size());
    ys.reserve(state.visited.size());
    for (auto f : state.visited) {
        xs.push_back(static_cast<double>(f));
        ys.push_back(state.fused_scores[static_cast<std::size_t>(f)]);
    }
    const KnotInterpolator interp(std::move(xs), std::move(ys));
    auto curve = interp.sample_grid(n);

    const double floor = 1.0 / static_cast<double>(n);
    for (std::size_t f = 0; f < n; ++f) {
        double s = state.visited_mask[f] ? state.fused_scores[f]
                                         : std::clamp(curve[f], kInterpolationFloor, kInterpolationCeil);
        curve[f] = std::max(floor, s);
    }
    return curve;
}

void rebuild_distribution(ScoreState& state) {
    auto weights = lower_bounded_scores(state);
    double total = 0.0;
    for (auto& w : weights) {
        w = logistic(w);
        total += w;
    }
    for (auto& w : weights)
        w /= total;
    state.distribution = std::move(weights);
}

void update_distribution(ScoreState& state, std::span<const FrameScore> newly_scored) {
    assign_scores(state, newly_scored);
    rebuild_distribution(state);
}

nlohmann::json snapshot_to_json(const ScoreState& state) {
    return {
        {"object_scores", state.object_scores},
        {"text_scores", state.text_scores},
        {"fused_scores", state.fused_scores},
        {"visited", state.visited},
        {"distribution", state.distribution},
    };
}

}  // namespace vsi
