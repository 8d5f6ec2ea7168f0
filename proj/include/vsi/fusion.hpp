#pragma once

#include <cmath>
#include <span>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "vsi/core.hpp"
#include "vsi/videostream.hpp"

namespace vsi {

struct StreamMoments {
    double mean = 0.0;
    double stddev = 0.0;  // population
};

StreamMoments moments(std::span<const double> stream);

/// (x - mean) / (stddev + epsilon) over the whole stream.
std::vector<double> znorm(std::span<const double> stream, double epsilon);

struct FusedScores {
    std::vector<double> values;
    double text_weight_used = 0.0;
};

/// text_weight * znorm(text) + (1 - text_weight) * znorm(object), elementwise.
/// Throws InvalidInput on length mismatch or a weight outside [0, 1].
FusedScores fuse(std::span<const double> text_scores, std::span<const double> object_scores, double text_weight,
                 double epsilon);

/// Elementwise weighted sum of two already-normalized streams.
std::vector<double> combine_normalized(std::span<const double> text_z, std::span<const double> object_z,
                                       double text_weight);

/// Interpolated scores for unvisited frames are clipped to this range.
inline constexpr double kInterpolationFloor = -1.0;
inline constexpr double kInterpolationCeil = 3.0;

inline double logistic(double x) {
    return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

/// Store fused scores for newly examined frames and mark them visited
/// (duplicates: last write wins).
void assign_scores(ScoreState& state, std::span<const FrameScore> newly_scored);

/// Rebuild the sampling distribution from the visited scores: interpolate the
/// unvisited frames through the visited (frame, score) knots, lower-bound by
/// 1/N, then normalize the logistic of every frame. Requires >= 1 visited frame.
void rebuild_distribution(ScoreState& state);

/// assign_scores followed by rebuild_distribution.
void update_distribution(ScoreState& state, std::span<const FrameScore> newly_scored);

/// Guidance curve before the logistic: visited frames carry their stored score,
/// unvisited frames the clipped interpolant; both floored at 1/N.
std::vector<double> lower_bounded_scores(const ScoreState& state);

nlohmann::json snapshot_to_json(const ScoreState& state);

}  // namespace vsi
