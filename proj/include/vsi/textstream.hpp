#pragma once

#include <span>
#include <string>
#include <vector>

#include "vsi/core.hpp"
#include "vsi/subtitle.hpp"

namespace vsi {

using EmbeddingVector = std::vector<double>;

/// Sentence encoder. Implementations return one vector per input text, in
/// order, and are deterministic within a session.
class TextEncoderBackend {
public:
    virtual ~TextEncoderBackend() = default;
    virtual std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) = 0;
};

/// Raw cosine similarities (C) and their soft-thresholded form (B), per segment.
struct EnhancedSimilarity {
    std::vector<double> raw;
    std::vector<double> enhanced;
};

/// Cosine similarity of the query against every segment vector. A zero segment
/// vector scores 0. Throws InvalidInput on a zero query or mismatched dimensions.
std::vector<double> similarity_scores(std::span<const double> query_vec,
                                      const std::vector<EmbeddingVector>& segment_vecs);

/// B_i = min(C_i + gain * max(C_i - knee, 0), 1).
double soft_threshold(double raw, double knee, double gain);
std::vector<double> soft_threshold(std::span<const double> raw, double knee, double gain);

/// Kernel width for a segment: (e - b + 2W) / 4 seconds.
double kernel_sigma(const SubtitleSegment& seg, double extension_radius_s);

/// amplitude * exp(-(t - c)^2 / (2 sigma^2)) centred on the segment midpoint.
/// A zero-width kernel is amplitude at the centre and 0 elsewhere.
double gaussian_kernel(const SubtitleSegment& seg, double amplitude, double extension_radius_s, double t);

/// Per-frame text score: for each frame time t = f / fps, the largest kernel
/// value among segments whose enhanced score exceeds segment_threshold and
/// whose extended span [b - W, e + W] contains t. 0 where none qualify.
std::vector<double> aggregate_text_scores(const SubtitleTrack& track, std::span<const double> enhanced,
                                          const VideoTimeline& timeline, const SearchConfig& cfg);

/// Embed query and segments in one backend call, then run the full
/// similarity -> soft threshold -> propagation -> aggregation chain.
/// An empty track yields all zeros without touching the encoder.
struct TextStreamResult {
    EnhancedSimilarity similarity;
    std::vector<double> frame_scores;
};

TextStreamResult compute_text_scores(const std::string& query, const SubtitleTrack& track,
                                     const VideoTimeline& timeline, const SearchConfig& cfg,
                                     TextEncoderBackend& encoder);

}  // namespace vsi
