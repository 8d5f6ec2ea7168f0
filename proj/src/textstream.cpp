#include "vsi/textstream.hpp"

#include <algorithm>
#include <cmath>

namespace vsi {

std::vector<double> similarity_scores(std::span<const double> query_vec,
                                      const std::vector<EmbeddingVector>& segment_vecs) {
    double qq = 0.0;
    for (double v : query_vec)
        qq += v * v;
    if (!(qq > 0.0))
        throw InvalidInput("similarity_scores: query embedding is zero");
    const double q_norm = std::sqrt(qq);

    std::vector<double> out;
    out.reserve(segment_vecs.size());
    for (const auto& s : segment_vecs) {
        if (s.size() != query_vec.size())
            throw InvalidInput("similarity_scores: dimension mismatch (" + std::to_string(s.size()) + " vs " +
                               std::to_string(query_vec.size()) + ")");
        double dot = 0.0;
        double ss = 0.0;
        for (std::size_t k = 0; k < s.size(); ++k) {
            dot += query_vec[k] * s[k];
            ss += s[k] * s[k];
        }
        if (ss == 0.0) {
            out.push_back(0.0);
            continue;
        }
        // Rounding can push |cos| a hair past 1.
        out.push_back(std::clamp(dot / (q_norm * std::sqrt(ss)), -1.0, 1.0));
    }
    return out;
}

double soft_threshold(double raw, double knee, double gain) {
    return std::min(raw + gain * std::max(raw - knee, 0.0), 1.0);
}

std::vector<double> soft_threshold(std::span<const double> raw, double knee, double gain) {
    std::vector<double> out(raw.size());
    std::transform(raw.begin(), raw.end(), out.begin(), [&](double c) { return soft_threshold(c, knee, gain); });
    return out;
}

double kernel_sigma(const SubtitleSegment& seg, double extension_radius_s) {
    return (seg.end_s - seg.begin_s + 2.0 * extension_radius_s) / 4.0;
}

double gaussian_kernel(const SubtitleSegment& seg, double amplitude, double extension_radius_s, double t) {
    const double center = segment_center(seg);
    const double sigma = kernel_sigma(seg, extension_radius_s);
    if (sigma == 0.0)
        return t == center ? amplitude : 0.0;
    const double d = t - center;
    return amplitude * std::exp(-(d * d) / (2.0 * sigma * sigma));
}

std::vector<double> aggregate_text_scores(const SubtitleTrack& track, std::span<const double> enhanced,
                                          const VideoTimeline& timeline, const SearchConfig& cfg) {
    if (enhanced.size() != track.size())
        throw InvalidInput("aggregate_text_scores: " + std::to_string(enhanced.size()) + " scores for " +
                           std::to_string(track.size()) + " segments");

    const auto n = timeline.frame_count();
    const double fps = timeline.fps();
    const double w = cfg.extension_radius_s;
    std::vector<double> scores(timeline.size(), 0.0);

    for (std::size_t i = 0; i < track.size(); ++i) {
        const double amplitude = enhanced[i];
        if (!(amplitude > cfg.segment_threshold))
            continue;
        const auto& seg = track.segments[i];
        const double lo_t = seg.begin_s - w;
        const double hi_t = seg.end_s + w;

        // Candidate range padded by one frame; membership is decided on t = f / fps below.
        const double lo_f = std::floor(lo_t * fps) - 1.0;
        const double hi_f = std::ceil(hi_t * fps) + 1.0;
        if (hi_f < 0.0 || lo_f > static_cast<double>(n - 1))
            continue;
        const auto first = static_cast<FrameIndex>(std::max(lo_f, 0.0));
        const auto last = static_cast<FrameIndex>(std::min(hi_f, static_cast<double>(n - 1)));

        for (FrameIndex f = first; f <= last; ++f) {
            const double t = timeline.frame_to_seconds(f);
            if (t < lo_t || t > hi_t)
                continue;
            auto& slot = scores[static_cast<std::size_t>(f)];
            slot = std::max(slot, gaussian_kernel(seg, amplitude, w, t));
        }
    }
    for (auto& s : scores)
        s = std::clamp(s, 0.0, 1.0);
    return scores;
}

TextStreamResult compute_text_scores(const std::string& query, const SubtitleTrack& track,
                                     const VideoTimeline& timeline, const SearchConfig& cfg,
                                     TextEncoderBackend& encoder) {
    TextStreamResult result;
    if (track.empty()) {
        result.frame_scores.assign(timeline.size(), 0.0);
        return result;
    }

    std::vector<std::string> texts;
    texts.reserve(track.size() + 1);
    texts.push_back(query);
    for (const auto& seg : track.segments)
        texts.push_back(seg.text);

    auto vectors = encoder.embed(texts);
    if (vectors.size() != texts.size())
        throw BackendError("encoder returned " + std::to_string(vectors.size()) + " embeddings for " +
                           std::to_string(texts.size()) + " texts");
    for (const auto& v : vectors)
        for (double x : v)
            if (!std::isfinite(x))
                throw BackendError("encoder returned a non-finite embedding value");

    const EmbeddingVector query_vec = std::move(vectors.front());
    vectors.erase(vectors.begin());

    result.similarity.raw = similarity_scores(query_vec, vectors);
    result.similarity.enhanced = soft_threshold(result.similarity.raw, cfg.sim_threshold, cfg.amplification);
    result.frame_scores = aggregate_text_scores(track, result.similarity.enhanced, timeline, cfg);
    return result;
}

}  // namespace vsi
