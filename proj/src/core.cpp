#include "vsi/core.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <unordered_set>

namespace vsi {

VideoTimeline::VideoTimeline(FrameIndex frame_count, double fps) : frame_count_(frame_count), fps_(fps) {
    if (frame_count < 1)
        throw InvalidInput("frame_count must be >= 1, got " + std::to_string(frame_count));
    if (!std::isfinite(fps) || fps <= 0.0)
        throw InvalidInput("fps must be a positive finite number");
}

FrameIndex seconds_to_frame(double t, const VideoTimeline& timeline) {
    if (!std::isfinite(t))
        throw InvalidInput("seconds_to_frame: non-finite time");
    const double scaled = std::floor(t * timeline.fps());
    if (scaled <= 0.0)
        return 0;
    const auto last = timeline.frame_count() - 1;
    if (scaled >= static_cast<double>(last))
        return last;
    return static_cast<FrameIndex>(scaled);
}

// ----------------------------------------------------------------------------

namespace {

void check_objects(const std::vector<WeightedObject>& objects, const char* kind,
                   std::unordered_set<std::string>& seen) {
    for (const auto& o : objects) {
        if (o.name.empty())
            throw ValidationError(std::string(kind) + " name must be non-empty");
        if (!(o.weight > 0.0 && o.weight <= 1.0))
            throw ValidationError(std::string(kind) + " '" + o.name + "' weight must be in (0, 1]");
        if (!seen.insert(o.name).second)
            throw ValidationError("duplicate object name '" + o.name + "'");
    }
}

}  // namespace

SemanticTargets::SemanticTargets(std::vector<WeightedObject> targets, std::vector<WeightedObject> cues)
    : targets_(std::move(targets)), cues_(std::move(cues)) {
    std::unordered_set<std::string> seen;
    check_objects(targets_, "target", seen);
    check_objects(cues_, "cue", seen);
}

std::optional<double> SemanticTargets::weight_of(std::string_view name) const {
    for (const auto* list : {&targets_, &cues_})
        for (const auto& o : *list)
            if (o.name == name)
                return o.weight;
    return std::nullopt;
}

bool SemanticTargets::is_target(std::string_view name) const {
    return std::any_of(targets_.begin(), targets_.end(), [&](const auto& o) { return o.name == name; });
}

std::vector<std::string> SemanticTargets::vocabulary() const {
    std::vector<std::string> out;
    out.reserve(targets_.size() + cues_.size());
    for (const auto& o : targets_)
        out.push_back(o.name);
    for (const auto& o : cues_)
        out.push_back(o.name);
    return out;
}

// ----------------------------------------------------------------------------

void SearchConfig::validate() const {
    auto finite = [](double v, const char* key) {
        if (!std::isfinite(v))
            throw ConfigError(std::string(key) + " must be finite");
    };
    finite(text_weight, "text_weight");
    finite(sim_threshold, "sim_threshold");
    finite(amplification, "amplification");
    finite(segment_threshold, "segment_threshold");
    finite(extension_radius_s, "extension_radius_s");
    finite(detection_threshold, "detection_threshold");
    finite(znorm_epsilon, "znorm_epsilon");
    if (text_weight < 0.0 || text_weight > 1.0)
        throw ConfigError("text_weight must be in [0, 1]");
    if (extension_radius_s < 0.0)
        throw ConfigError("extension_radius_s must be >= 0");
    if (znorm_epsilon < 0.0)
        throw ConfigError("znorm_epsilon must be >= 0");
    if (frame_budget < 1)
        throw ConfigError("frame_budget must be >= 1");
    if (max_grid_side < 1)
        throw ConfigError("max_grid_side must be >= 1");
    if (top_k < 1)
        throw ConfigError("top_k must be >= 1");
}

const std::vector<std::string>& config_keys() {
    static const std::vector<std::string> keys = {
        "text_weight",      "sim_threshold", "amplification", "segment_threshold",
        "extension_radius_s", "detection_threshold", "frame_budget", "max_grid_side",
        "top_k",            "znorm_epsilon", "rng_seed",      "uncapped_batches",
        "rescale_fused",
    };
    return keys;
}

namespace {

std::string_view trim(std::string_view s) {
    const auto ws = " \t\r\n";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos)
        return {};
    const auto e = s.find_last_not_of(ws);
    return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
    T out{};
    const auto* end = value.data() + value.size();
    auto [ptr, ec] = std::from_chars(value.data(), end, out);
    if (ec != std::errc{} || ptr != end)
        throw ConfigError("bad value for " + std::string(key) + ": '" + std::string(value) + "'");
    return out;
}

bool parse_bool(std::string_view key, std::string_view value) {
    if (value == "true" || value == "1" || value == "yes" || value == "on")
        return true;
    if (value == "false" || value == "0" || value == "no" || value == "off")
        return false;
    throw ConfigError("bad boolean for " + std::string(key) + ": '" + std::string(value) + "'");
}

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

}  // namespace

void set_config_value(SearchConfig& cfg, std::string_view key, std::string_view value) {
    value = trim(value);
    if (key == "text_weight") cfg.text_weight = parse_number<double>(key, value);
    else if (key == "sim_threshold") cfg.sim_threshold = parse_number<double>(key, value);
    else if (key == "amplification") cfg.amplification = parse_number<double>(key, value);
    else if (key == "segment_threshold") cfg.segment_threshold = parse_number<double>(key, value);
    else if (key == "extension_radius_s") cfg.extension_radius_s = parse_number<double>(key, value);
    else if (key == "detection_threshold") cfg.detection_threshold = parse_number<double>(key, value);
    else if (key == "frame_budget") cfg.frame_budget = parse_number<std::int64_t>(key, value);
    else if (key == "max_grid_side") cfg.max_grid_side = parse_number<std::int64_t>(key, value);
    else if (key == "top_k") cfg.top_k = parse_number<std::int64_t>(key, value);
    else if (key == "znorm_epsilon") cfg.znorm_epsilon = parse_number<double>(key, value);
    else if (key == "rng_seed") cfg.rng_seed = parse_number<std::uint64_t>(key, value);
    else if (key == "uncapped_batches") cfg.uncapped_batches = parse_bool(key, value);
    else if (key == "rescale_fused") cfg.rescale_fused = parse_bool(key, value);
    else throw ConfigError("unknown config key '" + std::string(key) + "'");
}

SearchConfig parse_config(std::string_view text, SearchConfig base) {
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos)
            nl = text.size();
        auto line = text.substr(pos, nl - pos);
        pos = nl + 1;
        ++line_no;

        if (auto hash = line.find('#'); hash != std::string_view::npos)
            line = line.substr(0, hash);
        line = trim(line);
        if (line.empty())
            continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
            throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value'");
        set_config_value(base, trim(line.substr(0, eq)), line.substr(eq + 1));
    }
    return base;
}

SearchConfig load_config_file(const std::string& path, SearchConfig base) {
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), std::move(base));
}

std::string serialize_config(const SearchConfig& cfg) {
    std::string out;
    auto put = [&](const char* key, const std::string& value) {
        out += key;
        out += " = ";
        out += value;
        out += '\n';
    };
    put("text_weight", format_double(cfg.text_weight));
    put("sim_threshold", format_double(cfg.sim_threshold));
    put("amplification", format_double(cfg.amplification));
    put("segment_threshold", format_double(cfg.segment_threshold));
    put("extension_radius_s", format_double(cfg.extension_radius_s));
    put("detection_threshold", format_double(cfg.detection_threshold));
    put("frame_budget", std::to_string(cfg.frame_budget));
    put("max_grid_side", std::to_string(cfg.max_grid_side));
    put("top_k", std::to_string(cfg.top_k));
    put("znorm_epsilon", format_double(cfg.znorm_epsilon));
    put("rng_seed", std::to_string(cfg.rng_seed));
    put("uncapped_batches", cfg.uncapped_batches ? "true" : "false");
    put("rescale_fused", cfg.rescale_fused ? "true" : "false");
    return out;
}

// ----------------------------------------------------------------------------

ScoreState::ScoreState(std::size_t frame_count)
    : object_scores(frame_count, 0.0),
      text_scores(frame_count, 0.0),
      fused_scores(frame_count, 0.0),
      visited_mask(frame_count, false),
      distribution(frame_count, frame_count ? 1.0 / static_cast<double>(frame_count) : 0.0) {}

void ScoreState::mark_visited(FrameIndex f) {
    const auto i = static_cast<std::size_t>(f);
    if (visited_mask[i])
        return;
    visited_mask[i] = true;
    visited.insert(std::upper_bound(visited.begin(), visited.end(), f), f);
}

std::uint64_t Rng::below(std::uint64_t n) {
    if (n == 0)
        throw InvalidInput("Rng::below(0)");
    // Reject the top partial range so the modulo is unbiased.
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x;
    do {
        x = engine_();
    } while (x >= limit);
    return x % n;
}

}  // namespace vsi
