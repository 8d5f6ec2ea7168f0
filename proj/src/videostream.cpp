#include "vsi/videostream.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <fstream>
#include <unordered_map>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

namespace vsi {

std::int64_t grid_side_for(std::int64_t remaining_budget, std::int64_t max_grid_side) {
    if (remaining_budget < 1)
        return 1;
    auto m = static_cast<std::int64_t>(std::sqrt(static_cast<double>(remaining_budget)));
    // Correct for sqrt rounding on large perfect squares.
    while (m * m > remaining_budget)
        --m;
    while ((m + 1) * (m + 1) <= remaining_budget)
        ++m;
    if (max_grid_side > 0)
        m = std::min(m, max_grid_side);
    return std::max<std::int64_t>(m, 1);
}

FrameBatch sample_frames(std::span<const double> distribution, std::int64_t remaining_budget,
                         const std::vector<bool>& visited, std::int64_t max_grid_side, Rng& rng) {
    if (visited.size() != distribution.size())
        throw InvalidInput("sample_frames: visited mask and distribution differ in length");
    if (remaining_budget < 1)
        throw InvalidInput("sample_frames: remaining budget must be >= 1");

    FrameBatch batch;
    batch.grid_side = grid_side_for(remaining_budget, max_grid_side);
    const auto wanted = static_cast<std::size_t>(batch.grid_side * batch.grid_side);

    // Exponential-key form of weighted sampling without replacement: taking the
    // smallest E_i / w_i (E_i ~ Exp(1)) has the same law as drawing one frame at
    // a time proportionally to the renormalized weights of the remaining frames.
    std::vector<std::pair<double, FrameIndex>> keyed;
    keyed.reserve(distribution.size());
    for (std::size_t f = 0; f < distribution.size(); ++f) {
        if (visited[f])
            continue;
        const double u = 1.0 - rng.uniform01();  // (0, 1]
        const double w = distribution[f];
        const double key = w > 0.0 ? -std::log(u) / w : std::numeric_limits<double>::infinity();
        keyed.emplace_back(key, static_cast<FrameIndex>(f));
    }

    if (keyed.size() <= wanted) {
        batch.partial = keyed.size() < wanted;
        std::sort(keyed.begin(), keyed.end());
    } else {
        std::nth_element(keyed.begin(), keyed.begin() + static_cast<std::ptrdiff_t>(wanted), keyed.end());
        keyed.resize(wanted);
        std::sort(keyed.begin(), keyed.end());
    }
    batch.indices.reserve(keyed.size());
    for (const auto& [key, f] : keyed)
        batch.indices.push_back(f);
    return batch;
}

std::vector<FrameScore> score_objects(const std::vector<Detection>& detections, const SemanticTargets& targets,
                                      const FrameBatch& batch) {
    std::unordered_map<FrameIndex, std::size_t> slot;
    std::vector<FrameScore> out;
    out.reserve(batch.size());
    for (auto f : batch.indices) {
        slot.emplace(f, out.size());
        out.push_back({f, 0.0});
    }

    for (const auto& d : detections) {
        const auto it = slot.find(d.frame);
        if (it == slot.end()) {
            spdlog::warn("ignoring detection for frame {} outside the requested batch", d.frame);
            continue;
        }
        const auto weight = targets.weight_of(d.object_name);
        if (!weight) {
            spdlog::warn("ignoring detection of '{}' which is not in the target vocabulary", d.object_name);
            continue;
        }
        auto& score = out[it->second].score;
        score = std::max(score, d.confidence * *weight);
    }
    return out;
}

void record_detections(FoundLog& log, const std::vector<Detection>& detections) {
    for (const auto& d : detections) {
        auto [it, inserted] = log.try_emplace(d.object_name, d.confidence);
        if (!inserted)
            it->second = std::max(it->second, d.confidence);
    }
}

bool check_all_found(const FoundLog& found, const SemanticTargets& targets, double tau) {
    if (targets.targets().empty())
        return false;
    return std::all_of(targets.targets().begin(), targets.targets().end(), [&](const WeightedObject& t) {
        const auto it = found.find(t.name);
        return it != found.end() && it->second >= tau;
    });
}

// ----------------------------------------------------------------------------
// Targets document

namespace {

std::vector<WeightedObject> objects_from_json(const nlohmann::json& doc, const char* key, double default_weight) {
    std::vector<WeightedObject> out;
    if (!doc.contains(key))
        return out;
    const auto& arr = doc.at(key);
    if (!arr.is_array())
        throw ValidationError(std::string("'") + key + "' must be an array");
    for (const auto& entry : arr) {
        WeightedObject o{.name = {}, .weight = default_weight};
        if (entry.is_string()) {
            o.name = entry.get<std::string>();
        } else if (entry.is_object()) {
            if (!entry.contains("name") || !entry.at("name").is_string())
                throw ValidationError(std::string("entry in '") + key + "' is missing a string 'name'");
            o.name = entry.at("name").get<std::string>();
            if (entry.contains("weight")) {
                if (!entry.at("weight").is_number())
                    throw ValidationError("weight of '" + o.name + "' must be a number");
                o.weight = entry.at("weight").get<double>();
            }
        } else {
            throw ValidationError(std::string("entries in '") + key + "' must be strings or {name, weight} objects");
        }
        out.push_back(std::move(o));
    }
    return out;
}

}  // namespace

SemanticTargets targets_from_json(const nlohmann::json& doc) {
    if (!doc.is_object())
        throw ValidationError("targets document must be a JSON object");
    auto targets = objects_from_json(doc, "targets", kDefaultTargetWeight);
    auto cues = objects_from_json(doc, "cues", kDefaultCueWeight);
    if (targets.empty())
        throw ValidationError("at least one target object is required");
    return SemanticTargets(std::move(targets), std::move(cues));
}

nlohmann::json targets_to_json(const SemanticTargets& targets) {
    auto list = [](const std::vector<WeightedObject>& objects) {
        auto arr = nlohmann::json::array();
        for (const auto& o : objects)
            arr.push_back({{"name", o.name}, {"weight", o.weight}});
        return arr;
    };
    return {{"targets", list(targets.targets())}, {"cues", list(targets.cues())}};
}

SemanticTargets plan_targets_from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw ValidationError("cannot open targets file '" + path + "'");
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError("targets file '" + path + "' is not valid JSON: " + e.what());
    }
    return targets_from_json(doc);
}

}  // namespace vsi
