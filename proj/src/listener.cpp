#include "cadenza/listener.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "cadenza/errors.hpp"

namespace cadenza {

void Audiogram::validate() const {
    for (size_t i = 0; i < thresholds.size(); ++i) {
        const double t = thresholds[i];
        if (!std::isfinite(t)) {
            throw ValidationError("audiogram threshold must be finite");
        }
        if (t > kMaxThresholdDbHl) {
            throw ValidationError("audiogram threshold " + std::to_string(t) + " dB HL at " +
                                  std::to_string(static_cast<int>(kAudiogramFrequencies[i])) +
                                  " Hz exceeds the 80 dB HL cap");
        }
        if (t < kMinThresholdDbHl) {
            throw ValidationError("audiogram threshold " + std::to_string(t) +
                                  " dB HL is below the -10 dB HL floor");
        }
    }
}

std::string severity_name(SeverityGrade grade) {
    switch (grade) {
        case SeverityGrade::mild: return "mild";
        case SeverityGrade::moderate: return "moderate";
        case SeverityGrade::moderately_severe: return "moderately_severe";
        case SeverityGrade::severe: return "severe";
    }
    return "unknown";
}

namespace {

Audiogram parse_levels(const nlohmann::json& arr, const std::string& id, const char* field) {
    if (!arr.is_array() || arr.size() != 8) {
        throw ValidationError("listener '" + id + "': " + field + " must hold exactly 8 thresholds");
    }
    Audiogram a;
    for (size_t i = 0; i < 8; ++i) {
        if (!arr[i].is_number()) {
            throw ValidationError("listener '" + id + "': " + field + " entries must be numbers");
        }
        a.thresholds[i] = arr[i].get<double>();
    }
    a.validate();
    return a;
}

} // namespace

std::map<std::string, Listener> load_listeners(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ValidationError("cannot open listener file " + path.string());
    }

    // nlohmann's object parse silently keeps the last of duplicate keys, so
    // count key events at root depth during the parse and compare.
    size_t root_keys = 0;
    int depth = 0;
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(
            in, [&](int, nlohmann::json::parse_event_t event, nlohmann::json&) {
                if (event == nlohmann::json::parse_event_t::object_start) ++depth;
                if (event == nlohmann::json::parse_event_t::object_end) --depth;
                if (event == nlohmann::json::parse_event_t::key && depth == 1) ++root_keys;
                return true;
            });
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError("malformed listener file " + path.string() + ": " + e.what());
    }

    if (!doc.is_object()) {
        throw ValidationError("listener file must be a JSON object keyed by listener id");
    }
    if (root_keys != doc.size()) {
        throw ValidationError("listener file contains duplicate listener ids");
    }

    std::map<std::string, Listener> out;
    for (const auto& [id, entry] : doc.items()) {
        if (!entry.is_object()) {
            throw ValidationError("listener '" + id + "': entry must be an object");
        }
        if (!entry.contains("audiogram_cfs") || !entry.contains("audiogram_levels_l") ||
            !entry.contains("audiogram_levels_r")) {
            throw ValidationError("listener '" + id + "': missing audiogram fields");
        }
        const auto& cfs = entry["audiogram_cfs"];
        if (!cfs.is_array() || cfs.size() != 8) {
            throw ValidationError("listener '" + id + "': audiogram_cfs must list the 8 standard frequencies");
        }
        for (size_t i = 0; i < 8; ++i) {
            if (!cfs[i].is_number() || cfs[i].get<double>() != kAudiogramFrequencies[i]) {
                throw ValidationError("listener '" + id +
                                      "': audiogram_cfs must equal [250,500,1000,2000,3000,4000,6000,8000]");
            }
        }
        Listener l;
        l.id = id;
        l.left = parse_levels(entry["audiogram_levels_l"], id, "audiogram_levels_l");
        l.right = parse_levels(entry["audiogram_levels_r"], id, "audiogram_levels_r");
        out.emplace(id, std::move(l));
    }
    return out;
}

double four_freq_average(const Audiogram& a) {
    // indices of 500, 1000, 2000, 4000 Hz in the fixed frequency vector
    return (a.thresholds[1] + a.thresholds[2] + a.thresholds[3] + a.thresholds[5]) / 4.0;
}

double better_ear_average(const Listener& l) {
    return std::min(four_freq_average(l.left), four_freq_average(l.right));
}

bool dev_filter(const Listener& l) {
    const double avg = better_ear_average(l);
    return avg >= 20.0 && avg <= 75.0;
}

SeverityGrade severity(const Listener& l) {
    const double avg = better_ear_average(l);
    if (avg < 41.0) return SeverityGrade::mild;
    if (avg <= 55.0) return SeverityGrade::moderate;
    if (avg <= 70.0) return SeverityGrade::moderately_severe;
    return SeverityGrade::severe;
}

} // namespace cadenza
