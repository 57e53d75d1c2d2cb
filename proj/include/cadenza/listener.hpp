#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <string>

namespace cadenza {

// The eight standard audiometric frequencies, Hz. Every threshold vector
// in the toolkit is indexed against this order.
inline constexpr std::array<double, 8> kAudiogramFrequencies = {
    250.0, 500.0, 1000.0, 2000.0, 3000.0, 4000.0, 6000.0, 8000.0};

inline constexpr double kMaxThresholdDbHl = 80.0;
inline constexpr double kMinThresholdDbHl = -10.0;

// Per-ear hearing thresholds in dB HL at the standard frequencies.
struct Audiogram {
    std::array<double, 8> thresholds{};

    // Enforces the fixed count, the 80 dB HL cap, and the -10 dB HL
    // audiometric floor. Out-of-range values are rejected, not clamped.
    void validate() const;
};

struct Listener {
    std::string id;
    Audiogram left;
    Audiogram right;
};

enum class SeverityGrade { mild, moderate, moderately_severe, severe };

std::string severity_name(SeverityGrade grade);

// Loads a JSON document mapping listener id to audiogram data:
//   { "<id>": { "audiogram_cfs": [250,...,8000],
//               "audiogram_levels_l": [...], "audiogram_levels_r": [...] } }
// The frequency array must equal kAudiogramFrequencies exactly. Duplicate
// ids, wrong counts, and thresholds above 80 dB HL are rejected.
std::map<std::string, Listener> load_listeners(const std::filesystem::path& path);

// Mean threshold at {500, 1000, 2000, 4000} Hz.
double four_freq_average(const Audiogram& a);

// The lower (better) of the two per-ear four-frequency averages.
double better_ear_average(const Listener& l);

// True iff the better-ear average lies in [20, 75] dB HL, bounds included.
bool dev_filter(const Listener& l);

// Graded on the better-ear average: mild < 41, moderate 41-55,
// moderately severe 56-70, severe >= 71.
SeverityGrade severity(const Listener& l);

} // namespace cadenza
