#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "cadenza/audio.hpp"

namespace cadenza {

// Acoustic scene definition for in-car listening. The seed fully
// determines all stochastic content (engine phases, road noise).
struct CarSceneParams {
    double speed_kmh = 100.0;  // [10, 140]
    int gear = 4;              // 1-6
    double snr_db = 0.0;       // target SNR at the hearing-aid microphones
    double head_azimuth_deg = 0.0;  // [-90, +90]
    uint64_t seed = 0;

    void validate() const;
};

struct HrirPair {
    std::vector<float> left;   // impulse response to the left mic
    std::vector<float> right;  // impulse response to the right mic
};

enum class HrirCondition { anechoic, car };

std::string hrir_condition_name(HrirCondition c);

// Impulse responses on the -90..+90 degree grid in 2.5 degree steps
// (73 points). Keys are azimuth in tenths of a degree: -900, -875, ... 900.
struct HrirSet {
    HrirCondition condition = HrirCondition::anechoic;
    int sample_rate = 0;
    std::map<int, HrirPair> entries;

    // Checks grid completeness and equal IR lengths.
    void validate() const;
};

// Grid keys in tenths of a degree, ascending.
std::vector<int> hrir_grid_tenths();

// File name convention: <condition>_az<signed-degrees-x10>.wav, stereo
// (left mic, right mic), e.g. car_az-0875.wav for -87.5 degrees.
std::string hrir_filename(HrirCondition condition, int azimuth_tenths);

// Loads one condition from a directory of WAV files. Files whose azimuth
// is off the 2.5-degree grid are ignored with a warning on stderr (some
// measurement sets carry an extra point); a missing grid point is an error.
HrirSet load_hrir_set(const std::filesystem::path& dir, HrirCondition condition);

// Engine firing frequency in Hz for a 4-cylinder 4-stroke at the RPM
// implied by speed and gear. RPM = clamp(speed * r[gear], 800, 5000),
// r = {120, 75, 50, 38, 30, 25} RPM per km/h.
double engine_fundamental(double speed_kmh, int gear);

// Harmonic complex: 25 harmonics at k*f0 with 1/k amplitudes and
// seed-determined phases, synthesized additively (harmonics at or above
// Nyquist are dropped), peak-normalized to -20 dBFS.
AudioBuffer synth_engine_tone(const CarSceneParams& params, double duration_s, int sample_rate);

// Two independent white-noise streams (seeds seed^1 and seed^2) through a
// first-order lowpass (6 dB/octave) at cutoff_hz, each RMS-normalized to
// -26 dBFS. Returned as (left, right).
std::pair<AudioBuffer, AudioBuffer> synth_road_noise(double duration_s, int sample_rate,
                                                     double cutoff_hz, uint64_t seed);

inline constexpr double kRoadNoiseCutoffHz = 500.0;

// Grid entry nearest to the requested azimuth; ties round toward 0.
const HrirPair& nearest_hrir(const HrirSet& set, double azimuth_deg);

struct RenderedScene {
    AudioBuffer music_at_mics;  // stereo, music length
    AudioBuffer noise_at_mics;  // stereo, scaled to the target SNR
};

// Spatializes music (car HRIRs, stereo speakers at +-20 degrees relative
// to the head) and car noise (anechoic HRIRs: engine at 0, road at -90/+90),
// then scales the noise so the mic-level SNR hits params.snr_db.
RenderedScene render_scene_components(const AudioBuffer& music, const CarSceneParams& params,
                                      const HrirSet& anechoic, const HrirSet& car);

// Sum of the two rendered components, trimmed to the music length.
AudioBuffer render_scene(const AudioBuffer& music, const CarSceneParams& params,
                         const HrirSet& anechoic, const HrirSet& car);

} // namespace cadenza
