#pragma once

#include <array>

#include "cadenza/audio.hpp"
#include "cadenza/enhancement.hpp"
#include "cadenza/listener.hpp"

namespace cadenza {

// Configuration of the intrusive, audiogram-aware quality index. The
// defaults define the metric used for reporting; everything is pinned so
// identical inputs score identically to the last bit.
struct MetricConfig {
    int internal_rate = 24000;
    int n_bands = 32;                 // ERB-spaced gammatone-style bands
    double band_lo_hz = 80.0;
    double band_hi_hz = 8000.0;
    double frame_ms = 8.0;
    double env_cutoff_hz = 32.0;      // envelope lowpass
    double env_weight = 0.8;
    double spec_weight = 0.2;

    void validate() const;
};

// Reference for scoring: the clean signal amplified with the listener's
// NAL-R prescription, at the metric's internal rate.
AudioBuffer make_reference(const AudioBuffer& clean_mono, const Audiogram& a,
                           const MetricConfig& cfg = {});

// Intrusive quality score in [0, 1]. Both signals are resampled to the
// internal rate and time-aligned by cross-correlation (+-100 ms) before
// comparison through the auditory filterbank. A digitally silent processed
// signal scores 0; degenerate correlations map to 0 rather than NaN.
double score(const AudioBuffer& processed_mono, const AudioBuffer& reference_mono,
             const Audiogram& a, const MetricConfig& cfg = {});

// Per-ear scoring: left channel against the left ear's reference, right
// against the right's. Returns (left, right).
std::pair<double, double> score_stereo(const AudioBuffer& processed, const AudioBuffer& clean,
                                       const Listener& listener, const MetricConfig& cfg = {});

// All eight left and right VDBO scores, in the fixed order
// (V-L, V-R, D-L, D-R, B-L, B-R, O-L, O-R).
std::array<double, 8> score_stems(const StemSet& estimated, const StemSet& truth,
                                  const Listener& listener, const MetricConfig& cfg = {});

} // namespace cadenza
