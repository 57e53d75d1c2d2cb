#pragma once

#include <array>
#include <vector>

#include "cadenza/audio.hpp"
#include "cadenza/listener.hpp"

namespace cadenza {

// Per-frequency insertion gains in dB, aligned to kAudiogramFrequencies.
// NAL-R prescribes linear gain only; negative prescriptions clamp to 0.
struct PrescriptionGains {
    std::array<double, 8> db{};
};

// Linear-phase FIR realization of a gain prescription. Taps are symmetric
// and the count is odd, so the group delay is exactly (taps-1)/2 samples.
struct FirFilter {
    std::vector<double> taps;
    int design_rate = 0;

    size_t group_delay() const { return (taps.size() - 1) / 2; }
};

// NAL-R insertion gains:
//   IG(f) = max(0, X + 0.31*H(f) + k(f)),  X = 0.05*(H500 + H1000 + H2000)
// with k = {-17, -8, +1, -1, -2, -2, -2, -2} dB across the standard
// frequencies.
PrescriptionGains nalr_gains(const Audiogram& a);

// Odd tap count used by apply_prescription: 221 at 44.1 kHz, scaled
// proportionally to the sample rate.
int default_tap_count(int sample_rate);

// Frequency-sampling design. The target magnitude interpolates the 8 gain
// anchors linearly in log-frequency and holds flat below 250 Hz and above
// 8 kHz. n_taps must be odd and >= 65; sample_rate >= 16000.
FirFilter design_fir(const PrescriptionGains& gains, int sample_rate, int n_taps);

// Filters and removes the fixed group delay, so the output is time-aligned
// with the input and has the same length.
std::vector<float> apply_fir_aligned(const std::vector<float>& samples, const FirFilter& fir);

// Left channel through the left ear's NAL-R filter, right through the
// right ear's. Stereo input required.
AudioBuffer apply_prescription(const AudioBuffer& buffer, const Listener& listener);

} // namespace cadenza
