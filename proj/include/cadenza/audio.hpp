#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

namespace cadenza {

// Level of digital silence, dB. Finite levels are reserved for non-silent
// signals; comparisons against this sentinel are exact.
inline constexpr double kSilenceDb = -std::numeric_limits<double>::infinity();

inline double db_to_linear(double db) { return std::pow(10.0, db / 20.0); }
inline double linear_to_db(double amplitude) {
    return amplitude > 0.0 ? 20.0 * std::log10(amplitude) : kSilenceDb;
}

// Multichannel sampled audio, planar layout, nominal full scale +-1.0.
// All channels have equal length; samples are 32-bit float throughout,
// files may be PCM (see wav.hpp).
struct AudioBuffer {
    int sample_rate = 0;
    std::vector<std::vector<float>> channels;

    AudioBuffer() = default;
    AudioBuffer(int num_channels, size_t frames, int rate)
        : sample_rate(rate), channels(num_channels, std::vector<float>(frames, 0.0f)) {}

    size_t num_channels() const { return channels.size(); }
    size_t frames() const { return channels.empty() ? 0 : channels[0].size(); }
    double duration_s() const {
        return sample_rate > 0 ? static_cast<double>(frames()) / sample_rate : 0.0;
    }
    bool empty() const { return channels.empty() || frames() == 0; }

    // Throws std::invalid_argument on ragged channels or non-positive rate.
    void validate() const;
};

AudioBuffer mono_buffer(std::vector<float> samples, int rate);
AudioBuffer stereo_buffer(std::vector<float> left, std::vector<float> right, int rate);

// RMS over all channels, dBFS. Digital silence returns kSilenceDb.
double rms_db(const AudioBuffer& buffer);
// Largest absolute sample over all channels, dBFS.
double peak_db(const AudioBuffer& buffer);
// Linear-amplitude peak, 0.0 for silence.
double peak_linear(const AudioBuffer& buffer);

} // namespace cadenza
