#include "cadenza/audio.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

namespace cadenza {

void AudioBuffer::validate() const {
    if (sample_rate <= 0) {
        throw std::invalid_argument("AudioBuffer: sample rate must be positive");
    }
    if (channels.empty()) {
        throw std::invalid_argument("AudioBuffer: at least one channel required");
    }
    const size_t n = channels[0].size();
    for (const auto& ch : channels) {
        if (ch.size() != n) {
            throw std::invalid_argument("AudioBuffer: channels have unequal lengths");
        }
    }
}

AudioBuffer mono_buffer(std::vector<float> samples, int rate) {
    AudioBuffer b;
    b.sample_rate = rate;
    b.channels.push_back(std::move(samples));
    return b;
}

AudioBuffer stereo_buffer(std::vector<float> left, std::vector<float> right, int rate) {
    AudioBuffer b;
    b.sample_rate = rate;
    b.channels.push_back(std::move(left));
    b.channels.push_back(std::move(right));
    return b;
}

double rms_db(const AudioBuffer& buffer) {
    if (buffer.empty()) {
        throw std::invalid_argument("rms_db: empty buffer");
    }
    double sum = 0.0;
    size_t count = 0;
    for (const auto& ch : buffer.channels) {
        for (float s : ch) sum += static_cast<double>(s) * s;
        count += ch.size();
    }
    return linear_to_db(std::sqrt(sum / static_cast<double>(count)));
}

double peak_linear(const AudioBuffer& buffer) {
    if (buffer.empty()) {
        throw std::invalid_argument("peak_linear: empty buffer");
    }
    double peak = 0.0;
    for (const auto& ch : buffer.channels) {
        for (float s : ch) peak = std::max(peak, static_cast<double>(std::fabs(s)));
    }
    return peak;
}

double peak_db(const AudioBuffer& buffer) { return linear_to_db(peak_linear(buffer)); }

} // namespace cadenza
