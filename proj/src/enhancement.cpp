#include "cadenza/enhancement.hpp"

#include <cmath>
#include <stdexcept>

#include "cadenza/prescription.hpp"
#include "cadenza/rng.hpp"

namespace cadenza {

namespace {

constexpr double kOracleResidualDb = -40.0;
constexpr double kMaxRemixGainDb = 30.0;
// Headroom inside the 1/peak inversion: re-quantizing the scaled mixture
// to float perturbs the re-amplified peak by a few ULP, which must never
// land above full scale.
constexpr double kPeakSafety = 1.0 - 1e-4;

double buffer_rms(const AudioBuffer& b) {
    double sum = 0.0;
    size_t count = 0;
    for (const auto& ch : b.channels) {
        for (float v : ch) sum += static_cast<double>(v) * v;
        count += ch.size();
    }
    return count > 0 ? std::sqrt(sum / static_cast<double>(count)) : 0.0;
}

} // namespace

void StemSet::validate() const {
    const auto& first = stems[0];
    first.validate();
    if (first.num_channels() != 2) {
        throw std::invalid_argument("StemSet: stems must be stereo");
    }
    for (const auto& s : stems) {
        s.validate();
        if (s.num_channels() != 2 || s.frames() != first.frames() ||
            s.sample_rate != first.sample_rate) {
            throw std::invalid_argument("StemSet: stems must share length, rate, and channel count");
        }
    }
}

AudioBuffer StemSet::sum() const {
    validate();
    AudioBuffer out(2, stems[0].frames(), stems[0].sample_rate);
    for (const auto& s : stems) {
        for (size_t c = 0; c < 2; ++c) {
            for (size_t i = 0; i < s.frames(); ++i) out.channels[c][i] += s.channels[c][i];
        }
    }
    return out;
}

void RemixGains::validate() const {
    for (double g : db) {
        if (!(std::fabs(g) <= kMaxRemixGainDb)) {
            throw std::invalid_argument("RemixGains: gains must lie within +-30 dB");
        }
    }
}

StemSet oracle_separate(const AudioBuffer& mixture, const StemSet& truth) {
    mixture.validate();
    truth.validate();
    if (truth.stems[0].frames() != mixture.frames() ||
        truth.stems[0].sample_rate != mixture.sample_rate) {
        throw std::invalid_argument("oracle_separate: truth stems do not match the mixture");
    }

    AudioBuffer residual = truth.sum();
    for (size_t c = 0; c < 2; ++c) {
        for (size_t i = 0; i < residual.frames(); ++i) {
            residual.channels[c][i] = mixture.channels[c][i] - residual.channels[c][i];
        }
    }
    if (rms_db(residual) > kOracleResidualDb) {
        throw std::invalid_argument("oracle_separate: stems do not sum to the mixture (residual above -40 dBFS)");
    }
    return truth;
}

StemSet OracleBackend::separate(const AudioBuffer& mixture, const StemSet* truth) {
    if (truth == nullptr) {
        throw std::runtime_error("oracle backend requires reference stems");
    }
    return oracle_separate(mixture, *truth);
}

StemSet NullBackend::separate(const AudioBuffer& mixture, const StemSet*) {
    mixture.validate();
    StemSet out;
    const AudioBuffer silence(2, mixture.frames(), mixture.sample_rate);
    out[Stem::vocals] = silence;
    out[Stem::drums] = silence;
    out[Stem::bass] = silence;
    out[Stem::other] = mixture;
    return out;
}

AudioBuffer remix(const StemSet& stems, const RemixGains& gains) {
    stems.validate();
    gains.validate();

    const size_t frames = stems.stems[0].frames();
    AudioBuffer unit(2, frames, stems.stems[0].sample_rate);
    AudioBuffer weighted(2, frames, stems.stems[0].sample_rate);
    for (size_t s = 0; s < 4; ++s) {
        const float g = static_cast<float>(db_to_linear(gains.db[s]));
        for (size_t c = 0; c < 2; ++c) {
            const auto& src = stems.stems[s].channels[c];
            for (size_t i = 0; i < frames; ++i) {
                unit.channels[c][i] += src[i];
                weighted.channels[c][i] += g * src[i];
            }
        }
    }

    const double unit_rms = buffer_rms(unit);
    const double weighted_rms = buffer_rms(weighted);
    if (unit_rms == 0.0 || weighted_rms == 0.0) {
        // Degenerate remix (all-silent input or gains that cancel it):
        // return the weighted sum unnormalized.
        return weighted;
    }
    const double norm = unit_rms / weighted_rms;
    for (auto& ch : weighted.channels) {
        for (auto& v : ch) v = static_cast<float>(v * norm);
    }
    return weighted;
}

double level_constraint_gain(const AudioBuffer& mixture, const Listener& listener) {
    mixture.validate();
    if (peak_linear(mixture) == 0.0) {
        throw std::invalid_argument("level_constraint_gain: silent mixture");
    }
    const double amplified_peak = peak_linear(apply_prescription(mixture, listener));
    if (amplified_peak <= 1.0) return 1.0;
    return kPeakSafety / amplified_peak;
}

AudioBuffer apply_task2_baseline(const AudioBuffer& mixture, const Listener& listener) {
    const double gain = level_constraint_gain(mixture, listener);
    AudioBuffer out = mixture;
    if (gain != 1.0) {
        for (auto& ch : out.channels) {
            for (auto& v : ch) v = static_cast<float>(v * gain);
        }
    }
    return out;
}

AudioBuffer select_segment(const AudioBuffer& buffer, double duration_s, uint64_t seed) {
    buffer.validate();
    const size_t want = static_cast<size_t>(std::llround(duration_s * buffer.sample_rate));
    if (want == 0) {
        throw std::invalid_argument("select_segment: requested duration is empty");
    }
    if (want > buffer.frames()) {
        throw std::invalid_argument("select_segment: buffer shorter than requested segment");
    }
    const size_t max_offset = buffer.frames() - want;
    const size_t offset = max_offset == 0 ? 0 : Rng(seed).next_below(max_offset);

    AudioBuffer out;
    out.sample_rate = buffer.sample_rate;
    for (const auto& ch : buffer.channels) {
        out.channels.emplace_back(ch.begin() + static_cast<long>(offset),
                                  ch.begin() + static_cast<long>(offset + want));
    }
    return out;
}

} // namespace cadenza
