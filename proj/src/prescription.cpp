#include "cadenza/prescription.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>

#include "cadenza/dsp.hpp"

namespace cadenza {

namespace {

constexpr std::array<double, 8> kNalrCorrections = {-17.0, -8.0, 1.0, -1.0, -2.0, -2.0, -2.0, -2.0};

// Target gain in dB at an arbitrary frequency: linear interpolation in
// log-frequency between the 8 anchors, flat extrapolation outside.
double target_gain_db(const std::array<double, 8>& anchors_db, double freq) {
    if (freq <= kAudiogramFrequencies.front()) return anchors_db.front();
    if (freq >= kAudiogramFrequencies.back()) return anchors_db.back();
    for (size_t i = 0; i + 1 < kAudiogramFrequencies.size(); ++i) {
        const double f0 = kAudiogramFrequencies[i];
        const double f1 = kAudiogramFrequencies[i + 1];
        if (freq >= f0 && freq <= f1) {
            const double t = (std::log(freq) - std::log(f0)) / (std::log(f1) - std::log(f0));
            return anchors_db[i] + t * (anchors_db[i + 1] - anchors_db[i]);
        }
    }
    return anchors_db.back();
}

// One frequency-sampling pass: dense zero-phase target, inverse transform,
// Hamming window, exact symmetrization.
FirFilter design_once(const std::array<double, 8>& anchors_db, int sample_rate, int n_taps) {
    const size_t grid = std::max<size_t>(4096, next_pow2(16 * static_cast<size_t>(n_taps)));
    std::vector<std::complex<double>> spectrum(grid);
    for (size_t k = 0; k <= grid / 2; ++k) {
        const double freq = static_cast<double>(k) * sample_rate / static_cast<double>(grid);
        const double mag = db_to_linear(target_gain_db(anchors_db, freq));
        spectrum[k] = mag;
        if (k > 0 && k < grid / 2) spectrum[grid - k] = mag;
    }
    fft(spectrum, true);

    FirFilter fir;
    fir.design_rate = sample_rate;
    fir.taps.resize(static_cast<size_t>(n_taps));
    const int half = (n_taps - 1) / 2;
    for (int n = -half; n <= half; ++n) {
        const size_t idx = static_cast<size_t>((n + static_cast<int>(grid)) % static_cast<int>(grid));
        const double w = 0.54 + 0.46 * std::cos(std::numbers::pi * n / half);
        fir.taps[static_cast<size_t>(n + half)] = spectrum[idx].real() * w;
    }
    for (int i = 0; i < half; ++i) {
        const double avg = 0.5 * (fir.taps[static_cast<size_t>(i)] +
                                  fir.taps[static_cast<size_t>(n_taps - 1 - i)]);
        fir.taps[static_cast<size_t>(i)] = avg;
        fir.taps[static_cast<size_t>(n_taps - 1 - i)] = avg;
    }
    return fir;
}

double realized_magnitude_db(const FirFilter& fir, double freq) {
    std::complex<double> h(0.0, 0.0);
    const double w = 2.0 * std::numbers::pi * freq / fir.design_rate;
    for (size_t n = 0; n < fir.taps.size(); ++n) {
        h += fir.taps[n] * std::polar(1.0, -w * static_cast<double>(n));
    }
    return linear_to_db(std::abs(h));
}

} // namespace

PrescriptionGains nalr_gains(const Audiogram& a) {
    a.validate();
    const double x = 0.05 * (a.thresholds[1] + a.thresholds[2] + a.thresholds[3]);
    PrescriptionGains g;
    for (size_t i = 0; i < 8; ++i) {
        g.db[i] = std::max(0.0, x + 0.31 * a.thresholds[i] + kNalrCorrections[i]);
    }
    return g;
}

int default_tap_count(int sample_rate) {
    int n = static_cast<int>(std::lround(221.0 * sample_rate / 44100.0));
    if (n % 2 == 0) ++n;
    return std::max(n, 65);
}

FirFilter design_fir(const PrescriptionGains& gains, int sample_rate, int n_taps) {
    if (n_taps < 65 || n_taps % 2 == 0) {
        throw std::invalid_argument("design_fir: tap count must be odd and >= 65");
    }
    if (sample_rate < 16000) {
        throw std::invalid_argument("design_fir: sample rate must be >= 16000 Hz");
    }

    // Window smearing at modest tap counts pulls the low anchors off
    // target, so pre-compensate the sampled anchors until the realized
    // response lands on the prescription.
    const double nyquist = 0.5 * sample_rate;
    std::array<double, 8> adjusted = gains.db;
    FirFilter fir = design_once(adjusted, sample_rate, n_taps);
    for (int iter = 0; iter < 12; ++iter) {
        double max_err = 0.0;
        std::array<double, 8> err{};
        for (size_t i = 0; i < 8; ++i) {
            if (kAudiogramFrequencies[i] >= nyquist) continue;
            err[i] = realized_magnitude_db(fir, kAudiogramFrequencies[i]) - gains.db[i];
            max_err = std::max(max_err, std::fabs(err[i]));
        }
        if (max_err < 0.25) break;
        for (size_t i = 0; i < 8; ++i) adjusted[i] -= 0.8 * err[i];
        fir = design_once(adjusted, sample_rate, n_taps);
    }
    return fir;
}

std::vector<float> apply_fir_aligned(const std::vector<float>& samples, const FirFilter& fir) {
    if (samples.empty()) {
        throw std::invalid_argument("apply_fir_aligned: empty input");
    }
    const std::vector<float> taps(fir.taps.begin(), fir.taps.end());
    const std::vector<float> full = convolve(samples, taps);
    const size_t delay = fir.group_delay();
    std::vector<float> out(samples.size());
    for (size_t i = 0; i < samples.size(); ++i) out[i] = full[i + delay];
    return out;
}

AudioBuffer apply_prescription(const AudioBuffer& buffer, const Listener& listener) {
    buffer.validate();
    if (buffer.num_channels() != 2) {
        throw std::invalid_argument("apply_prescription: stereo input required");
    }
    const int n_taps = default_tap_count(buffer.sample_rate);
    const FirFilter left = design_fir(nalr_gains(listener.left), buffer.sample_rate, n_taps);
    const FirFilter right = design_fir(nalr_gains(listener.right), buffer.sample_rate, n_taps);

    AudioBuffer out;
    out.sample_rate = buffer.sample_rate;
    out.channels.push_back(apply_fir_aligned(buffer.channels[0], left));
    out.channels.push_back(apply_fir_aligned(buffer.channels[1], right));
    return out;
}

} // namespace cadenza
