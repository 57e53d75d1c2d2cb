#include "cadenza/quality_metric.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

#include "cadenza/dsp.hpp"
#include "cadenza/prescription.hpp"

namespace cadenza {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kAlignSearchS = 0.1;      // cross-correlation search window
// Audibility convention: digital full scale plays back at 100 dB SPL, so
// a band whose threshold-attenuated level falls under -100 dBFS is below
// the listener's threshold.
constexpr double kAudibilityFloorDb = -100.0;
constexpr double kActiveFrameDb = -90.0;   // reference frames below this are skipped
constexpr int kFrameSmoothHalfWidth = 1;  // +-1 frame envelope averaging
constexpr int kCepstralCoeffs = 6;
constexpr int kSpectralSmoothCoeffs = 5;   // smooth-difference discount order
constexpr double kSpectralNormDb = 40.0;   // full-scale band-profile distance
constexpr double kSpectralRangeDb = 50.0;  // per-signal profile dynamic range

double erb_scale(double hz) { return 21.4 * std::log10(1.0 + 0.00437 * hz); }
double erb_scale_inv(double e) { return (std::pow(10.0, e / 21.4) - 1.0) / 0.00437; }
double erb_bandwidth(double hz) { return 24.7 + hz / 9.265; }

std::vector<double> band_centers(const MetricConfig& cfg) {
    std::vector<double> centers(cfg.n_bands);
    const double lo = erb_scale(cfg.band_lo_hz);
    const double hi = erb_scale(cfg.band_hi_hz);
    for (int b = 0; b < cfg.n_bands; ++b) {
        const double t = cfg.n_bands == 1 ? 0.0 : static_cast<double>(b) / (cfg.n_bands - 1);
        centers[b] = erb_scale_inv(lo + t * (hi - lo));
    }
    return centers;
}

// Audiogram threshold interpolated to an arbitrary frequency: linear in
// log-frequency between the standard points, flat outside.
double threshold_at(const Audiogram& a, double freq) {
    if (freq <= kAudiogramFrequencies.front()) return a.thresholds.front();
    if (freq >= kAudiogramFrequencies.back()) return a.thresholds.back();
    for (size_t i = 0; i + 1 < kAudiogramFrequencies.size(); ++i) {
        const double f0 = kAudiogramFrequencies[i];
        const double f1 = kAudiogramFrequencies[i + 1];
        if (freq >= f0 && freq <= f1) {
            const double t = (std::log(freq) - std::log(f0)) / (std::log(f1) - std::log(f0));
            return a.thresholds[i] + t * (a.thresholds[i + 1] - a.thresholds[i]);
        }
    }
    return a.thresholds.back();
}

// Frame-averaged band envelopes: n_bands x n_frames, linear amplitude.
// Band filtering is a 4th-order gammatone approximation (cascaded complex
// one-poles, unit gain at the center frequency); the envelope is the
// rectified band signal through a 2nd-order Butterworth lowpass.
std::vector<std::vector<double>> envelope_gram(std::span<const float> x, int rate,
                                               const std::vector<double>& centers,
                                               const MetricConfig& cfg, size_t n_frames,
                                               size_t frame_len) {
    std::vector<std::vector<double>> gram(centers.size(), std::vector<double>(n_frames, 0.0));

    // Butterworth lowpass biquad at the envelope cutoff.
    const double w0 = 2.0 * kPi * cfg.env_cutoff_hz / rate;
    const double cosw = std::cos(w0), sinw = std::sin(w0);
    const double alpha = sinw / std::numbers::sqrt2;
    const double a0 = 1.0 + alpha;
    const double lb0 = (1.0 - cosw) / 2.0 / a0, lb1 = (1.0 - cosw) / a0, lb2 = lb0;
    const double la1 = -2.0 * cosw / a0, la2 = (1.0 - alpha) / a0;

    for (size_t band = 0; band < centers.size(); ++band) {
        const double bw = 1.019 * erb_bandwidth(centers[band]);
        const double lambda = std::exp(-2.0 * kPi * bw / rate);
        const double theta = 2.0 * kPi * centers[band] / rate;
        const double pr = lambda * std::cos(theta), pi = lambda * std::sin(theta);
        const double norm = std::pow(1.0 - lambda, 4.0);

        double z1r = 0, z1i = 0, z2r = 0, z2i = 0, z3r = 0, z3i = 0, z4r = 0, z4i = 0;
        double e1 = 0, e2 = 0, y1 = 0, y2 = 0;  // biquad state
        auto& row = gram[band];

        const size_t limit = n_frames * frame_len;
        for (size_t n = 0; n < limit; ++n) {
            double tr = x[n] + pr * z1r - pi * z1i;
            double ti = pr * z1i + pi * z1r;
            z1r = tr; z1i = ti;
            tr = z1r + pr * z2r - pi * z2i;
            ti = z1i + pr * z2i + pi * z2r;
            z2r = tr; z2i = ti;
            tr = z2r + pr * z3r - pi * z3i;
            ti = z2i + pr * z3i + pi * z3r;
            z3r = tr; z3i = ti;
            tr = z3r + pr * z4r - pi * z4i;
            ti = z3i + pr * z4i + pi * z4r;
            z4r = tr; z4i = ti;

            const double rectified = std::fabs(z4r * norm);
            const double env = lb0 * rectified + lb1 * e1 + lb2 * e2 - la1 * y1 - la2 * y2;
            e2 = e1; e1 = rectified;
            y2 = y1; y1 = env;

            row[n / frame_len] += env;
        }
        const double inv = 1.0 / static_cast<double>(frame_len);
        for (auto& v : row) v *= inv;
    }

    // Centered moving average across frames. The framed values still
    // carry band-local sampling flicker well above the envelope band;
    // a window matched to the envelope cutoff keeps modulation structure
    // and drops the flicker.
    const int half = kFrameSmoothHalfWidth;
    if (half > 0 && n_frames > static_cast<size_t>(2 * half)) {
        std::vector<double> tmp(n_frames);
        for (auto& row : gram) {
            for (size_t f = 0; f < n_frames; ++f) {
                const size_t lo = f >= static_cast<size_t>(half) ? f - half : 0;
                const size_t hi = std::min(n_frames - 1, f + static_cast<size_t>(half));
                double s = 0.0;
                for (size_t j = lo; j <= hi; ++j) s += row[j];
                tmp[f] = s / static_cast<double>(hi - lo + 1);
            }
            row = tmp;
        }
    }
    return gram;
}

// DCT-II smoothing across bands: keep the first few cepstral coefficients.
std::vector<double> cepstral_smooth(const std::vector<double>& profile, int n_keep) {
    const size_t n = profile.size();
    n_keep = std::min<int>(n_keep, static_cast<int>(n));
    std::vector<double> coeffs(static_cast<size_t>(n_keep), 0.0);
    for (int j = 0; j < n_keep; ++j) {
        double c = 0.0;
        for (size_t b = 0; b < n; ++b) {
            c += profile[b] * std::cos(kPi * j * (static_cast<double>(b) + 0.5) / static_cast<double>(n));
        }
        coeffs[static_cast<size_t>(j)] = c;
    }
    std::vector<double> out(n, 0.0);
    for (size_t b = 0; b < n; ++b) {
        double v = coeffs[0] / static_cast<double>(n);
        for (int j = 1; j < n_keep; ++j) {
            v += 2.0 / static_cast<double>(n) * coeffs[static_cast<size_t>(j)] *
                 std::cos(kPi * j * (static_cast<double>(b) + 0.5) / static_cast<double>(n));
        }
        out[b] = v;
    }
    return out;
}

// Pearson correlation; 0 when either side has no variance.
double correlation(const std::vector<double>& a, const std::vector<double>& b) {
    const size_t n = a.size();
    double ma = 0, mb = 0;
    for (size_t i = 0; i < n; ++i) { ma += a[i]; mb += b[i]; }
    ma /= static_cast<double>(n);
    mb /= static_cast<double>(n);
    double saa = 0, sbb = 0, sab = 0;
    for (size_t i = 0; i < n; ++i) {
        const double da = a[i] - ma, db = b[i] - mb;
        saa += da * da;
        sbb += db * db;
        sab += da * db;
    }
    if (saa <= 0.0 || sbb <= 0.0) return 0.0;
    return sab / std::sqrt(saa * sbb);
}

// Best lag (processed relative to reference) by summed per-band envelope
// cross-correlation over a small alignment filterbank. Correlating band
// envelopes (not the waveform, not the broadband envelope) is invariant
// to static spectral differences between the two signals and cannot lock
// onto pitch periods. Each band is RMS-normalized so loud bands do not
// dominate; lag resolution is one alignment frame (~2 ms).
long find_alignment_lag(std::span<const float> proc, std::span<const float> ref, int rate,
                        const MetricConfig& cfg) {
    const size_t frame_len = std::max<size_t>(1, static_cast<size_t>(rate) / 500);
    const size_t n_frames = std::min(proc.size(), ref.size()) / frame_len;
    if (n_frames < 4) return 0;

    MetricConfig align_cfg = cfg;
    align_cfg.n_bands = 8;
    std::vector<double> centers = band_centers(align_cfg);
    auto gp = envelope_gram(proc, rate, centers, cfg, n_frames, frame_len);
    auto gr = envelope_gram(ref, rate, centers, cfg, n_frames, frame_len);
    for (auto* gram : {&gp, &gr}) {
        for (auto& row : *gram) {
            double sum_sq = 0.0;
            for (double v : row) sum_sq += v * v;
            const double norm = std::sqrt(sum_sq);
            if (norm > 0.0) {
                for (auto& v : row) v /= norm;
            }
        }
    }

    const long max_flag = std::lround(kAlignSearchS * rate / static_cast<double>(frame_len));
    long best_flag = 0;
    double best = -std::numeric_limits<double>::infinity();
    for (long lag = -max_flag; lag <= max_flag; ++lag) {
        double c = 0.0;
        const long lo = std::max(0L, -lag);
        const long hi = std::min<long>(static_cast<long>(n_frames),
                                       static_cast<long>(n_frames) - lag);
        for (size_t b = 0; b < centers.size(); ++b) {
            const auto& rrow = gr[b];
            const auto& prow = gp[b];
            for (long i = lo; i < hi; ++i) {
                c += rrow[static_cast<size_t>(i)] * prow[static_cast<size_t>(i + lag)];
            }
        }
        if (c > best) { best = c; best_flag = lag; }
    }
    return best_flag * static_cast<long>(frame_len);
}

bool is_digital_silence(const AudioBuffer& b) {
    for (const auto& ch : b.channels) {
        for (float v : ch) {
            if (v != 0.0f) return false;
        }
    }
    return true;
}

} // namespace

void MetricConfig::validate() const {
    if (internal_rate <= 0) throw std::invalid_argument("MetricConfig: internal rate must be positive");
    if (n_bands < 8) throw std::invalid_argument("MetricConfig: at least 8 bands required");
    if (band_lo_hz <= 0.0 || band_hi_hz <= band_lo_hz || band_hi_hz > 0.5 * internal_rate) {
        throw std::invalid_argument("MetricConfig: band range must lie within (0, Nyquist]");
    }
    if (std::fabs(env_weight + spec_weight - 1.0) > 1e-9) {
        throw std::invalid_argument("MetricConfig: envelope and spectrum weights must sum to 1");
    }
    if (frame_ms <= 0.0 || env_cutoff_hz <= 0.0) {
        throw std::invalid_argument("MetricConfig: frame length and envelope cutoff must be positive");
    }
}

AudioBuffer make_reference(const AudioBuffer& clean_mono, const Audiogram& a, const MetricConfig& cfg) {
    cfg.validate();
    clean_mono.validate();
    if (clean_mono.num_channels() != 1) {
        throw std::invalid_argument("make_reference: mono input required");
    }
    if (peak_linear(clean_mono) == 0.0) {
        throw std::invalid_argument("make_reference: silent clean signal");
    }
    const FirFilter fir = design_fir(nalr_gains(a), clean_mono.sample_rate,
                                     default_tap_count(clean_mono.sample_rate));
    AudioBuffer amplified = mono_buffer(apply_fir_aligned(clean_mono.channels[0], fir),
                                        clean_mono.sample_rate);
    return resample(amplified, cfg.internal_rate);
}

double score(const AudioBuffer& processed_mono, const AudioBuffer& reference_mono,
             const Audiogram& a, const MetricConfig& cfg) {
    cfg.validate();
    processed_mono.validate();
    reference_mono.validate();
    a.validate();
    if (processed_mono.num_channels() != 1 || reference_mono.num_channels() != 1) {
        throw std::invalid_argument("score: mono signals required");
    }
    if (std::fabs(processed_mono.duration_s() - reference_mono.duration_s()) > 0.5) {
        throw std::invalid_argument("score: processed and reference durations differ by more than 0.5 s");
    }

    if (is_digital_silence(processed_mono)) return 0.0;

    const AudioBuffer proc = resample(processed_mono, cfg.internal_rate);
    const AudioBuffer ref = resample(reference_mono, cfg.internal_rate);
    const int rate = cfg.internal_rate;

    // Time alignment, then comparison over the overlapping span.
    const long lag = find_alignment_lag(proc.channels[0], ref.channels[0], rate, cfg);
    const size_t p_off = lag >= 0 ? static_cast<size_t>(lag) : 0;
    const size_t r_off = lag >= 0 ? 0 : static_cast<size_t>(-lag);
    const size_t n = std::min(proc.frames() - p_off, ref.frames() - r_off);

    const size_t frame_len = static_cast<size_t>(std::lround(cfg.frame_ms / 1000.0 * rate));
    const size_t n_frames = frame_len > 0 ? n / frame_len : 0;
    if (n_frames == 0) return 0.0;

    const auto centers = band_centers(cfg);
    const std::span<const float> p_span(proc.channels[0].data() + p_off, n);
    const std::span<const float> r_span(ref.channels[0].data() + r_off, n);
    auto gp = envelope_gram(p_span, rate, centers, cfg, n_frames, frame_len);
    auto gr = envelope_gram(r_span, rate, centers, cfg, n_frames, frame_len);

    // Hearing-threshold attenuation, identical on both sides. Bands whose
    // attenuated reference level stays under the floor are inaudible to
    // this listener and drop out of the comparison entirely.
    const size_t n_bands = centers.size();
    std::vector<double> atten(n_bands);
    for (size_t b = 0; b < n_bands; ++b) {
        atten[b] = db_to_linear(-threshold_at(a, centers[b]));
    }
    const double floor_lin = db_to_linear(kAudibilityFloorDb);

    std::vector<double> long_term_p(n_bands, 0.0), long_term_r(n_bands, 0.0);
    for (size_t b = 0; b < n_bands; ++b) {
        for (size_t f = 0; f < n_frames; ++f) {
            long_term_p[b] += gp[b][f];
            long_term_r[b] += gr[b][f];
        }
        long_term_p[b] = long_term_p[b] / static_cast<double>(n_frames) * atten[b];
        long_term_r[b] = long_term_r[b] / static_cast<double>(n_frames) * atten[b];
    }

    std::vector<size_t> audible;
    for (size_t b = 0; b < n_bands; ++b) {
        if (long_term_r[b] > floor_lin) audible.push_back(b);
    }
    if (audible.size() < 2) return 0.0;

    // Log envelopes without a hard floor (tiny eps only), each band
    // centered on its own temporal mean. A static per-band gain between
    // the signals, such as the reference's prescription amplification,
    // cancels exactly; what remains is modulation shape.
    auto log_env = [&](const std::vector<std::vector<double>>& gram, size_t b, size_t f) {
        return 20.0 * std::log10(std::max(gram[b][f] * atten[b], 1e-12));
    };
    std::vector<double> mean_p(n_bands, 0.0), mean_r(n_bands, 0.0);
    for (size_t b : audible) {
        for (size_t f = 0; f < n_frames; ++f) {
            mean_p[b] += log_env(gp, b, f);
            mean_r[b] += log_env(gr, b, f);
        }
        mean_p[b] /= static_cast<double>(n_frames);
        mean_r[b] /= static_cast<double>(n_frames);
    }

    // Envelope fidelity: frame-wise across-band correlation of the
    // cepstrally smoothed, mean-removed log profiles, over frames where
    // the attenuated reference is active.
    double env_sum = 0.0;
    size_t active = 0;
    std::vector<double> pp(audible.size()), rp(audible.size());
    for (size_t f = 0; f < n_frames; ++f) {
        double frame_peak_db = kAudibilityFloorDb;
        for (size_t i = 0; i < audible.size(); ++i) {
            const size_t b = audible[i];
            frame_peak_db = std::max(
                frame_peak_db, 20.0 * std::log10(std::max(gr[b][f] * atten[b], floor_lin)));
            pp[i] = log_env(gp, b, f) - mean_p[b];
            rp[i] = log_env(gr, b, f) - mean_r[b];
        }
        if (frame_peak_db <= kActiveFrameDb) continue;
        ++active;
        env_sum += correlation(cepstral_smooth(pp, kCepstralCoeffs),
                               cepstral_smooth(rp, kCepstralCoeffs));
    }
    if (active == 0) return 0.0;
    const double env_fidelity = env_sum / static_cast<double>(active);

    // Spectral fidelity: shape distance between the long-term audible
    // band profiles. Each profile is floored relative to its own peak
    // band (fixed dynamic range), which keeps the comparison invariant
    // to absolute level; smooth differences (broadband gain, the
    // prescription tilt) are then discounted by removing the lowest DCT
    // components, and the jagged residual is normalized to a 40 dB
    // full-scale distance.
    double p_peak = 1e-12, r_peak = 1e-12;
    for (const size_t b : audible) {
        p_peak = std::max(p_peak, long_term_p[b]);
        r_peak = std::max(r_peak, long_term_r[b]);
    }
    const double range = db_to_linear(-kSpectralRangeDb);
    std::vector<double> diff(audible.size());
    for (size_t i = 0; i < audible.size(); ++i) {
        const size_t b = audible[i];
        diff[i] = 20.0 * std::log10(std::max(long_term_p[b], p_peak * range)) -
                  20.0 * std::log10(std::max(long_term_r[b], r_peak * range));
    }
    const auto smooth = cepstral_smooth(diff, kSpectralSmoothCoeffs);
    double dist_sq = 0.0;
    for (size_t i = 0; i < diff.size(); ++i) {
        const double d = diff[i] - smooth[i];
        dist_sq += d * d;
    }
    const double dist = std::sqrt(dist_sq / static_cast<double>(diff.size()));
    const double spec_fidelity = 1.0 - std::min(1.0, dist / kSpectralNormDb);

    const double combined = cfg.env_weight * env_fidelity + cfg.spec_weight * spec_fidelity;
    return std::clamp(combined, 0.0, 1.0);
}

std::pair<double, double> score_stereo(const AudioBuffer& processed, const AudioBuffer& clean,
                                       const Listener& listener, const MetricConfig& cfg) {
    processed.validate();
    clean.validate();
    if (processed.num_channels() != 2 || clean.num_channels() != 2) {
        throw std::invalid_argument("score_stereo: stereo signals required");
    }
    std::pair<double, double> out{0.0, 0.0};
    for (int ear = 0; ear < 2; ++ear) {
        const Audiogram& a = ear == 0 ? listener.left : listener.right;
        const AudioBuffer ref = make_reference(
            mono_buffer(clean.channels[static_cast<size_t>(ear)], clean.sample_rate), a, cfg);
        const double s = score(
            mono_buffer(processed.channels[static_cast<size_t>(ear)], processed.sample_rate), ref, a, cfg);
        (ear == 0 ? out.first : out.second) = s;
    }
    return out;
}

std::array<double, 8> score_stems(const StemSet& estimated, const StemSet& truth,
                                  const Listener& listener, const MetricConfig& cfg) {
    estimated.validate();
    truth.validate();
    if (estimated.stems[0].frames() != truth.stems[0].frames()) {
        throw std::invalid_argument("score_stems: stem lengths differ");
    }
    std::array<double, 8> out{};
    for (size_t s = 0; s < 4; ++s) {
        const auto [l, r] = score_stereo(estimated.stems[s], truth.stems[s], listener, cfg);
        out[2 * s] = l;
        out[2 * s + 1] = r;
    }
    return out;
}

} // namespace cadenza
