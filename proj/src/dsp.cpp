#include "cadenza/dsp.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace cadenza {

namespace {

constexpr double kPi = std::numbers::pi;

// Direct time-domain convolution. Exact for sparse kernels (unit impulses,
// pure delays), which also keeps the convolve(x, delta) identity bit-exact.
std::vector<float> convolve_direct(const std::vector<float>& x, const std::vector<float>& h) {
    std::vector<float> out(x.size() + h.size() - 1, 0.0f);
    for (size_t j = 0; j < h.size(); ++j) {
        const double hj = h[j];
        if (hj == 0.0) continue;
        for (size_t i = 0; i < x.size(); ++i) {
            out[i + j] = static_cast<float>(out[i + j] + hj * x[i]);
        }
    }
    return out;
}

// Accumulate in double, round once at the end.
std::vector<float> convolve_overlap_add(const std::vector<float>& x, const std::vector<float>& h) {
    const size_t out_len = x.size() + h.size() - 1;
    const size_t fft_size = next_pow2(4 * h.size());
    const size_t hop = fft_size - h.size() + 1;

    std::vector<std::complex<double>> hf(fft_size);
    for (size_t i = 0; i < h.size(); ++i) hf[i] = h[i];
    fft(hf, false);

    std::vector<double> acc(out_len, 0.0);
    std::vector<std::complex<double>> block(fft_size);
    for (size_t start = 0; start < x.size(); start += hop) {
        const size_t n = std::min(hop, x.size() - start);
        std::fill(block.begin(), block.end(), std::complex<double>(0.0, 0.0));
        for (size_t i = 0; i < n; ++i) block[i] = x[start + i];
        fft(block, false);
        for (size_t i = 0; i < fft_size; ++i) block[i] *= hf[i];
        fft(block, true);
        const size_t limit = std::min(fft_size, out_len - start);
        for (size_t i = 0; i < limit; ++i) acc[start + i] += block[i].real();
    }

    std::vector<float> out(out_len);
    for (size_t i = 0; i < out_len; ++i) out[i] = static_cast<float>(acc[i]);
    return out;
}

// Zeroth-order modified Bessel function, power series.
double bessel_i0(double x) {
    double sum = 1.0, term = 1.0;
    const double half_x_sq = 0.25 * x * x;
    for (int k = 1; k < 40; ++k) {
        term *= half_x_sq / (k * k);
        sum += term;
        if (term < 1e-18 * sum) break;
    }
    return sum;
}

double sinc(double x) {
    if (std::fabs(x) < 1e-12) return 1.0;
    return std::sin(kPi * x) / (kPi * x);
}

// Windowed-sinc interpolation kernel sampled on a phase table. One filter
// instance per (source, target) rate pair.
class SincResampler {
public:
    SincResampler(int src_rate, int dst_rate) {
        const double ratio = static_cast<double>(dst_rate) / src_rate;
        scale_ = std::min(1.0, ratio);
        half_width_ = kHalfTaps / scale_;
        const double cutoff = 0.95 * scale_;

        const int table_len = kPhases * kHalfTaps + 1;
        table_.resize(table_len);
        const double i0_beta = bessel_i0(kKaiserBeta);
        for (int i = 0; i < table_len; ++i) {
            // t in units of input samples at the stretched kernel scale
            const double t = static_cast<double>(i) / kPhases / scale_;
            const double u = t / half_width_;  // in [0, 1]
            const double window = bessel_i0(kKaiserBeta * std::sqrt(std::max(0.0, 1.0 - u * u))) / i0_beta;
            table_[i] = cutoff * sinc(cutoff * t) * window;
        }
    }

    // Kernel value at offset t (input samples), linear interpolation
    // between table phases.
    double kernel(double t) const {
        const double a = std::fabs(t) * scale_ * kPhases;
        const int idx = static_cast<int>(a);
        if (idx + 1 >= static_cast<int>(table_.size())) return 0.0;
        const double frac = a - idx;
        return table_[idx] + frac * (table_[idx + 1] - table_[idx]);
    }

    double half_width() const { return half_width_; }

private:
    static constexpr int kHalfTaps = 32;      // 64-tap kernel per output sample
    static constexpr int kPhases = 512;
    static constexpr double kKaiserBeta = 8.6;

    double scale_ = 1.0;
    double half_width_ = kHalfTaps;
    std::vector<double> table_;
};

} // namespace

size_t next_pow2(size_t n) {
    size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

void fft(std::vector<std::complex<double>>& data, bool inverse) {
    const size_t n = data.size();
    if (n == 0 || (n & (n - 1)) != 0) {
        throw std::invalid_argument("fft: size must be a power of two");
    }
    // bit-reversal permutation
    for (size_t i = 1, j = 0; i < n; ++i) {
        size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(data[i], data[j]);
    }
    for (size_t len = 2; len <= n; len <<= 1) {
        const double angle = 2.0 * kPi / static_cast<double>(len) * (inverse ? 1.0 : -1.0);
        const std::complex<double> wstep(std::cos(angle), std::sin(angle));
        for (size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (size_t k = 0; k < len / 2; ++k) {
                const std::complex<double> u = data[i + k];
                const std::complex<double> v = data[i + k + len / 2] * w;
                data[i + k] = u + v;
                data[i + k + len / 2] = u - v;
                w *= wstep;
            }
        }
    }
    if (inverse) {
        const double inv_n = 1.0 / static_cast<double>(n);
        for (auto& c : data) c *= inv_n;
    }
}

std::vector<float> convolve(const std::vector<float>& signal, const std::vector<float>& ir) {
    if (signal.empty() || ir.empty()) {
        throw std::invalid_argument("convolve: empty input");
    }
    if (ir.size() <= 64) {
        return convolve_direct(signal, ir);
    }
    return convolve_overlap_add(signal, ir);
}

AudioBuffer resample(const AudioBuffer& buffer, int target_rate) {
    buffer.validate();
    if (target_rate <= 0) {
        throw std::invalid_argument("resample: target rate must be positive");
    }
    if (target_rate == buffer.sample_rate) {
        return buffer;
    }

    const SincResampler kernel(buffer.sample_rate, target_rate);
    const double step = static_cast<double>(buffer.sample_rate) / target_rate;
    const size_t in_len = buffer.frames();
    const size_t out_len = static_cast<size_t>(
        std::llround(static_cast<double>(in_len) * target_rate / buffer.sample_rate));

    AudioBuffer out(static_cast<int>(buffer.num_channels()), out_len, target_rate);
    for (size_t c = 0; c < buffer.num_channels(); ++c) {
        const auto& src = buffer.channels[c];
        auto& dst = out.channels[c];
        for (size_t n = 0; n < out_len; ++n) {
            const double center = static_cast<double>(n) * step;
            const long first = std::max(0L, static_cast<long>(std::ceil(center - kernel.half_width())));
            const long last = std::min(static_cast<long>(in_len) - 1,
                                       static_cast<long>(std::floor(center + kernel.half_width())));
            double acc = 0.0, wsum = 0.0;
            for (long k = first; k <= last; ++k) {
                const double w = kernel.kernel(static_cast<double>(k) - center);
                acc += w * src[static_cast<size_t>(k)];
                wsum += w;
            }
            // Normalizing by the window sum pins DC gain to unity for
            // every phase, including truncated edges.
            dst[n] = wsum != 0.0 ? static_cast<float>(acc / wsum) : 0.0f;
        }
    }
    return out;
}

} // namespace cadenza
