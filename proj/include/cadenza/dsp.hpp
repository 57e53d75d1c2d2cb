#pragma once

#include <complex>
#include <vector>

#include "cadenza/audio.hpp"

namespace cadenza {

// In-place radix-2 FFT; size must be a power of two.
void fft(std::vector<std::complex<double>>& data, bool inverse);

size_t next_pow2(size_t n);

// Full linear convolution, output length = len(signal) + len(ir) - 1.
// Short kernels run in the time domain; longer ones use overlap-add with
// block size = next power of two >= 4x the kernel length. Accumulation is
// in double either way.
std::vector<float> convolve(const std::vector<float>& signal, const std::vector<float>& ir);

// Band-limited resampling, windowed-sinc (Kaiser) polyphase. Equal rates
// pass the input through untouched. Output length is round(n * target/source),
// so duration is preserved within one sample.
AudioBuffer resample(const AudioBuffer& buffer, int target_rate);

} // namespace cadenza
