#pragma once

#include <filesystem>

#include "cadenza/audio.hpp"

namespace cadenza {

enum class WavEncoding { pcm16, pcm24, float32 };

// RIFF/WAVE reader: PCM 16/24-bit or 32-bit float, 1-2 channels.
// Samples are scaled to +-1.0 full scale. Throws std::runtime_error on
// missing files, unsupported encodings, or truncated data.
AudioBuffer read_wav(const std::filesystem::path& path);

// float32 round-trips bit-exactly; pcm16/24 round to nearest and saturate
// at full scale.
void write_wav(const AudioBuffer& buffer, const std::filesystem::path& path,
               WavEncoding encoding = WavEncoding::float32);

} // namespace cadenza
