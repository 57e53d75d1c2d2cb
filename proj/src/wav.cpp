#include "cadenza/wav.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>

namespace cadenza {

namespace {

constexpr uint16_t kFormatPcm = 0x0001;
constexpr uint16_t kFormatFloat = 0x0003;
constexpr uint16_t kFormatExtensible = 0xFFFE;

uint32_t read_u32(const uint8_t* p) {
    return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
           (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

uint16_t read_u16(const uint8_t* p) {
    return static_cast<uint16_t>(p[0] | (p[1] << 8));
}

void put_u32(std::string& out, uint32_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
    out.push_back(static_cast<char>((v >> 16) & 0xff));
    out.push_back(static_cast<char>((v >> 24) & 0xff));
}

void put_u16(std::string& out, uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
}

int32_t saturate_round(double v, int32_t lo, int32_t hi) {
    const double r = std::round(v);
    if (r <= lo) return lo;
    if (r >= hi) return hi;
    return static_cast<int32_t>(r);
}

} // namespace

AudioBuffer read_wav(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("read_wav: cannot open " + path.string());
    }
    std::string raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const auto* data = reinterpret_cast<const uint8_t*>(raw.data());
    const size_t size = raw.size();

    if (size < 12 || std::memcmp(data, "RIFF", 4) != 0 || std::memcmp(data + 8, "WAVE", 4) != 0) {
        throw std::runtime_error("read_wav: not a RIFF/WAVE file: " + path.string());
    }

    uint16_t format = 0, channels = 0, bits = 0;
    uint32_t rate = 0;
    const uint8_t* pcm = nullptr;
    size_t pcm_bytes = 0;
    bool have_fmt = false;

    size_t pos = 12;
    while (pos + 8 <= size) {
        const uint32_t chunk_size = read_u32(data + pos + 4);
        const uint8_t* body = data + pos + 8;
        const bool truncated = pos + 8 + chunk_size > size;

        if (std::memcmp(data + pos, "fmt ", 4) == 0) {
            if (truncated || chunk_size < 16) {
                throw std::runtime_error("read_wav: malformed fmt chunk");
            }
            format = read_u16(body);
            channels = read_u16(body + 2);
            rate = read_u32(body + 4);
            bits = read_u16(body + 14);
            if (format == kFormatExtensible) {
                if (chunk_size < 40) throw std::runtime_error("read_wav: malformed extensible fmt");
                format = read_u16(body + 24);  // first two bytes of SubFormat GUID
            }
            have_fmt = true;
        } else if (std::memcmp(data + pos, "data", 4) == 0) {
            if (truncated) {
                throw std::runtime_error("read_wav: truncated data chunk in " + path.string());
            }
            pcm = body;
            pcm_bytes = chunk_size;
        }
        pos += 8 + chunk_size + (chunk_size & 1);  // chunks are word-aligned
    }

    if (!have_fmt || pcm == nullptr) {
        throw std::runtime_error("read_wav: missing fmt or data chunk in " + path.string());
    }
    if (channels < 1 || channels > 2) {
        throw std::runtime_error("read_wav: unsupported channel count " + std::to_string(channels));
    }
    if (rate == 0) {
        throw std::runtime_error("read_wav: zero sample rate");
    }

    const bool pcm16 = format == kFormatPcm && bits == 16;
    const bool pcm24 = format == kFormatPcm && bits == 24;
    const bool f32 = format == kFormatFloat && bits == 32;
    if (!pcm16 && !pcm24 && !f32) {
        throw std::runtime_error("read_wav: unsupported encoding (format " + std::to_string(format) +
                                 ", " + std::to_string(bits) + " bit)");
    }

    const size_t bytes_per_sample = bits / 8;
    const size_t frame_bytes = bytes_per_sample * channels;
    const size_t frames = pcm_bytes / frame_bytes;

    AudioBuffer out(channels, frames, static_cast<int>(rate));
    for (size_t f = 0; f < frames; ++f) {
        for (int c = 0; c < channels; ++c) {
            const uint8_t* s = pcm + f * frame_bytes + c * bytes_per_sample;
            float v = 0.0f;
            if (pcm16) {
                const auto i = static_cast<int16_t>(read_u16(s));
                v = static_cast<float>(i) / 32768.0f;
            } else if (pcm24) {
                int32_t i = s[0] | (s[1] << 8) | (s[2] << 16);
                if (i & 0x800000) i |= ~0xFFFFFF;  // sign extend
                v = static_cast<float>(i) / 8388608.0f;
            } else {
                uint32_t u = read_u32(s);
                v = std::bit_cast<float>(u);
            }
            out.channels[c][f] = v;
        }
    }
    return out;
}

void write_wav(const AudioBuffer& buffer, const std::filesystem::path& path, WavEncoding encoding) {
    buffer.validate();
    if (buffer.frames() == 0) {
        throw std::runtime_error("write_wav: zero-length buffer");
    }
    if (buffer.num_channels() > 2) {
        throw std::runtime_error("write_wav: only mono and stereo supported");
    }

    const uint16_t channels = static_cast<uint16_t>(buffer.num_channels());
    uint16_t bits = 32, format = kFormatFloat;
    if (encoding == WavEncoding::pcm16) { bits = 16; format = kFormatPcm; }
    if (encoding == WavEncoding::pcm24) { bits = 24; format = kFormatPcm; }

    const uint32_t frame_bytes = channels * bits / 8;
    const uint32_t data_bytes = static_cast<uint32_t>(buffer.frames()) * frame_bytes;

    std::string out;
    out.reserve(44 + data_bytes);
    out += "RIFF";
    put_u32(out, 36 + data_bytes);
    out += "WAVEfmt ";
    put_u32(out, 16);
    put_u16(out, format);
    put_u16(out, channels);
    put_u32(out, static_cast<uint32_t>(buffer.sample_rate));
    put_u32(out, static_cast<uint32_t>(buffer.sample_rate) * frame_bytes);
    put_u16(out, static_cast<uint16_t>(frame_bytes));
    put_u16(out, bits);
    out += "data";
    put_u32(out, data_bytes);

    for (size_t f = 0; f < buffer.frames(); ++f) {
        for (uint16_t c = 0; c < channels; ++c) {
            const float v = buffer.channels[c][f];
            switch (encoding) {
                case WavEncoding::pcm16: {
                    const int32_t i = saturate_round(static_cast<double>(v) * 32767.0, -32768, 32767);
                    put_u16(out, static_cast<uint16_t>(static_cast<int16_t>(i)));
                    break;
                }
                case WavEncoding::pcm24: {
                    const int32_t i = saturate_round(static_cast<double>(v) * 8388607.0, -8388608, 8388607);
                    out.push_back(static_cast<char>(i & 0xff));
                    out.push_back(static_cast<char>((i >> 8) & 0xff));
                    out.push_back(static_cast<char>((i >> 16) & 0xff));
                    break;
                }
                case WavEncoding::float32: {
                    put_u32(out, std::bit_cast<uint32_t>(v));
                    break;
                }
            }
        }
    }

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) {
        throw std::runtime_error("write_wav: cannot open " + path.string() + " for writing");
    }
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) {
        throw std::runtime_error("write_wav: short write to " + path.string());
    }
}

} // namespace cadenza
