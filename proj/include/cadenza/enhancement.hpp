#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "cadenza/audio.hpp"
#include "cadenza/listener.hpp"

namespace cadenza {

enum class Stem { vocals = 0, drums = 1, bass = 2, other = 3 };

inline constexpr std::array<const char*, 4> kStemNames = {"vocals", "drums", "bass", "other"};

// The four VDBO stems, stereo, equal length and rate. Fixed order
// (vocals, drums, bass, other) for scoring.
struct StemSet {
    std::array<AudioBuffer, 4> stems;

    AudioBuffer& operator[](Stem s) { return stems[static_cast<size_t>(s)]; }
    const AudioBuffer& operator[](Stem s) const { return stems[static_cast<size_t>(s)]; }

    void validate() const;
    // Sample-wise sum of all four stems.
    AudioBuffer sum() const;
};

// Per-stem remix gains in dB, each within +-30 dB.
struct RemixGains {
    std::array<double, 4> db{};  // vocals, drums, bass, other

    void validate() const;
};

// Source-separation interface. The truth pointer carries reference stems
// when the manifest supplies them; backends that estimate stems ignore it.
class SeparationBackend {
public:
    virtual ~SeparationBackend() = default;
    virtual StemSet separate(const AudioBuffer& mixture, const StemSet* truth) = 0;
    virtual std::string name() const = 0;
    // 0 means callers may invoke separate() from any number of threads.
    virtual int concurrency_limit() const { return 0; }
};

// Returns the supplied true stems after checking they sum to the mixture
// within a -40 dBFS residual.
StemSet oracle_separate(const AudioBuffer& mixture, const StemSet& truth);

// Ideal separator for pipelines where reference stems exist.
class OracleBackend final : public SeparationBackend {
public:
    StemSet separate(const AudioBuffer& mixture, const StemSet* truth) override;
    std::string name() const override { return "oracle"; }
};

// Degenerate separator: the mixture lands in `other`, the rest is silence.
class NullBackend final : public SeparationBackend {
public:
    StemSet separate(const AudioBuffer& mixture, const StemSet* truth) override;
    std::string name() const override { return "null"; }
};

// Weighted stem sum, RMS-renormalized to the unit-gain sum's level so gain
// choices cannot game energy comparisons. Samples are not clipped.
AudioBuffer remix(const StemSet& stems, const RemixGains& gains);

// Broadband scalar (<= 1, both ears alike) such that NAL-R amplification
// of the scaled mixture cannot clip digital full scale.
double level_constraint_gain(const AudioBuffer& mixture, const Listener& listener);

// The level-constraint baseline: mixture * level_constraint_gain, nothing else.
AudioBuffer apply_task2_baseline(const AudioBuffer& mixture, const Listener& listener);

// Contiguous segment starting at a seed-determined uniform random offset.
// duration_s is 30 (objective evaluation) or 15 (listening panel).
AudioBuffer select_segment(const AudioBuffer& buffer, double duration_s, uint64_t seed);

} // namespace cadenza
