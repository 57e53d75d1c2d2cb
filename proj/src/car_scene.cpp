#include "cadenza/car_scene.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <numbers>
#include <stdexcept>

#include "cadenza/dsp.hpp"
#include "cadenza/rng.hpp"
#include "cadenza/wav.hpp"

namespace cadenza {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr int kEngineHarmonics = 25;
constexpr double kEnginePeakDb = -20.0;
constexpr double kRoadRmsDb = -26.0;
constexpr double kSpeakerAzimuthDeg = 20.0;
constexpr double kRpmPerKmh[6] = {120.0, 75.0, 50.0, 38.0, 30.0, 25.0};

size_t duration_to_frames(double duration_s, int sample_rate) {
    if (duration_s <= 0.0 || sample_rate <= 0) {
        throw std::invalid_argument("duration and sample rate must be positive");
    }
    return static_cast<size_t>(std::llround(duration_s * sample_rate));
}

std::vector<float> engine_tone_frames(const CarSceneParams& params, size_t frames, int rate) {
    const double f0 = engine_fundamental(params.speed_kmh, params.gear);
    const double nyquist = 0.5 * rate;

    Rng rng(params.seed);
    std::array<double, kEngineHarmonics> phases{};
    for (auto& p : phases) p = kTwoPi * rng.next_unit();

    std::vector<double> acc(frames, 0.0);
    for (int k = 1; k <= kEngineHarmonics; ++k) {
        const double fk = k * f0;
        if (fk >= nyquist) break;
        const double amp = 1.0 / k;
        const double step = kTwoPi * fk / rate;
        const double phase = phases[static_cast<size_t>(k - 1)];
        for (size_t n = 0; n < frames; ++n) {
            acc[n] += amp * std::sin(step * static_cast<double>(n) + phase);
        }
    }

    double peak = 0.0;
    for (double v : acc) peak = std::max(peak, std::fabs(v));
    const double gain = peak > 0.0 ? db_to_linear(kEnginePeakDb) / peak : 0.0;

    std::vector<float> out(frames);
    for (size_t n = 0; n < frames; ++n) out[n] = static_cast<float>(acc[n] * gain);
    return out;
}

std::vector<float> road_stream_frames(size_t frames, int rate, double cutoff_hz, uint64_t seed) {
    // Bilinear one-pole lowpass: -3 dB at cutoff, -6 dB/octave beyond.
    const double k = std::tan(std::numbers::pi * cutoff_hz / rate);
    const double b = k / (1.0 + k);
    const double a1 = (k - 1.0) / (1.0 + k);

    Rng rng(seed);
    std::vector<double> y(frames);
    double x_prev = 0.0, y_prev = 0.0;
    for (size_t n = 0; n < frames; ++n) {
        const double x = rng.next_bipolar();
        y[n] = b * (x + x_prev) - a1 * y_prev;
        x_prev = x;
        y_prev = y[n];
    }

    double sum_sq = 0.0;
    for (double v : y) sum_sq += v * v;
    const double rms = std::sqrt(sum_sq / static_cast<double>(frames));
    const double gain = rms > 0.0 ? db_to_linear(kRoadRmsDb) / rms : 0.0;

    std::vector<float> out(frames);
    for (size_t n = 0; n < frames; ++n) out[n] = static_cast<float>(y[n] * gain);
    return out;
}

// Convolve a mono source with an HRIR pair and accumulate into the stereo
// mic signals, truncated to the accumulator length.
void spatialize_into(const std::vector<float>& source, const HrirPair& hrir,
                     std::vector<float>& left, std::vector<float>& right) {
    const auto l = convolve(source, hrir.left);
    const auto r = convolve(source, hrir.right);
    for (size_t i = 0; i < left.size() && i < l.size(); ++i) left[i] += l[i];
    for (size_t i = 0; i < right.size() && i < r.size(); ++i) right[i] += r[i];
}

double stereo_rms(const std::vector<float>& l, const std::vector<float>& r) {
    double sum = 0.0;
    for (float v : l) sum += static_cast<double>(v) * v;
    for (float v : r) sum += static_cast<double>(v) * v;
    return std::sqrt(sum / static_cast<double>(l.size() + r.size()));
}

} // namespace

void CarSceneParams::validate() const {
    if (speed_kmh < 10.0 || speed_kmh > 140.0) {
        throw std::invalid_argument("CarSceneParams: speed must be in [10, 140] km/h");
    }
    if (gear < 1 || gear > 6) {
        throw std::invalid_argument("CarSceneParams: gear must be 1-6");
    }
    if (head_azimuth_deg < -90.0 || head_azimuth_deg > 90.0) {
        throw std::invalid_argument("CarSceneParams: head azimuth must be in [-90, 90] degrees");
    }
}

std::string hrir_condition_name(HrirCondition c) {
    return c == HrirCondition::anechoic ? "anechoic" : "car";
}

std::vector<int> hrir_grid_tenths() {
    std::vector<int> grid;
    for (int t = -900; t <= 900; t += 25) grid.push_back(t);
    return grid;
}

std::string hrir_filename(HrirCondition condition, int azimuth_tenths) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s%04d.wav", azimuth_tenths < 0 ? "-" : "",
                  std::abs(azimuth_tenths));
    return hrir_condition_name(condition) + "_az" + buf;
}

void HrirSet::validate() const {
    if (sample_rate <= 0) {
        throw std::invalid_argument("HrirSet: sample rate must be positive");
    }
    const auto grid = hrir_grid_tenths();
    size_t ir_len = 0;
    for (int t : grid) {
        const auto it = entries.find(t);
        if (it == entries.end()) {
            throw std::invalid_argument("HrirSet: missing grid azimuth " + std::to_string(t / 10.0) +
                                        " degrees (" + hrir_condition_name(condition) + ")");
        }
        const auto& pair = it->second;
        if (pair.left.empty() || pair.left.size() != pair.right.size()) {
            throw std::invalid_argument("HrirSet: left/right IR lengths differ");
        }
        if (ir_len == 0) ir_len = pair.left.size();
        if (pair.left.size() != ir_len) {
            throw std::invalid_argument("HrirSet: all IRs must have the same length");
        }
    }
}

HrirSet load_hrir_set(const std::filesystem::path& dir, HrirCondition condition) {
    const std::string prefix = hrir_condition_name(condition) + "_az";
    HrirSet set;
    set.condition = condition;

    if (!std::filesystem::is_directory(dir)) {
        throw std::runtime_error("load_hrir_set: not a directory: " + dir.string());
    }
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        const std::string name = entry.path().filename().string();
        if (name.rfind(prefix, 0) != 0 || entry.path().extension() != ".wav") continue;
        const std::string num = name.substr(prefix.size(), name.size() - prefix.size() - 4);
        int tenths = 0;
        try {
            tenths = std::stoi(num);
        } catch (const std::exception&) {
            std::cerr << "load_hrir_set: ignoring unparseable file " << name << "\n";
            continue;
        }
        if (tenths < -900 || tenths > 900 || tenths % 25 != 0) {
            std::cerr << "load_hrir_set: ignoring off-grid azimuth " << (tenths / 10.0)
                      << " degrees (" << name << ")\n";
            continue;
        }
        AudioBuffer ir = read_wav(entry.path());
        if (ir.num_channels() != 2) {
            throw std::runtime_error("load_hrir_set: " + name + " must be stereo (left mic, right mic)");
        }
        if (set.sample_rate == 0) set.sample_rate = ir.sample_rate;
        if (ir.sample_rate != set.sample_rate) {
            throw std::runtime_error("load_hrir_set: mixed sample rates in " + dir.string());
        }
        set.entries[tenths] = HrirPair{std::move(ir.channels[0]), std::move(ir.channels[1])};
    }
    set.validate();
    return set;
}

double engine_fundamental(double speed_kmh, int gear) {
    if (gear < 1 || gear > 6) {
        throw std::invalid_argument("engine_fundamental: gear must be 1-6");
    }
    const double rpm = std::clamp(speed_kmh * kRpmPerKmh[gear - 1], 800.0, 5000.0);
    return rpm / 60.0 * 2.0;  // firing frequency of a 4-cylinder 4-stroke
}

AudioBuffer synth_engine_tone(const CarSceneParams& params, double duration_s, int sample_rate) {
    params.validate();
    return mono_buffer(engine_tone_frames(params, duration_to_frames(duration_s, sample_rate), sample_rate),
                       sample_rate);
}

std::pair<AudioBuffer, AudioBuffer> synth_road_noise(double duration_s, int sample_rate,
                                                     double cutoff_hz, uint64_t seed) {
    if (cutoff_hz <= 0.0 || cutoff_hz >= 0.5 * sample_rate) {
        throw std::invalid_argument("synth_road_noise: cutoff must be in (0, Nyquist)");
    }
    const size_t frames = duration_to_frames(duration_s, sample_rate);
    return {mono_buffer(road_stream_frames(frames, sample_rate, cutoff_hz, seed ^ 1ULL), sample_rate),
            mono_buffer(road_stream_frames(frames, sample_rate, cutoff_hz, seed ^ 2ULL), sample_rate)};
}

const HrirPair& nearest_hrir(const HrirSet& set, double azimuth_deg) {
    if (azimuth_deg < -90.0 || azimuth_deg > 90.0) {
        throw std::out_of_range("nearest_hrir: azimuth outside [-90, 90] degrees");
    }
    const double steps = std::fabs(azimuth_deg) / 2.5;
    long k = std::lround(steps);
    if (steps - std::floor(steps) == 0.5) k = static_cast<long>(std::floor(steps));  // ties toward 0
    const int tenths = static_cast<int>((azimuth_deg < 0.0 ? -k : k) * 25);
    const auto it = set.entries.find(tenths);
    if (it == set.entries.end()) {
        throw std::runtime_error("nearest_hrir: grid entry missing for " + std::to_string(tenths / 10.0));
    }
    return it->second;
}

RenderedScene render_scene_components(const AudioBuffer& music, const CarSceneParams& params,
                                      const HrirSet& anechoic, const HrirSet& car) {
    music.validate();
    params.validate();
    anechoic.validate();
    car.validate();
    if (music.num_channels() != 2) {
        throw std::invalid_argument("render_scene: music must be stereo");
    }
    if (music.sample_rate != anechoic.sample_rate || music.sample_rate != car.sample_rate) {
        throw std::invalid_argument("render_scene: music rate must match HRIR rate (resample first)");
    }
    if (music.duration_s() < 1.0) {
        throw std::invalid_argument("render_scene: music must be at least 1 s long");
    }

    const size_t frames = music.frames();
    const int rate = music.sample_rate;

    // Car noise, same duration as the music.
    const auto engine = engine_tone_frames(params, frames, rate);
    const auto road_left = road_stream_frames(frames, rate, kRoadNoiseCutoffHz, params.seed ^ 1ULL);
    const auto road_right = road_stream_frames(frames, rate, kRoadNoiseCutoffHz, params.seed ^ 2ULL);

    std::vector<float> noise_l(frames, 0.0f), noise_r(frames, 0.0f);
    spatialize_into(engine, nearest_hrir(anechoic, 0.0), noise_l, noise_r);
    spatialize_into(road_left, nearest_hrir(anechoic, -90.0), noise_l, noise_r);
    spatialize_into(road_right, nearest_hrir(anechoic, 90.0), noise_l, noise_r);

    // Stereo speakers sit at +-20 degrees around the head orientation.
    const double az_l = std::clamp(params.head_azimuth_deg - kSpeakerAzimuthDeg, -90.0, 90.0);
    const double az_r = std::clamp(params.head_azimuth_deg + kSpeakerAzimuthDeg, -90.0, 90.0);
    std::vector<float> music_l(frames, 0.0f), music_r(frames, 0.0f);
    spatialize_into(music.channels[0], nearest_hrir(car, az_l), music_l, music_r);
    spatialize_into(music.channels[1], nearest_hrir(car, az_r), music_l, music_r);

    const double music_rms = stereo_rms(music_l, music_r);
    const double noise_rms = stereo_rms(noise_l, noise_r);
    if (music_rms <= 0.0) {
        throw std::invalid_argument("render_scene: silent music, SNR undefined");
    }
    if (noise_rms <= 0.0) {
        throw std::runtime_error("render_scene: noise path is silent (all-zero HRIRs?)");
    }
    const double noise_gain = music_rms / (noise_rms * db_to_linear(params.snr_db));
    for (auto& v : noise_l) v = static_cast<float>(v * noise_gain);
    for (auto& v : noise_r) v = static_cast<float>(v * noise_gain);

    RenderedScene scene;
    scene.music_at_mics = stereo_buffer(std::move(music_l), std::move(music_r), rate);
    scene.noise_at_mics = stereo_buffer(std::move(noise_l), std::move(noise_r), rate);
    return scene;
}

AudioBuffer render_scene(const AudioBuffer& music, const CarSceneParams& params,
                         const HrirSet& anechoic, const HrirSet& car) {
    RenderedScene scene = render_scene_components(music, params, anechoic, car);
    AudioBuffer out = std::move(scene.music_at_mics);
    for (size_t c = 0; c < 2; ++c) {
        const auto& noise = scene.noise_at_mics.channels[c];
        auto& mix = out.channels[c];
        for (size_t i = 0; i < mix.size(); ++i) mix[i] += noise[i];
    }
    return out;
}

} // namespace cadenza
