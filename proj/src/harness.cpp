#include "cadenza/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "cadenza/dsp.hpp"
#include "cadenza/errors.hpp"
#include "cadenza/prescription.hpp"
#include "cadenza/rng.hpp"
#include "cadenza/wav.hpp"

namespace cadenza {

namespace {

constexpr double kTask1SegmentS = 30.0;

void sort_records(std::vector<ScoreRecord>& records) {
    std::sort(records.begin(), records.end(), [](const ScoreRecord& a, const ScoreRecord& b) {
        return std::tie(a.task, a.track_id, a.listener_id, a.facet) <
               std::tie(b.task, b.track_id, b.listener_id, b.facet);
    });
}

// Runs fn(0..count) on up to `jobs` worker threads. Exceptions are
// captured and the first one rethrown after all workers finish.
void parallel_for(size_t count, int jobs, const std::function<void(size_t)>& fn) {
    const int workers = std::max(1, std::min<int>(jobs, static_cast<int>(count)));
    if (workers == 1) {
        for (size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&]() {
            for (;;) {
                const size_t i = next.fetch_add(1);
                if (i >= count) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

uint64_t unit_seed(uint64_t global_seed, const std::string& track_id, const std::string& listener_id) {
    uint64_t h = hash64(global_seed);
    h = hash64(track_id, h);
    h = hash64(listener_id, h);
    return h;
}

StemSet load_stems(const Manifest& manifest, const TrackEntry& track) {
    if (!track.stem_paths) {
        throw ValidationError("track '" + track.id + "' has no stem paths");
    }
    StemSet set;
    const std::array<const std::string*, 4> paths = {
        &track.stem_paths->vocals, &track.stem_paths->drums,
        &track.stem_paths->bass, &track.stem_paths->other};
    for (size_t s = 0; s < 4; ++s) {
        set.stems[s] = read_wav(resolve_path(*paths[s], manifest.base_dir));
    }
    set.validate();
    return set;
}

std::string format_stat(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

double round4(double v) { return std::round(v * 10000.0) / 10000.0; }

} // namespace

std::filesystem::path resolve_path(const std::string& path, const std::filesystem::path& base_dir) {
    const std::filesystem::path p(path);
    if (p.is_absolute()) return p;
    if (const char* root = std::getenv("CADENZA_DATA_ROOT"); root != nullptr && root[0] != '\0') {
        return std::filesystem::path(root) / p;
    }
    return base_dir / p;
}

Manifest validate_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ValidationError("cannot open manifest " + path.string());
    }
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError("malformed manifest " + path.string() + ": " + e.what());
    }
    if (!doc.is_object()) {
        throw ValidationError("manifest must be a JSON object");
    }

    Manifest m;
    m.base_dir = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
    m.listeners_path = doc.value("listeners_path", std::string());
    m.expect_challenge_counts = doc.value("expect_challenge_counts", false);

    if (!doc.contains("tracks") || !doc["tracks"].is_array()) {
        throw ValidationError("manifest: 'tracks' array required");
    }
    std::set<std::string> track_ids;
    for (const auto& t : doc["tracks"]) {
        TrackEntry e;
        if (!t.contains("id") || !t.contains("path")) {
            throw ValidationError("manifest: every track needs 'id' and 'path'");
        }
        e.id = t["id"].get<std::string>();
        e.path = t["path"].get<std::string>();
        e.split = t.value("split", std::string("eval"));
        e.genre = t.value("genre", std::string("unknown"));
        e.explicit_lyrics = t.value("explicit_lyrics", false);
        if (e.split != "train" && e.split != "dev" && e.split != "eval") {
            throw ValidationError("manifest: track '" + e.id + "' has invalid split '" + e.split + "'");
        }
        if (t.contains("stem_paths")) {
            const auto& sp = t["stem_paths"];
            for (const char* stem : kStemNames) {
                if (!sp.contains(stem)) {
                    throw ValidationError("manifest: track '" + e.id + "' stem_paths missing '" +
                                          stem + "'");
                }
            }
            e.stem_paths = StemPaths{sp["vocals"].get<std::string>(), sp["drums"].get<std::string>(),
                                     sp["bass"].get<std::string>(), sp["other"].get<std::string>()};
        }
        if (!track_ids.insert(e.id).second) {
            throw ValidationError("manifest: duplicate track id '" + e.id + "'");
        }
        m.tracks.push_back(std::move(e));
    }

    std::map<std::string, Listener> listeners;
    if (!m.listeners_path.empty()) {
        listeners = load_listeners(resolve_path(m.listeners_path, m.base_dir));
    }

    if (doc.contains("scenes")) {
        if (!doc["scenes"].is_array()) {
            throw ValidationError("manifest: 'scenes' must be an array");
        }
        for (const auto& s : doc["scenes"]) {
            SceneEntry e;
            if (!s.contains("track_id") || !s.contains("listener_id")) {
                throw ValidationError("manifest: every scene needs 'track_id' and 'listener_id'");
            }
            e.track_id = s["track_id"].get<std::string>();
            e.listener_id = s["listener_id"].get<std::string>();
            e.speed_kmh = s.value("speed_kmh", 100.0);
            e.gear = s.value("gear", 4);
            e.snr_db = s.value("snr_db", 0.0);
            e.head_azimuth_deg = s.value("head_azimuth_deg", 0.0);
            if (s.contains("seed")) e.seed = s["seed"].get<uint64_t>();
            if (!track_ids.count(e.track_id)) {
                throw ValidationError("manifest: scene references unknown track '" + e.track_id + "'");
            }
            if (!m.listeners_path.empty() && !listeners.count(e.listener_id)) {
                throw ValidationError("manifest: scene references unknown listener '" +
                                      e.listener_id + "'");
            }
            CarSceneParams params;
            params.speed_kmh = e.speed_kmh;
            params.gear = e.gear;
            params.head_azimuth_deg = e.head_azimuth_deg;
            try {
                params.validate();
            } catch (const std::exception& ex) {
                throw ValidationError("manifest: scene for track '" + e.track_id + "': " + ex.what());
            }
            m.scenes.push_back(std::move(e));
        }
    }

    if (m.expect_challenge_counts) {
        size_t train = 0, dev = 0, eval = 0;
        for (const auto& t : m.tracks) {
            if (!t.stem_paths) continue;
            if (t.split == "train") ++train;
            if (t.split == "dev") ++dev;
            if (t.split == "eval") ++eval;
        }
        if (train + dev + eval > 0 && (train != 86 || dev != 14 || eval != 50)) {
            m.warnings.push_back("Task-1 splits are " + std::to_string(train) + "/" +
                                 std::to_string(dev) + "/" + std::to_string(eval) +
                                 ", expected 86/14/50");
        }
        if (!m.scenes.empty()) {
            std::set<std::string> scene_tracks;
            for (const auto& s : m.scenes) scene_tracks.insert(s.track_id);
            std::map<std::string, size_t> per_genre;
            size_t eval_tracks = 0;
            for (const auto& t : m.tracks) {
                if (t.split == "eval" && scene_tracks.count(t.id)) {
                    ++eval_tracks;
                    ++per_genre[t.genre];
                }
            }
            bool balanced = true;
            for (const auto& [genre, n] : per_genre) {
                if (n != 10) balanced = false;
            }
            if (eval_tracks != 70 || !balanced) {
                m.warnings.push_back("Task-2 eval set has " + std::to_string(eval_tracks) +
                                     " tracks, expected 70 (10 samples per genre)");
            }
        }
    }
    return m;
}

RunResult run_task1(const Manifest& manifest, const std::map<std::string, Listener>& listeners,
                    SeparationBackend& backend, const RunConfig& cfg) {
    if (listeners.empty()) {
        throw ValidationError("run_task1: no listeners");
    }

    struct TrackJob {
        const TrackEntry* track = nullptr;
        StemSet truth_segment;
        StemSet estimated_segment;
        bool ok = false;
    };

    // Demix once per track: the segment and separation are shared across
    // listeners. Sequential keeps any backend concurrency limit trivially
    // satisfied.
    std::vector<TrackJob> jobs;
    for (const auto& track : manifest.tracks) {
        if (track.split != "eval") continue;
        if (!track.stem_paths) {
            throw ValidationError("run_task1: eval track '" + track.id + "' is missing stems");
        }
        TrackJob job;
        job.track = &track;
        const AudioBuffer mixture = read_wav(resolve_path(track.path, manifest.base_dir));
        const StemSet truth = load_stems(manifest, track);
        const uint64_t seg_seed = unit_seed(cfg.seed, track.id, "");
        const AudioBuffer mix_segment = select_segment(mixture, kTask1SegmentS, seg_seed);
        for (size_t s = 0; s < 4; ++s) {
            job.truth_segment.stems[s] = select_segment(truth.stems[s], kTask1SegmentS, seg_seed);
        }
        try {
            job.estimated_segment = backend.separate(mix_segment, &job.truth_segment);
            job.ok = true;
        } catch (const std::exception& e) {
            std::cerr << "run_task1: backend '" << backend.name() << "' failed on track '"
                      << track.id << "': " << e.what() << " (skipping)\n";
        }
        jobs.push_back(std::move(job));
    }

    RunResult result;
    result.system = backend.name();

    struct Unit {
        const TrackJob* job;
        const Listener* listener;
    };
    std::vector<Unit> units;
    for (const auto& job : jobs) {
        for (const auto& [id, listener] : listeners) {
            units.push_back(Unit{&job, &listener});
        }
    }
    result.units_attempted = units.size();

    std::vector<std::vector<ScoreRecord>> unit_records(units.size());
    std::vector<uint8_t> unit_ok(units.size(), 0);
    std::mutex log_mutex;
    parallel_for(units.size(), cfg.jobs, [&](size_t i) {
        const Unit& unit = units[i];
        if (!unit.job->ok) return;
        try {
            const auto scores = score_stems(unit.job->estimated_segment, unit.job->truth_segment,
                                            *unit.listener, cfg.metric);
            for (size_t s = 0; s < 4; ++s) {
                for (int ear = 0; ear < 2; ++ear) {
                    ScoreRecord rec;
                    rec.task = 1;
                    rec.track_id = unit.job->track->id;
                    rec.listener_id = unit.listener->id;
                    rec.facet = std::string(kStemNames[s]) + (ear == 0 ? "_left" : "_right");
                    rec.score = scores[2 * s + static_cast<size_t>(ear)];
                    unit_records[i].push_back(std::move(rec));
                }
            }
            unit_ok[i] = 1;
        } catch (const std::exception& e) {
            std::lock_guard<std::mutex> lock(log_mutex);
            std::cerr << "run_task1: scoring failed for track '" << unit.job->track->id
                      << "', listener '" << unit.listener->id << "': " << e.what()
                      << " (skipping)\n";
        }
    });

    for (size_t i = 0; i < units.size(); ++i) {
        if (unit_ok[i]) {
            result.records.insert(result.records.end(), unit_records[i].begin(), unit_records[i].end());
        } else {
            ++result.units_skipped;
        }
    }
    sort_records(result.records);
    return result;
}

RunResult run_task2(const Manifest& manifest, const std::map<std::string, Listener>& listeners,
                    const HrirSet& anechoic, const HrirSet& car, const Enhancer& enhancer,
                    const RunConfig& cfg) {
    if (manifest.scenes.empty()) {
        throw ValidationError("run_task2: manifest has no scenes");
    }

    std::map<std::string, const TrackEntry*> tracks_by_id;
    for (const auto& t : manifest.tracks) tracks_by_id[t.id] = &t;

    // Tracks are shared between scenes; load and resample them once.
    std::map<std::string, AudioBuffer> track_audio;
    for (const auto& scene : manifest.scenes) {
        if (track_audio.count(scene.track_id)) continue;
        const auto it = tracks_by_id.find(scene.track_id);
        if (it == tracks_by_id.end()) {
            throw ValidationError("run_task2: scene references unknown track '" + scene.track_id + "'");
        }
        AudioBuffer mixture = read_wav(resolve_path(it->second->path, manifest.base_dir));
        track_audio.emplace(scene.track_id, resample(mixture, anechoic.sample_rate));
    }

    RunResult result;
    result.system = "baseline";
    result.units_attempted = manifest.scenes.size();
    std::vector<ScoreRecord> records(manifest.scenes.size());

    parallel_for(manifest.scenes.size(), cfg.jobs, [&](size_t i) {
        const SceneEntry& scene = manifest.scenes[i];
        const auto listener_it = listeners.find(scene.listener_id);
        if (listener_it == listeners.end()) {
            throw ValidationError("run_task2: unknown listener '" + scene.listener_id + "'");
        }
        const Listener& listener = listener_it->second;
        const AudioBuffer& clean = track_audio.at(scene.track_id);

        CarSceneParams params;
        params.speed_kmh = scene.speed_kmh;
        params.gear = scene.gear;
        params.snr_db = scene.snr_db;
        params.head_azimuth_deg = scene.head_azimuth_deg;
        params.seed = scene.seed ? *scene.seed
                                 : unit_seed(cfg.seed, scene.track_id, scene.listener_id);

        const AudioBuffer enhanced = enhancer(clean, listener);
        const AudioBuffer rendered = render_scene(enhanced, params, anechoic, car);
        const AudioBuffer processed = apply_prescription(rendered, listener);
        const auto [left, right] = score_stereo(processed, clean, listener, cfg.metric);

        ScoreRecord rec;
        rec.task = 2;
        rec.track_id = scene.track_id;
        rec.listener_id = scene.listener_id;
        rec.facet = tracks_by_id.at(scene.track_id)->genre;
        rec.score = 0.5 * (left + right);
        records[i] = std::move(rec);
    });

    result.records = std::move(records);
    sort_records(result.records);
    return result;
}

ReportTable aggregate(const std::vector<ScoreRecord>& records, GroupBy group_by,
                      const std::string& system) {
    if (records.empty()) {
        throw std::invalid_argument("aggregate: no records");
    }
    std::map<std::string, std::vector<double>> groups;
    for (const auto& r : records) {
        const std::string key = group_by == GroupBy::all ? "all" : r.facet;
        groups[key].push_back(r.score);
    }

    ReportTable table;
    for (const auto& [group, values] : groups) {
        double mean = 0.0;
        for (double v : values) mean += v;
        mean /= static_cast<double>(values.size());
        double var = 0.0;
        for (double v : values) var += (v - mean) * (v - mean);
        var /= static_cast<double>(values.size());  // population variance
        table.rows.push_back(ReportRow{system, group, mean, std::sqrt(var), values.size()});
    }
    return table;
}

void write_report(const ReportTable& table, std::ostream& out, ReportFormat format) {
    if (table.rows.empty()) {
        throw std::invalid_argument("write_report: empty table");
    }
    if (format == ReportFormat::csv) {
        out << "system,group,mean,std,count\n";
        for (const auto& row : table.rows) {
            out << row.system << ',' << row.group << ',' << format_stat(row.mean) << ','
                << format_stat(row.std_dev) << ',' << row.count << '\n';
        }
    } else {
        nlohmann::json doc = nlohmann::json::array();
        for (const auto& row : table.rows) {
            doc.push_back({{"system", row.system},
                           {"group", row.group},
                           {"mean", round4(row.mean)},
                           {"std", round4(row.std_dev)},
                           {"count", row.count}});
        }
        out << doc.dump(2) << '\n';
    }
}

void write_report(const ReportTable& table, const std::filesystem::path& path, ReportFormat format) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw std::runtime_error("write_report: cannot open " + path.string());
    }
    write_report(table, out, format);
    if (!out) {
        throw std::runtime_error("write_report: write failed for " + path.string());
    }
}

void write_records(const std::vector<ScoreRecord>& records, const std::string& system,
                   const std::filesystem::path& path) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& r : records) {
        arr.push_back({{"task", r.task},
                       {"track_id", r.track_id},
                       {"listener_id", r.listener_id},
                       {"facet", r.facet},
                       {"score", r.score}});
    }
    nlohmann::json doc{{"system", system}, {"records", std::move(arr)}};
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw std::runtime_error("write_records: cannot open " + path.string());
    }
    out << doc.dump(2) << '\n';
}

RecordsFile read_records(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ValidationError("read_records: cannot open " + path.string());
    }
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError("read_records: malformed JSON: " + std::string(e.what()));
    }
    if (!doc.is_object() || !doc.contains("records") || !doc["records"].is_array()) {
        throw ValidationError("read_records: expected an object with a 'records' array");
    }
    RecordsFile file;
    file.system = doc.value("system", std::string("unknown"));
    for (const auto& r : doc["records"]) {
        ScoreRecord rec;
        rec.task = r.at("task").get<int>();
        rec.track_id = r.at("track_id").get<std::string>();
        rec.listener_id = r.at("listener_id").get<std::string>();
        rec.facet = r.at("facet").get<std::string>();
        rec.score = r.at("score").get<double>();
        file.records.push_back(std::move(rec));
    }
    return file;
}

} // namespace cadenza
