#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cadenza/car_scene.hpp"
#include "cadenza/enhancement.hpp"
#include "cadenza/listener.hpp"
#include "cadenza/quality_metric.hpp"

namespace cadenza {

struct StemPaths {
    std::string vocals, drums, bass, other;
};

struct TrackEntry {
    std::string id;
    std::string split;  // train | dev | eval
    std::string genre;
    std::string path;   // mixture WAV
    std::optional<StemPaths> stem_paths;
    bool explicit_lyrics = false;
};

struct SceneEntry {
    std::string track_id;
    std::string listener_id;
    double speed_kmh = 100.0;
    int gear = 4;
    double snr_db = 0.0;
    double head_azimuth_deg = 0.0;
    std::optional<uint64_t> seed;  // derived from the global seed when absent
};

struct Manifest {
    std::filesystem::path base_dir;  // directory of the manifest file
    std::string listeners_path;
    bool expect_challenge_counts = false;
    std::vector<TrackEntry> tracks;
    std::vector<SceneEntry> scenes;
    std::vector<std::string> warnings;  // advisory findings from validation
};

// Prefixes relative paths with $CADENZA_DATA_ROOT when set, otherwise
// with the manifest's directory.
std::filesystem::path resolve_path(const std::string& path, const std::filesystem::path& base_dir);

// Parses and validates a manifest: unique ids, resolvable scene
// references (listeners are loaded from listeners_path for the check),
// complete stem path sets. Challenge-count mismatches are warnings, not
// errors.
Manifest validate_manifest(const std::filesystem::path& path);

struct ScoreRecord {
    int task = 1;
    std::string track_id;
    std::string listener_id;
    std::string facet;  // Task 1: stem+ear, e.g. "vocals_left"; Task 2: genre
    double score = 0.0;
};

enum class GroupBy { all, stem_ear, genre };
enum class ReportFormat { csv, json };

struct ReportRow {
    std::string system;
    std::string group;
    double mean = 0.0;
    double std_dev = 0.0;
    size_t count = 0;
};

struct ReportTable {
    std::vector<ReportRow> rows;
};

struct RunConfig {
    uint64_t seed = 0;
    int jobs = 1;
    MetricConfig metric;
};

struct RunResult {
    std::string system;
    std::vector<ScoreRecord> records;  // sorted by (task, track, listener, facet)
    size_t units_attempted = 0;
    size_t units_skipped = 0;
};

// Task 1: per (eval track, listener), select the seeded 30 s segment,
// separate, and score the eight left/right VDBO signals against the true
// stems. Backend failures skip the affected units with a diagnostic on
// stderr; missing stems are a hard error.
RunResult run_task1(const Manifest& manifest, const std::map<std::string, Listener>& listeners,
                    SeparationBackend& backend, const RunConfig& cfg);

using Enhancer = std::function<AudioBuffer(const AudioBuffer&, const Listener&)>;

// Task 2: per scene, enhance (default: the level-constraint baseline),
// render the car scene, apply the fixed NAL-R hearing-aid processing, and
// score against the amplified clean track. One record per scene, tagged
// with the track's genre; the score is the mean of the two ears.
RunResult run_task2(const Manifest& manifest, const std::map<std::string, Listener>& listeners,
                    const HrirSet& anechoic, const HrirSet& car, const Enhancer& enhancer,
                    const RunConfig& cfg);

// Mean and population standard deviation per group, groups sorted
// lexicographically.
ReportTable aggregate(const std::vector<ScoreRecord>& records, GroupBy group_by,
                      const std::string& system);

// CSV header: system,group,mean,std,count with 4-decimal fixed-point
// statistics. JSON mirrors the fields (values rounded identically).
void write_report(const ReportTable& table, std::ostream& out, ReportFormat format);
void write_report(const ReportTable& table, const std::filesystem::path& path, ReportFormat format);

struct RecordsFile {
    std::string system;
    std::vector<ScoreRecord> records;
};

void write_records(const std::vector<ScoreRecord>& records, const std::string& system,
                   const std::filesystem::path& path);
RecordsFile read_records(const std::filesystem::path& path);

} // namespace cadenza
