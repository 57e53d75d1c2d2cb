#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cadenza/errors.hpp"
#include "cadenza/harness.hpp"
#include "cadenza/wav.hpp"
#include "testutil.hpp"

using namespace cadenza;
using namespace testutil;

namespace {

// Test-sized metric: 16 kHz internal rate, fewer bands. The pipeline is
// identical, just cheaper.
MetricConfig small_metric() {
    MetricConfig cfg;
    cfg.internal_rate = 16000;
    cfg.n_bands = 16;
    cfg.band_hi_hz = 7000.0;
    return cfg;
}

void write_text(const std::filesystem::path& path, const std::string& body) {
    std::ofstream out(path);
    out << body;
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

const char* kListenersBody = R"({
  "L1": {"audiogram_cfs": [250,500,1000,2000,3000,4000,6000,8000],
         "audiogram_levels_l": [20,25,30,35,40,40,45,50],
         "audiogram_levels_r": [25,30,35,40,45,45,50,55]},
  "L2": {"audiogram_cfs": [250,500,1000,2000,3000,4000,6000,8000],
         "audiogram_levels_l": [40,45,50,55,55,60,60,65],
         "audiogram_levels_r": [40,45,50,55,55,60,60,65]}
})";

// Writes a complete Task-1 workspace: listener file, per-track stems and
// mixtures, and the manifest itself. Tracks run `seconds` long at `rate`.
std::filesystem::path write_task1_workspace(const TempDir& dir, int n_tracks, double seconds,
                                            int rate) {
    write_text(dir.path() / "listeners.json", kListenersBody);

    nlohmann::json manifest;
    manifest["listeners_path"] = "listeners.json";
    manifest["tracks"] = nlohmann::json::array();
    const size_t frames = static_cast<size_t>(seconds * rate);
    for (int t = 0; t < n_tracks; ++t) {
        const std::string id = "track" + std::to_string(t);
        const StemSet stems = make_stems(frames, rate, 1000 + static_cast<uint64_t>(t));
        nlohmann::json sp;
        for (size_t s = 0; s < 4; ++s) {
            const std::string name = id + "_" + kStemNames[s] + ".wav";
            write_wav(stems.stems[s], dir.path() / name, WavEncoding::float32);
            sp[kStemNames[s]] = name;
        }
        const std::string mix_name = id + "_mix.wav";
        write_wav(stems.sum(), dir.path() / mix_name, WavEncoding::float32);
        manifest["tracks"].push_back({{"id", id},
                                      {"split", "eval"},
                                      {"genre", t % 2 == 0 ? "rock" : "pop"},
                                      {"path", mix_name},
                                      {"stem_paths", sp}});
    }
    const auto path = dir.path() / "manifest.json";
    write_text(path, manifest.dump(2));
    return path;
}

// Task-2 workspace: tracks without stems, scenes, and an HRIR directory.
std::filesystem::path write_task2_workspace(const TempDir& dir, int n_scenes, double seconds,
                                            int rate) {
    write_text(dir.path() / "listeners.json", kListenersBody);

    const auto hrir_dir = dir.path() / "hrirs";
    std::filesystem::create_directories(hrir_dir);
    Rng rng(7);
    for (const char* cond : {"anechoic", "car"}) {
        const HrirCondition c = cond[0] == 'a' ? HrirCondition::anechoic : HrirCondition::car;
        for (int t : hrir_grid_tenths()) {
            std::vector<float> l(16), r(16);
            for (size_t i = 0; i < 16; ++i) {
                l[i] = static_cast<float>(0.3 * rng.next_bipolar());
                r[i] = static_cast<float>(0.3 * rng.next_bipolar());
            }
            l[0] = 0.8f;
            r[0] = 0.8f;
            write_wav(stereo_buffer(l, r, rate), hrir_dir / hrir_filename(c, t));
        }
    }

    nlohmann::json manifest;
    manifest["listeners_path"] = "listeners.json";
    manifest["tracks"] = nlohmann::json::array();
    manifest["scenes"] = nlohmann::json::array();
    const size_t frames = static_cast<size_t>(seconds * rate);
    for (int i = 0; i < n_scenes; ++i) {
        const std::string id = "song" + std::to_string(i);
        AudioBuffer track = stereo_buffer(sine(300.0 + 50.0 * i, rate, seconds, 0.2),
                                          noise(frames, 500 + static_cast<uint64_t>(i), 0.2), rate);
        const std::string name = id + ".wav";
        write_wav(track, dir.path() / name, WavEncoding::float32);
        manifest["tracks"].push_back({{"id", id},
                                      {"split", "eval"},
                                      {"genre", i % 2 == 0 ? "classical" : "rock"},
                                      {"path", name}});
        manifest["scenes"].push_back({{"track_id", id},
                                      {"listener_id", i % 2 == 0 ? "L1" : "L2"},
                                      {"speed_kmh", 60.0 + 10.0 * i},
                                      {"gear", 3 + (i % 3)},
                                      {"snr_db", 5.0 + i},
                                      {"seed", 9000 + i}});
    }
    const auto path = dir.path() / "manifest.json";
    write_text(path, manifest.dump(2));
    return path;
}

class FlakyBackend final : public SeparationBackend {
public:
    StemSet separate(const AudioBuffer& mixture, const StemSet* truth) override {
        if (calls_++ == 0) {
            throw std::runtime_error("synthetic decode failure");
        }
        return oracle.separate(mixture, truth);
    }
    std::string name() const override { return "flaky"; }

private:
    OracleBackend oracle;
    int calls_ = 0;
};

} // namespace

TEST_CASE("validate_manifest: minimal manifest with one scene") {
    TempDir dir("mf_min");
    write_task2_workspace(dir, 1, 2.0, 16000);
    const Manifest m = validate_manifest(dir.path() / "manifest.json");
    CHECK(m.tracks.size() == 1);
    CHECK(m.scenes.size() == 1);
    CHECK(m.warnings.empty());
}

TEST_CASE("validate_manifest: scene referencing an unknown listener fails") {
    TempDir dir("mf_badl");
    write_text(dir.path() / "listeners.json", kListenersBody);
    nlohmann::json manifest;
    manifest["listeners_path"] = "listeners.json";
    manifest["tracks"] = {{{"id", "t1"}, {"path", "t1.wav"}, {"split", "eval"}}};
    manifest["scenes"] = {{{"track_id", "t1"}, {"listener_id", "NOPE"}}};
    write_text(dir.path() / "manifest.json", manifest.dump());
    CHECK_THROWS_AS(validate_manifest(dir.path() / "manifest.json"), ValidationError);
}

TEST_CASE("validate_manifest: duplicate track ids fail") {
    TempDir dir("mf_dup");
    nlohmann::json manifest;
    manifest["tracks"] = {{{"id", "t1"}, {"path", "a.wav"}}, {{"id", "t1"}, {"path", "b.wav"}}};
    write_text(dir.path() / "manifest.json", manifest.dump());
    CHECK_THROWS_AS(validate_manifest(dir.path() / "manifest.json"), ValidationError);
}

TEST_CASE("validate_manifest: incomplete stem set fails") {
    TempDir dir("mf_stem");
    nlohmann::json manifest;
    manifest["tracks"] = {{{"id", "t1"},
                           {"path", "a.wav"},
                           {"stem_paths", {{"vocals", "v.wav"}, {"drums", "d.wav"}}}}};
    write_text(dir.path() / "manifest.json", manifest.dump());
    CHECK_THROWS_AS(validate_manifest(dir.path() / "manifest.json"), ValidationError);
}

TEST_CASE("validate_manifest: challenge-count mismatch warns, citing 10 per genre") {
    TempDir dir("mf_counts");
    write_text(dir.path() / "listeners.json", kListenersBody);
    nlohmann::json manifest;
    manifest["listeners_path"] = "listeners.json";
    manifest["expect_challenge_counts"] = true;
    manifest["tracks"] = nlohmann::json::array();
    manifest["scenes"] = nlohmann::json::array();
    for (int i = 0; i < 69; ++i) {  // one short of the expected 70
        const std::string id = "e" + std::to_string(i);
        manifest["tracks"].push_back(
            {{"id", id}, {"path", id + ".wav"}, {"split", "eval"}, {"genre", "g" + std::to_string(i % 7)}});
        manifest["scenes"].push_back({{"track_id", id}, {"listener_id", "L1"}});
    }
    write_text(dir.path() / "manifest.json", manifest.dump());
    const Manifest m = validate_manifest(dir.path() / "manifest.json");
    REQUIRE(m.warnings.size() >= 1);
    bool found = false;
    for (const auto& w : m.warnings) {
        if (w.find("10 samples per genre") != std::string::npos) found = true;
    }
    CHECK(found);
}

TEST_CASE("resolve_path: CADENZA_DATA_ROOT prefixes relative paths") {
    ::setenv("CADENZA_DATA_ROOT", "/data/root", 1);
    CHECK(resolve_path("x/y.wav", "/base") == std::filesystem::path("/data/root/x/y.wav"));
    CHECK(resolve_path("/abs/y.wav", "/base") == std::filesystem::path("/abs/y.wav"));
    ::unsetenv("CADENZA_DATA_ROOT");
    CHECK(resolve_path("x/y.wav", "/base") == std::filesystem::path("/base/x/y.wav"));
}

TEST_CASE("run_task1: oracle backend emits 8 records per (track, listener) at the ceiling") {
    TempDir dir("t1_oracle");
    const auto manifest_path = write_task1_workspace(dir, 2, 31.0, 16000);
    const Manifest manifest = validate_manifest(manifest_path);
    const auto listeners = load_listeners(dir.path() / "listeners.json");

    RunConfig cfg;
    cfg.jobs = 2;
    cfg.metric = small_metric();
    OracleBackend backend;
    const RunResult result = run_task1(manifest, listeners, backend, cfg);

    CHECK(result.system == "oracle");
    CHECK(result.records.size() == 8u * 2u * 2u);  // 8 * tracks * listeners
    CHECK(result.units_attempted == 4);
    CHECK(result.units_skipped == 0);
    for (const auto& rec : result.records) {
        CHECK(rec.task == 1);
        CHECK(rec.score >= 0.98);
    }
}

TEST_CASE("run_task1: null backend zeroes the six silent stems") {
    TempDir dir("t1_null");
    const auto manifest_path = write_task1_workspace(dir, 1, 31.0, 16000);
    const Manifest manifest = validate_manifest(manifest_path);
    auto listeners = load_listeners(dir.path() / "listeners.json");
    listeners.erase("L2");

    RunConfig cfg;
    cfg.jobs = 2;
    cfg.metric = small_metric();
    NullBackend backend;
    const RunResult result = run_task1(manifest, listeners, backend, cfg);

    REQUIRE(result.records.size() == 8);
    int zeros = 0;
    for (const auto& rec : result.records) {
        if (rec.score == 0.0) ++zeros;
        if (rec.facet.rfind("other", 0) == 0) CHECK(rec.score > 0.0);
    }
    CHECK(zeros == 6);
}

TEST_CASE("run_task1: backend failure skips that track's units and keeps going") {
    TempDir dir("t1_flaky");
    const auto manifest_path = write_task1_workspace(dir, 2, 31.0, 16000);
    const Manifest manifest = validate_manifest(manifest_path);
    auto listeners = load_listeners(dir.path() / "listeners.json");
    listeners.erase("L2");

    RunConfig cfg;
    cfg.jobs = 2;
    cfg.metric = small_metric();
    FlakyBackend backend;
    const RunResult result = run_task1(manifest, listeners, backend, cfg);

    CHECK(result.units_attempted == 2);
    CHECK(result.units_skipped == 1);
    CHECK(result.records.size() == 8);  // only the surviving track
    CHECK(result.units_attempted ==
          result.records.size() / 8 + result.units_skipped);
}

TEST_CASE("run_task1: missing stems are a hard error") {
    TempDir dir("t1_nostem");
    write_text(dir.path() / "listeners.json", kListenersBody);
    nlohmann::json manifest;
    manifest["listeners_path"] = "listeners.json";
    manifest["tracks"] = {{{"id", "t"}, {"path", "t.wav"}, {"split", "eval"}}};
    write_text(dir.path() / "manifest.json", manifest.dump());
    const Manifest m = validate_manifest(dir.path() / "manifest.json");
    const auto listeners = load_listeners(dir.path() / "listeners.json");
    OracleBackend backend;
    RunConfig cfg;
    cfg.metric = small_metric();
    CHECK_THROWS_AS(run_task1(m, listeners, backend, cfg), ValidationError);
}

TEST_CASE("run_task2: one record per scene, deterministic across runs") {
    TempDir dir("t2_run");
    const auto manifest_path = write_task2_workspace(dir, 2, 4.0, 16000);
    const Manifest manifest = validate_manifest(manifest_path);
    const auto listeners = load_listeners(dir.path() / "listeners.json");
    const HrirSet anechoic = load_hrir_set(dir.path() / "hrirs", HrirCondition::anechoic);
    const HrirSet car = load_hrir_set(dir.path() / "hrirs", HrirCondition::car);

    RunConfig cfg;
    cfg.jobs = 2;
    cfg.metric = small_metric();
    const Enhancer baseline = [](const AudioBuffer& mix, const Listener& l) {
        return apply_task2_baseline(mix, l);
    };
    const RunResult r1 = run_task2(manifest, listeners, anechoic, car, baseline, cfg);
    const RunResult r2 = run_task2(manifest, listeners, anechoic, car, baseline, cfg);

    CHECK(r1.records.size() == 2);
    CHECK(r1.records[0].task == 2);
    CHECK(r1.records[0].facet == "classical");  // genre facet
    REQUIRE(r1.records.size() == r2.records.size());
    for (size_t i = 0; i < r1.records.size(); ++i) {
        CHECK(r1.records[i].score == r2.records[i].score);
    }

    SUBCASE("records round-trip through files byte-identically") {
        write_records(r1.records, r1.system, dir.path() / "rec1.json");
        write_records(r2.records, r2.system, dir.path() / "rec2.json");
        CHECK(read_text(dir.path() / "rec1.json") == read_text(dir.path() / "rec2.json"));
        const RecordsFile back = read_records(dir.path() / "rec1.json");
        CHECK(back.system == "baseline");
        REQUIRE(back.records.size() == r1.records.size());
        CHECK(back.records[0].score == r1.records[0].score);
        CHECK(back.records[0].facet == r1.records[0].facet);
    }
}

TEST_CASE("aggregate: hand-computed mean and population std") {
    std::vector<ScoreRecord> records;
    records.push_back({1, "t", "l", "g", 0.2});
    records.push_back({1, "t2", "l", "g", 0.3});
    const ReportTable table = aggregate(records, GroupBy::all, "sys");
    REQUIRE(table.rows.size() == 1);
    CHECK(table.rows[0].mean == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(table.rows[0].std_dev == doctest::Approx(0.05).epsilon(1e-12));
    CHECK(table.rows[0].count == 2);
}

TEST_CASE("aggregate: a single record has zero std") {
    std::vector<ScoreRecord> records{{2, "t", "l", "rock", 0.4}};
    const ReportTable table = aggregate(records, GroupBy::genre, "sys");
    REQUIRE(table.rows.size() == 1);
    CHECK(table.rows[0].std_dev == 0.0);
    CHECK(table.rows[0].count == 1);
}

TEST_CASE("aggregate: matches a brute-force two-pass oracle and sorts groups") {
    Rng rng(404);
    std::vector<ScoreRecord> records;
    const std::vector<std::string> facets = {"bass_left", "vocals_left", "drums_right", "other_left"};
    for (int i = 0; i < 200; ++i) {
        ScoreRecord r;
        r.task = 1;
        r.track_id = "t" + std::to_string(i % 7);
        r.listener_id = "l";
        r.facet = facets[rng.next_below(3)];
        r.score = rng.next_unit();
        records.push_back(std::move(r));
    }
    const ReportTable table = aggregate(records, GroupBy::stem_ear, "sys");

    // oracle: independent two-pass per group
    std::map<std::string, std::vector<double>> groups;
    for (const auto& r : records) groups[r.facet].push_back(r.score);
    REQUIRE(table.rows.size() == groups.size());
    size_t idx = 0;
    std::string prev_group;
    for (const auto& [facet, values] : groups) {
        const auto& row = table.rows[idx++];
        CHECK(row.group == facet);  // std::map iteration == lexicographic
        CHECK(row.group > prev_group);
        prev_group = row.group;
        double mean = 0.0;
        for (double v : values) mean += v;
        mean /= static_cast<double>(values.size());
        double var = 0.0;
        for (double v : values) var += (v - mean) * (v - mean);
        var /= static_cast<double>(values.size());
        CHECK(std::fabs(row.mean - mean) <= 1e-12);
        CHECK(std::fabs(row.std_dev - std::sqrt(var)) <= 1e-12);
    }
}

TEST_CASE("aggregate: empty record list is rejected") {
    CHECK_THROWS(aggregate({}, GroupBy::all, "sys"));
}

TEST_CASE("write_report: 4-decimal fixed-point statistics") {
    ReportTable table;
    table.rows.push_back({"demucs", "all", 0.254823, 0.040300, 400});
    std::ostringstream csv;
    write_report(table, csv, ReportFormat::csv);
    CHECK(csv.str() == "system,group,mean,std,count\ndemucs,all,0.2548,0.0403,400\n");

    std::ostringstream json_out;
    write_report(table, json_out, ReportFormat::json);
    const auto doc = nlohmann::json::parse(json_out.str());
    CHECK(doc[0]["mean"].get<double>() == doctest::Approx(0.2548).epsilon(1e-12));
    CHECK(doc[0]["std"].get<double>() == doctest::Approx(0.0403).epsilon(1e-12));
    CHECK(doc[0]["count"].get<int>() == 400);
}

TEST_CASE("write_report: empty table is rejected") {
    std::ostringstream out;
    CHECK_THROWS(write_report(ReportTable{}, out, ReportFormat::csv));
}
