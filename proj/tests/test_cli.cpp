#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "support/synth.hpp"
#include "voiceprobe/voiceprobe.hpp"

using namespace voiceprobe;
namespace fs = std::filesystem;

namespace {

const std::string kCli = VOICEPROBE_CLI_PATH;
const fs::path kScratch = VOICEPROBE_SCRATCH_DIR;

int run(const std::string& args, const std::string& tag) {
    const fs::path out = kScratch / (tag + ".out");
    const fs::path err = kScratch / (tag + ".err");
    const std::string cmd = kCli + " " + args + " >" + out.string() + " 2>" + err.string();
    const int status = std::system(cmd.c_str());
    if (WIFEXITED(status)) return WEXITSTATUS(status);
    return -1;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

bool same_bytes(const fs::path& a, const fs::path& b) { return slurp(a) == slurp(b); }

std::size_t count_occurrences(const std::string& haystack, const std::string& needle) {
    std::size_t count = 0;
    for (std::size_t pos = haystack.find(needle); pos != std::string::npos;
         pos = haystack.find(needle, pos + needle.size())) {
        ++count;
    }
    return count;
}

struct Cohort {
    std::vector<SpeakerRecord> records;
    std::vector<Embedding> embeddings;
};

// 150 synthetic speakers with gender-coded fxmedian/vtlen so pc1 carries a
// recoverable acoustic signal; embeddings are a fixed linear map + noise.
Cohort make_cohort() {
    Cohort cohort;
    Rng rng(99);
    Rng map_rng(98);
    std::vector<std::vector<double>> map(8, std::vector<double>(9));
    for (auto& row : map) {
        for (double& v : row) v = map_rng.normal();
    }
    for (int i = 0; i < 150; ++i) {
        SpeakerRecord rec;
        rec.speaker_id = "spk" + std::to_string(i);
        rec.gender = (i % 2 == 0) ? Gender::male : Gender::female;
        rec.age_years = 20.0 + 50.0 * rng.uniform01();
        const double g = (rec.gender == Gender::male) ? -1.0 : 1.0;
        AcousticProfile p;
        p.set(kFxMedian, 89.0 + 5.0 * g + 1.5 * rng.normal());
        p.set(kFxIqr, 1.5 + 0.5 * rng.uniform01());
        p.set(kPpq, 0.3 + 0.4 * rng.uniform01());
        p.set(kGne, 0.75 + 0.2 * rng.uniform01());
        p.set(kSlope, -7.0 + 2.0 * rng.normal());
        p.set(kVtlen, 15.5 - 1.3 * g + 0.4 * rng.normal());
        p.set(kLevel, -26.0 + 4.0 * rng.normal());
        p.set(kStoi, 0.8 + 0.15 * rng.uniform01());
        p.set(kPesq, 2.5 + 1.5 * rng.uniform01());
        rec.mean_profile = p;
        rec.profiles.resize(1);
        cohort.records.push_back(rec);

        Embedding e;
        e.owner_id = rec.speaker_id;
        std::vector<double> z(9);
        for (int d = 0; d < 9; ++d) z[static_cast<std::size_t>(d)] = *p.get(d);
        for (int j = 0; j < 8; ++j) {
            double acc = 0.1 * rng.normal() + 2.0 * g * (j % 2 ? 0.5 : -0.5);
            for (int d = 0; d < 9; ++d) acc += 0.05 * map[static_cast<std::size_t>(j)][static_cast<std::size_t>(d)] * z[static_cast<std::size_t>(d)];
            e.vector.push_back(acc);
        }
        cohort.embeddings.push_back(e);
    }
    return cohort;
}

void write_cohort_files() {
    static bool done = false;
    if (done) return;
    done = true;
    const Cohort cohort = make_cohort();
    write_speakers((kScratch / "speakers.csv").string(), cohort.records);
    save_embeddings_csv((kScratch / "embeddings.csv").string(), cohort.embeddings);

    std::vector<std::vector<std::string>> meta_rows;
    for (const auto& rec : cohort.records) {
        meta_rows.push_back({rec.speaker_id, gender_name(rec.gender),
                             csv::format_double(*rec.age_years)});
    }
    csv::write_file((kScratch / "metadata.csv").string(), {"speaker_id", "gender", "age"},
                    meta_rows);
}

void write_audio_files() {
    static bool done = false;
    if (done) return;
    done = true;
    const std::vector<double> formants = {500, 1500, 2500, 3500};
    const std::vector<double> bws = {60, 90, 120, 160};
    const double f0s[] = {110.0, 130.0, 180.0, 210.0, 240.0, 95.0};
    for (int i = 0; i < 6; ++i) {
        AudioClip clip = synth::vowel(f0s[i], 2.5, 16000, formants, bws, 0.003,
                                      500 + static_cast<std::uint64_t>(i));
        clip.source_id = "voice" + std::to_string(i);
        write_wav((kScratch / ("voice" + std::to_string(i) + ".wav")).string(), clip);
    }
    std::ofstream(kScratch / "broken.wav") << "this is not audio";
    csv::write_file((kScratch / "audio_metadata.csv").string(), {"speaker_id", "gender", "age"},
                    {{"voice0", "male", "40"},
                     {"voice1", "male", "52"},
                     {"voice2", "female", "33"},
                     {"voice3", "female", "44"},
                     {"voice4", "female", "28"},
                     {"voice5", "male", "61"}});
    csv::write_file((kScratch / "audio_sidecar.csv").string(), {"segment_id", "stoi", "pesq"},
                    {{"voice0#0", "0.93", "3.4"}, {"voice1#0", "0.88", "3.1"}});
}

}  // namespace

TEST_CASE("cli scratch directory is fresh") {
    fs::remove_all(kScratch);
    fs::create_directories(kScratch);
    REQUIRE(fs::exists(kScratch));
}

TEST_CASE("analyze skips corrupt files but keeps the run") {
    write_audio_files();
    const std::string features = (kScratch / "features_small.csv").string();
    const int rc = run("analyze " + (kScratch / "voice0.wav").string() + " " +
                           (kScratch / "voice1.wav").string() + " " +
                           (kScratch / "broken.wav").string() +
                           " --min-chunk-seconds 2 --sidecar " +
                           (kScratch / "audio_sidecar.csv").string() + " --out " + features,
                       "analyze_small");
    REQUIRE(rc == 0);
    const auto rows = read_features(features);
    REQUIRE(rows.size() == 2);
    REQUIRE(rows[0].speaker_id == "voice0");
    REQUIRE(*rows[0].profile.get(kStoi) == 0.93);
    REQUIRE(*rows[0].profile.get(kPesq) == 3.4);
    REQUIRE(*rows[1].profile.get(kPesq) == 3.1);
    const std::string err = slurp(kScratch / "analyze_small.err");
    REQUIRE(err.find("broken") != std::string::npos);
}

TEST_CASE("analyze with no inputs is a usage error") {
    const int rc = run("analyze --out " + (kScratch / "x.csv").string(), "analyze_empty");
    REQUIRE(rc == 2);
}

TEST_CASE("analyze of all-corrupt inputs fails") {
    const int rc = run("analyze " + (kScratch / "broken.wav").string() + " --out " +
                           (kScratch / "y.csv").string(),
                       "analyze_corrupt");
    REQUIRE(rc == 1);
}

TEST_CASE("analyze then aggregate produce deterministic joined output") {
    write_audio_files();
    std::string wavs;
    for (int i = 0; i < 6; ++i) wavs += " " + (kScratch / ("voice" + std::to_string(i) + ".wav")).string();

    for (const char* tag : {"a", "b"}) {
        const int rc = run("analyze" + wavs + " --min-chunk-seconds 2 --jobs 2 --seed 7 --out " +
                               (kScratch / ("features_" + std::string(tag) + ".csv")).string(),
                           std::string("analyze_det_") + tag);
        REQUIRE(rc == 0);
    }
    REQUIRE(same_bytes(kScratch / "features_a.csv", kScratch / "features_b.csv"));

    for (const char* tag : {"a", "b"}) {
        const int rc = run("aggregate --features " + (kScratch / "features_a.csv").string() +
                               " --metadata " + (kScratch / "audio_metadata.csv").string() +
                               " --out " +
                               (kScratch / ("speakers_audio_" + std::string(tag) + ".csv")).string(),
                           std::string("aggregate_det_") + tag);
        REQUIRE(rc == 0);
    }
    REQUIRE(same_bytes(kScratch / "speakers_audio_a.csv", kScratch / "speakers_audio_b.csv"));
    const auto records = read_speakers((kScratch / "speakers_audio_a.csv").string());
    REQUIRE(records.size() == 6);
    REQUIRE(records[0].gender == Gender::male);
}

TEST_CASE("aggregate rejects duplicate metadata speakers") {
    write_audio_files();
    csv::write_file((kScratch / "dup_meta.csv").string(), {"speaker_id", "gender", "age"},
                    {{"voice0", "male", "40"}, {"voice0", "female", "41"}});
    const int rc = run("aggregate --features " + (kScratch / "features_a.csv").string() +
                           " --metadata " + (kScratch / "dup_meta.csv").string() + " --out " +
                           (kScratch / "dup_speakers.csv").string(),
                       "aggregate_dup");
    REQUIRE(rc == 1);
    REQUIRE(slurp(kScratch / "aggregate_dup.err").find("duplicate") != std::string::npos);
}

TEST_CASE("aggregate warns about speakers missing from metadata") {
    csv::write_file((kScratch / "partial_meta.csv").string(), {"speaker_id", "gender", "age"},
                    {{"voice0", "male", "40"}});
    const int rc = run("aggregate --features " + (kScratch / "features_a.csv").string() +
                           " --metadata " + (kScratch / "partial_meta.csv").string() + " --out " +
                           (kScratch / "partial_speakers.csv").string(),
                       "aggregate_partial");
    REQUIRE(rc == 0);
    REQUIRE(slurp(kScratch / "aggregate_partial.err").find("missing from metadata") !=
            std::string::npos);
}

TEST_CASE("pca emits quality, scores and stats deterministically") {
    write_cohort_files();
    for (const char* tag : {"a", "b"}) {
        const int rc = run("pca --embeddings " + (kScratch / "embeddings.csv").string() +
                               " --kmax 6 --seed 7 --out " +
                               (kScratch / ("pca_" + std::string(tag))).string(),
                           std::string("pca_") + tag);
        REQUIRE(rc == 0);
    }
    for (const char* suffix : {"_quality.csv", "_quality.json", "_scores.csv"}) {
        REQUIRE(same_bytes(kScratch / ("pca_a" + std::string(suffix)),
                           kScratch / ("pca_b" + std::string(suffix))));
    }
    const csv::Table t = csv::read_file((kScratch / "pca_a_quality.csv").string());
    REQUIRE(t.rows.size() == 6);
    REQUIRE(t.header == std::vector<std::string>{"k", "pct_variance", "mean_cosine_distance"});
    double prev_var = 0.0, prev_dist = 1e9;
    for (const auto& row : t.rows) {
        const double var = csv::parse_double(row[1], "quality");
        const double dist = csv::parse_double(row[2], "quality");
        REQUIRE(var >= prev_var);
        REQUIRE(dist <= prev_dist);
        prev_var = var;
        prev_dist = dist;
    }
}

TEST_CASE("pca on rank-1 embeddings reports 100 percent at k=1") {
    std::vector<Embedding> embs;
    for (int i = 0; i < 8; ++i) {
        const double t = static_cast<double>(i) + 1.0;
        embs.push_back({{t, 2.0 * t, 3.0 * t}, "r" + std::to_string(i)});
    }
    save_embeddings_csv((kScratch / "rank1.csv").string(), embs);
    const int rc = run("pca --embeddings " + (kScratch / "rank1.csv").string() +
                           " --kmax 1 --out " + (kScratch / "rank1").string(),
                       "pca_rank1");
    REQUIRE(rc == 0);
    const csv::Table t = csv::read_file((kScratch / "rank1_quality.csv").string());
    REQUIRE(t.rows.size() == 1);
    REQUIRE(csv::parse_double(t.rows[0][1], "q") == Catch::Approx(100.0).margin(1e-6));
}

TEST_CASE("gmm, greedy, bimodality, mlp, age run deterministically end to end") {
    write_cohort_files();
    REQUIRE(run("pca --embeddings " + (kScratch / "embeddings.csv").string() +
                    " --kmax 4 --seed 7 --out " + (kScratch / "pipe").string(),
                "pipe_pca") == 0);

    // gmm
    for (const char* tag : {"a", "b"}) {
        REQUIRE(run("gmm --pc-scores " + (kScratch / "pipe_scores.csv").string() +
                        " --metadata " + (kScratch / "metadata.csv").string() +
                        " --seed 7 --out " + (kScratch / ("gmm_" + std::string(tag))).string(),
                    std::string("gmm_") + tag) == 0);
    }
    REQUIRE(same_bytes(kScratch / "gmm_a_assignments.csv", kScratch / "gmm_b_assignments.csv"));
    REQUIRE(same_bytes(kScratch / "gmm_a_report.json", kScratch / "gmm_b_report.json"));

    // greedy, gendered via the gmm assignments
    for (const char* tag : {"a", "b"}) {
        REQUIRE(run("greedy --speakers " + (kScratch / "speakers.csv").string() +
                        " --pc-scores " + (kScratch / "pipe_scores.csv").string() +
                        " --pcs 2 --gendered --clusters " +
                        (kScratch / "gmm_a_assignments.csv").string() + " --seed 7 --out " +
                        (kScratch / ("greedy_" + std::string(tag))).string(),
                    std::string("greedy_") + tag) == 0);
    }
    for (const char* suffix :
         {"_models.csv", "_models.json", "_gendered.csv", "_gendered.json", "_signs.csv"}) {
        REQUIRE(same_bytes(kScratch / ("greedy_a" + std::string(suffix)),
                           kScratch / ("greedy_b" + std::string(suffix))));
    }
    // pc1 is gender-loaded by construction, so the model should find signal
    const csv::Table models = csv::read_file((kScratch / "greedy_a_models.csv").string());
    REQUIRE(models.rows.size() == 2);
    REQUIRE(csv::parse_double(models.rows[0][3], "corr") > 0.5);

    // bimodality
    for (const char* tag : {"a", "b"}) {
        REQUIRE(run("bimodality --pc-scores " + (kScratch / "pipe_scores.csv").string() +
                        " --seed 7 --out " + (kScratch / ("bim_" + std::string(tag))).string(),
                    std::string("bim_") + tag) == 0);
    }
    REQUIRE(same_bytes(kScratch / "bim_a_bimodality.csv", kScratch / "bim_b_bimodality.csv"));

    // mlp with a config that shrinks the budget (also exercises config parsing)
    std::ofstream(kScratch / "mlp.cfg") << "[mlp]\nepochs = 40\n";
    for (const char* tag : {"a", "b"}) {
        REQUIRE(run("mlp --speakers " + (kScratch / "speakers.csv").string() +
                        " --embeddings " + (kScratch / "embeddings.csv").string() +
                        " --config " + (kScratch / "mlp.cfg").string() + " --seed 7 --out " +
                        (kScratch / ("mlp_" + std::string(tag))).string(),
                    std::string("mlp_") + tag) == 0);
    }
    REQUIRE(same_bytes(kScratch / "mlp_a_mlp.csv", kScratch / "mlp_b_mlp.csv"));
    REQUIRE(same_bytes(kScratch / "mlp_a_mlp.json", kScratch / "mlp_b_mlp.json"));

    // age
    for (const char* tag : {"a", "b"}) {
        REQUIRE(run("age --pc-scores " + (kScratch / "pipe_scores.csv").string() +
                        " --embeddings " + (kScratch / "embeddings.csv").string() +
                        " --metadata " + (kScratch / "metadata.csv").string() +
                        " --seed 7 --out " + (kScratch / ("age_" + std::string(tag))).string(),
                    std::string("age_") + tag) == 0);
    }
    REQUIRE(same_bytes(kScratch / "age_a_age.csv", kScratch / "age_b_age.csv"));
    REQUIRE(same_bytes(kScratch / "age_a_age.json", kScratch / "age_b_age.json"));
}

TEST_CASE("greedy names both files on a join miss") {
    write_cohort_files();
    csv::write_file((kScratch / "short_scores.csv").string(), {"speaker_id", "pc1"},
                    {{"spk0", "1.0"}});
    const int rc = run("greedy --speakers " + (kScratch / "speakers.csv").string() +
                           " --pc-scores " + (kScratch / "short_scores.csv").string() +
                           " --out " + (kScratch / "join_miss").string(),
                       "greedy_miss");
    REQUIRE(rc == 1);
    const std::string err = slurp(kScratch / "greedy_miss.err");
    REQUIRE(err.find("speakers.csv") != std::string::npos);
    REQUIRE(err.find("short_scores.csv") != std::string::npos);
}

TEST_CASE("plot counts points and legend entries") {
    csv::write_file((kScratch / "plot_scores.csv").string(), {"speaker_id", "pc1", "pc2"},
                    {{"p1", "0.1", "0.2"}, {"p2", "-0.5", "0.3"}, {"p3", "0.4", "-0.6"}});
    csv::write_file((kScratch / "plot_meta.csv").string(), {"speaker_id", "gender", "age"},
                    {{"p1", "male", "23"}, {"p2", "female", "37"}, {"p3", "female", "61"}});
    for (const char* tag : {"a", "b"}) {
        REQUIRE(run("plot --pc-scores " + (kScratch / "plot_scores.csv").string() +
                        " --x 1 --y 2 --color gender --metadata " +
                        (kScratch / "plot_meta.csv").string() + " --out " +
                        (kScratch / ("plot_" + std::string(tag) + ".svg")).string(),
                    std::string("plot_") + tag) == 0);
    }
    REQUIRE(same_bytes(kScratch / "plot_a.svg", kScratch / "plot_b.svg"));
    const std::string svg = slurp(kScratch / "plot_a.svg");
    REQUIRE(count_occurrences(svg, "<circle") == 3);
    REQUIRE(count_occurrences(svg, "<rect") == 3);  // background + 2 legend swatches
    REQUIRE(svg.find("PC 1") != std::string::npos);
    REQUIRE(svg.find("PC 2") != std::string::npos);

    REQUIRE(run("plot --pc-scores " + (kScratch / "plot_scores.csv").string() +
                    " --color age --metadata " + (kScratch / "plot_meta.csv").string() +
                    " --out " + (kScratch / "plot_age.svg").string(),
                "plot_age") == 0);
    const std::string age_svg = slurp(kScratch / "plot_age.svg");
    REQUIRE(age_svg.find("20s") != std::string::npos);
    REQUIRE(age_svg.find("30s") != std::string::npos);
    REQUIRE(age_svg.find("60s") != std::string::npos);
}

TEST_CASE("plot without a color source fails cleanly") {
    const int rc = run("plot --pc-scores " + (kScratch / "plot_scores.csv").string() +
                           " --color cluster --out " + (kScratch / "plot_fail.svg").string(),
                       "plot_fail");
    REQUIRE(rc == 1);
    REQUIRE(slurp(kScratch / "plot_fail.err").find("--clusters") != std::string::npos);
}

TEST_CASE("unknown config keys are rejected") {
    std::ofstream(kScratch / "bad.cfg") << "[pitch]\nbogus_key = 3\n";
    const int rc = run("bimodality --pc-scores " + (kScratch / "plot_scores.csv").string() +
                           " --config " + (kScratch / "bad.cfg").string() + " --out " +
                           (kScratch / "bad_cfg").string(),
                       "bad_cfg");
    REQUIRE(rc == 1);
    REQUIRE(slurp(kScratch / "bad_cfg.err").find("unknown key") != std::string::npos);
}
