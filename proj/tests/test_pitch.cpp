#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

#include "support/synth.hpp"
#include "voiceprobe/mathutil.hpp"
#include "voiceprobe/pitch.hpp"

using namespace voiceprobe;

namespace {

double voiced_fraction(const EpochTrack& track) {
    if (track.voicing.empty()) return 0.0;
    const auto v = std::count(track.voicing.begin(), track.voicing.end(), true);
    return static_cast<double>(v) / static_cast<double>(track.voicing.size());
}

// direct evaluation of the PPQ formula on a raw period list (single run)
double ppq_oracle(const std::vector<double>& periods, int k) {
    double dev = 0.0;
    int windows = 0;
    for (std::size_t i = static_cast<std::size_t>(k); i + static_cast<std::size_t>(k) < periods.size(); ++i) {
        double local = 0.0;
        for (std::size_t j = i - static_cast<std::size_t>(k); j <= i + static_cast<std::size_t>(k); ++j) {
            local += periods[j];
        }
        local /= (2.0 * k + 1.0);
        dev += std::abs(periods[i] - local);
        ++windows;
    }
    double mean = 0.0;
    for (double p : periods) mean += p;
    mean /= static_cast<double>(periods.size());
    return 100.0 * (dev / windows) / mean;
}

}  // namespace

TEST_CASE("200 Hz pulse train tracks with 5 ms periods and high voicing") {
    const AudioClip clip = synth::pulse_train(200.0, 1.0, 16000, 0.8, 0.0, 1);
    const EpochTrack track = track_pitch(clip);
    REQUIRE(voiced_fraction(track) >= 0.9);
    const auto periods = track.periods();
    REQUIRE(periods.size() >= 100);
    for (double p : periods) {
        REQUIRE(p == Catch::Approx(0.005).margin(0.0001));
    }
}

TEST_CASE("white noise is mostly unvoiced") {
    const AudioClip clip = synth::white_noise(1.0, 16000, 0.3, 2);
    const EpochTrack track = track_pitch(clip);
    REQUIRE(voiced_fraction(track) < 0.2);
}

TEST_CASE("silence gives no epochs and no voicing") {
    AudioClip clip;
    clip.sample_rate = 16000;
    clip.samples.assign(16000, 0.0);
    const EpochTrack track = track_pitch(clip);
    REQUIRE(track.epoch_times.empty());
    for (bool v : track.voicing) REQUIRE_FALSE(v);
}

TEST_CASE("too-short clips are rejected") {
    AudioClip clip;
    clip.sample_rate = 16000;
    clip.samples.assign(800, 0.1);  // 50 ms
    REQUIRE_THROWS_AS(track_pitch(clip), TooShortError);
}

TEST_CASE("pitch halving guard across the speech range") {
    for (double f0 : {80.0, 120.0, 200.0, 300.0}) {
        const AudioClip clip = synth::pulse_train(f0, 1.0, 16000, 0.8, 0.0, 3);
        const EpochTrack track = track_pitch(clip);
        const double st = fx_median(track);
        REQUIRE(std::abs(st - 12.0 * std::log2(f0)) < 0.5);
    }
}

TEST_CASE("fx statistics are stable under a 25 ms shift") {
    const AudioClip clip = synth::pulse_train(150.0, 1.2, 16000, 0.8, 0.0, 4);
    AudioClip shifted;
    shifted.sample_rate = 16000;
    shifted.samples.assign(400, 0.0);
    shifted.samples.insert(shifted.samples.end(), clip.samples.begin(), clip.samples.end());
    const EpochTrack a = track_pitch(clip);
    const EpochTrack b = track_pitch(shifted);
    REQUIRE(std::abs(fx_median(a) - fx_median(b)) < 0.1);
    REQUIRE(std::abs(fx_iqr(a) - fx_iqr(b)) < 0.1);
    REQUIRE(std::abs(ppq(a) - ppq(b)) < 0.1);
}

TEST_CASE("fx_median of constant 5 ms periods is 12 log2(200)") {
    const EpochTrack track = synth::track_from_periods(std::vector<double>(20, 0.005));
    REQUIRE(fx_median(track) == Catch::Approx(12.0 * std::log2(200.0)).margin(1e-9));
    REQUIRE(fx_median(track) == Catch::Approx(91.73).margin(0.01));
}

TEST_CASE("fx_median of constant 10 ms periods is 12 log2(100)") {
    const EpochTrack track = synth::track_from_periods(std::vector<double>(20, 0.010));
    REQUIRE(fx_median(track) == Catch::Approx(12.0 * std::log2(100.0)).margin(1e-9));
    REQUIRE(fx_median(track) == Catch::Approx(79.73).margin(0.01));
}

TEST_CASE("fx_median of alternating periods lands on the middle frequency") {
    // periods 4/6 ms alternating plus one 5 ms: sorted frequencies put
    // 200 Hz in the middle (hand-sorted oracle)
    std::vector<double> periods;
    for (int i = 0; i < 5; ++i) {
        periods.push_back(0.004);
        periods.push_back(0.006);
    }
    periods.push_back(0.005);
    const EpochTrack track = synth::track_from_periods(periods);
    REQUIRE(fx_median(track) == Catch::Approx(12.0 * std::log2(200.0)).margin(1e-9));
}

TEST_CASE("fx_median needs at least 10 periods") {
    const EpochTrack track = synth::track_from_periods(std::vector<double>(9, 0.005));
    REQUIRE_THROWS_AS(fx_median(track), InsufficientVoicingError);
    REQUIRE_THROWS_AS(fx_iqr(track), InsufficientVoicingError);
}

TEST_CASE("fx_iqr is zero for constant pitch") {
    const EpochTrack track = synth::track_from_periods(std::vector<double>(25, 0.005));
    REQUIRE(fx_iqr(track) == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("fx_iqr is zero exactly when the quartiles coincide") {
    // non-constant frequencies whose middle half is flat: Q1 = Q3 = 100
    std::vector<double> freqs = {50, 100, 100, 100, 100, 100, 100,
                                 100, 100, 100, 100, 100, 200};
    std::vector<double> periods;
    for (double f : freqs) periods.push_back(1.0 / f);
    const EpochTrack track = synth::track_from_periods(periods);
    REQUIRE(fx_iqr(track) == Catch::Approx(0.0).margin(1e-12));
    REQUIRE(fx_iqr(track) >= 0.0);
}

TEST_CASE("fx_iqr of a constructed quartile pair is exactly one octave") {
    // 13 sorted frequencies with x[3] = 100 and x[9] = 200 (type-7 quartiles)
    const std::vector<double> freqs = {100, 100, 100, 100, 150, 150, 150,
                                       150, 150, 200, 200, 200, 200};
    std::vector<double> periods;
    for (double f : freqs) periods.push_back(1.0 / f);
    const EpochTrack track = synth::track_from_periods(periods);
    REQUIRE(fx_iqr(track) == Catch::Approx(12.0).margin(1e-9));
}

TEST_CASE("fx_iqr spans less than an octave for a uniform 100-200 Hz spread") {
    std::vector<double> freqs;
    for (int i = 0; i <= 100; ++i) freqs.push_back(100.0 + i);
    std::vector<double> periods;
    for (double f : freqs) periods.push_back(1.0 / f);
    const EpochTrack track = synth::track_from_periods(periods);
    // oracle: direct type-7 quartiles of the frequency list
    const double q1 = 125.0, q3 = 175.0;
    const double expect = 12.0 * std::log2(q3 / q1);
    REQUIRE(fx_iqr(track) == Catch::Approx(expect).margin(1e-9));
    REQUIRE(fx_iqr(track) > 0.0);
    REQUIRE(fx_iqr(track) < 12.0);
}

TEST_CASE("ppq of a perfectly periodic train is zero") {
    const EpochTrack track = synth::track_from_periods(std::vector<double>(30, 0.005));
    REQUIRE(ppq(track) == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("ppq hand-evaluated on [5,5,5,6,5,5,5] ms with k=2") {
    const std::vector<double> periods = {0.005, 0.005, 0.005, 0.006, 0.005, 0.005, 0.005};
    const EpochTrack track = synth::track_from_periods(periods);
    // hand evaluation: deviations 0.2, 0.8, 0.2 ms over 3 windows; mean
    // period 36/7 ms; PPQ = 100 * (0.4 ms) / (36/7 ms)
    const double expect = 100.0 * 0.0004 / (0.036 / 7.0);
    REQUIRE(ppq(track, 2) == Catch::Approx(expect).margin(1e-9));
    REQUIRE(ppq(track, 2) == Catch::Approx(7.7777777778).margin(1e-6));
}

TEST_CASE("ppq matches the direct formula and grows with jitter") {
    Rng rng(8);
    double last = 0.0;
    for (double jitter : {0.005, 0.01, 0.02}) {
        std::vector<double> periods;
        for (int i = 0; i < 200; ++i) {
            periods.push_back(0.005 * (1.0 + jitter * (2.0 * rng.uniform01() - 1.0)));
        }
        const EpochTrack track = synth::track_from_periods(periods);
        const double got = ppq(track, 2);
        REQUIRE(got == Catch::Approx(ppq_oracle(periods, 2)).margin(1e-9));
        REQUIRE(got > last);
        last = got;
        if (jitter == 0.01) {
            REQUIRE(got > 0.0);
            REQUIRE(got <= 1.5);
        }
    }
}

TEST_CASE("ppq is scale-invariant in period units") {
    Rng rng(9);
    std::vector<double> periods;
    for (int i = 0; i < 60; ++i) periods.push_back(0.005 * (1.0 + 0.01 * rng.normal()));
    std::vector<double> scaled;
    for (double p : periods) scaled.push_back(2.5 * p);
    const double a = ppq(synth::track_from_periods(periods));
    const double b = ppq(synth::track_from_periods(scaled));
    REQUIRE(a == Catch::Approx(b).margin(1e-9));
}

TEST_CASE("ppq needs one run with 2k+1 consecutive periods") {
    const EpochTrack track = synth::track_from_periods({0.005, 0.005, 0.005, 0.005});
    REQUIRE_THROWS_AS(ppq(track, 2), InsufficientVoicingError);
}

TEST_CASE("tracked epochs respect the period range invariant") {
    for (std::uint64_t seed : {11ull, 12ull, 13ull}) {
        const AudioClip clip = synth::vowel(120.0, 1.0, 16000, {500, 1500, 2500, 3500},
                                            {60, 90, 120, 160}, 0.01, seed);
        const EpochTrack track = track_pitch(clip);
        REQUIRE(std::is_sorted(track.epoch_times.begin(), track.epoch_times.end()));
        for (double p : track.periods()) {
            REQUIRE(p >= 1.0 / 500.0 - 1e-9);
            REQUIRE(p <= 1.0 / 50.0 + 1e-9);
        }
        // voicing only where periodicity clears the threshold
        for (std::size_t f = 0; f < track.voicing.size(); ++f) {
            if (track.voicing[f]) REQUIRE(track.periodicity[f] >= 0.6);
        }
    }
}
