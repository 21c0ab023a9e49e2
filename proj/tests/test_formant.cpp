#include <catch2/catch_amalgamated.hpp>

#include <array>
#include <cmath>
#include <vector>

#include "support/synth.hpp"
#include "voiceprobe/formant.hpp"
#include "voiceprobe/mathutil.hpp"

using namespace voiceprobe;

TEST_CASE("tube fit is exact on canonical quarter-wave series") {
    // 17.5 cm tract: 500/1500/2500/3500 Hz at c = 350 m/s
    REQUIRE(tube_fit_length({500, 1500, 2500, 3500}, 350.0) ==
            Catch::Approx(17.5).margin(1e-12));
    REQUIRE(tube_fit_length({1000, 3000, 5000, 7000}, 350.0) ==
            Catch::Approx(8.75).margin(1e-12));
}

TEST_CASE("tube fit matches the hand-evaluated closed form") {
    // x* = (560 + 3*1480 + 5*2560 + 7*3380) / 84 = 41460/84
    // L  = 100 * 350 / (4 * x*)
    const double x_star = (560.0 + 3.0 * 1480.0 + 5.0 * 2560.0 + 7.0 * 3380.0) / 84.0;
    const double expect = 100.0 * 350.0 / (4.0 * x_star);
    REQUIRE(tube_fit_length({560, 1480, 2560, 3380}, 350.0) ==
            Catch::Approx(expect).margin(1e-12));
    REQUIRE(expect == Catch::Approx(17.7279116466).margin(1e-9));
}

TEST_CASE("tube fit is exact for every length in the tract range") {
    for (double len_cm = 8.0; len_cm <= 22.0; len_cm += 1.0) {
        const double x = 100.0 * 350.0 / (4.0 * len_cm);
        const std::array<double, 4> freqs = {x, 3.0 * x, 5.0 * x, 7.0 * x};
        REQUIRE(std::abs(tube_fit_length(freqs, 350.0) - len_cm) < 1e-9);
    }
}

TEST_CASE("tube fit scales inversely with formant scaling") {
    Rng rng(51);
    for (int trial = 0; trial < 1000; ++trial) {
        const double len_cm = 8.0 + 14.0 * rng.uniform01();
        const double x = 100.0 * 350.0 / (4.0 * len_cm);
        // perturbed series keeps the ordering but is no longer exact
        std::array<double, 4> freqs{};
        for (int n = 1; n <= 4; ++n) {
            freqs[static_cast<std::size_t>(n - 1)] =
                (2.0 * n - 1.0) * x * (1.0 + 0.05 * (rng.uniform01() - 0.5));
        }
        const double s = 0.5 + 1.5 * rng.uniform01();
        std::array<double, 4> scaled{};
        for (std::size_t i = 0; i < 4; ++i) scaled[i] = s * freqs[i];
        const double base = tube_fit_length(freqs, 350.0);
        REQUIRE(tube_fit_length(scaled, 350.0) * s == Catch::Approx(base).epsilon(1e-12));
    }
}

TEST_CASE("tube fit rejects non-increasing formants") {
    REQUIRE_THROWS_AS(tube_fit_length({1500, 500, 2500, 3500}, 350.0), InvalidFormantsError);
    REQUIRE_THROWS_AS(tube_fit_length({0, 1500, 2500, 3500}, 350.0), InvalidFormantsError);
}

TEST_CASE("synthetic vowel formants are recovered within 60 Hz") {
    const std::vector<double> formants = {500, 1500, 2500, 3500};
    const AudioClip clip =
        synth::vowel(100.0, 1.0, 16000, formants, {60, 90, 120, 160}, 0.0, 52);
    const EpochTrack track = track_pitch(clip);
    const auto frames = estimate_formants(clip, track);
    REQUIRE(frames.size() >= 10);
    for (std::size_t k = 0; k < 4; ++k) {
        std::vector<double> f;
        for (const auto& frame : frames) {
            if (frame.reliable) f.push_back(frame.freqs[k]);
        }
        REQUIRE(f.size() >= 10);
        REQUIRE(std::abs(median_of(f) - formants[k]) < 60.0);
    }
}

TEST_CASE("formant frames keep the ordering invariant") {
    const AudioClip clip = synth::vowel(120.0, 0.8, 16000, {600, 1700, 2600, 3400},
                                        {70, 100, 130, 170}, 0.005, 53);
    const EpochTrack track = track_pitch(clip);
    for (const auto& frame : estimate_formants(clip, track)) {
        REQUIRE(frame.freqs[0] > 0.0);
        REQUIRE(frame.freqs[0] < frame.freqs[1]);
        REQUIRE(frame.freqs[1] < frame.freqs[2]);
        REQUIRE(frame.freqs[2] < frame.freqs[3]);
        REQUIRE(frame.freqs[3] < 8000.0);
    }
}

TEST_CASE("noise and silence yield no formant frames") {
    const AudioClip noise = synth::white_noise(1.0, 16000, 0.3, 54);
    const EpochTrack nt = track_pitch(noise);
    REQUIRE_THROWS_AS(estimate_formants(noise, nt), InsufficientVoicingError);

    AudioClip silence;
    silence.sample_rate = 16000;
    silence.samples.assign(16000, 0.0);
    const EpochTrack st = track_pitch(silence);
    REQUIRE_THROWS_AS(estimate_formants(silence, st), InsufficientVoicingError);
}

TEST_CASE("vtlen of the canonical vowel is 17.5 cm within tolerance") {
    const AudioClip clip =
        synth::vowel(100.0, 1.0, 16000, {500, 1500, 2500, 3500}, {60, 90, 120, 160}, 0.0, 55);
    const EpochTrack track = track_pitch(clip);
    REQUIRE(vtlen(clip, track) == Catch::Approx(17.5).margin(0.8));
}

TEST_CASE("vtlen of identical frames equals the single tube fit") {
    FormantFrame frame;
    frame.freqs = {520, 1490, 2510, 3490};
    frame.reliable = true;
    const std::vector<FormantFrame> frames(12, frame);
    REQUIRE(vtlen_from_frames(frames) ==
            Catch::Approx(tube_fit_length(frame.freqs)).margin(1e-12));
}

TEST_CASE("vtlen requires ten reliable frames") {
    FormantFrame frame;
    frame.freqs = {520, 1490, 2510, 3490};
    frame.reliable = true;
    const std::vector<FormantFrame> frames(9, frame);
    REQUIRE_THROWS_AS(vtlen_from_frames(frames), InsufficientFormantsError);
}

TEST_CASE("vtlen stays inside the physical range") {
    for (std::uint64_t seed : {56ull, 57ull}) {
        const AudioClip clip = synth::vowel(110.0, 1.0, 16000, {430, 1300, 2150, 3000},
                                            {60, 90, 120, 160}, 0.01, seed);
        const EpochTrack track = track_pitch(clip);
        const double len = vtlen(clip, track);
        REQUIRE(len >= 8.0);
        REQUIRE(len <= 25.0);
    }
}
