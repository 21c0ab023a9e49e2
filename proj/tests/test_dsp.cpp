#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <vector>

#include "support/synth.hpp"
#include "voiceprobe/dsp.hpp"
#include "voiceprobe/mathutil.hpp"
#include "voiceprobe/rng.hpp"

using namespace voiceprobe;

namespace {

// reference DFT, O(n^2)
std::vector<std::complex<double>> naive_dft(const std::vector<std::complex<double>>& x) {
    const std::size_t n = x.size();
    std::vector<std::complex<double>> out(n, {0.0, 0.0});
    for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t i = 0; i < n; ++i) {
            const double phase = -2.0 * dsp::kPi * static_cast<double>(k * i) / static_cast<double>(n);
            out[k] += x[i] * std::complex<double>(std::cos(phase), std::sin(phase));
        }
    }
    return out;
}

}  // namespace

TEST_CASE("fft matches a naive DFT") {
    Rng rng(7);
    for (std::size_t n : {8u, 64u, 256u}) {
        std::vector<std::complex<double>> x(n);
        for (auto& v : x) v = {rng.normal(), rng.normal()};
        auto ref = naive_dft(x);
        auto fast = x;
        dsp::fft_inplace(fast);
        for (std::size_t k = 0; k < n; ++k) {
            REQUIRE(std::abs(fast[k] - ref[k]) < 1e-9 * static_cast<double>(n));
        }
        dsp::fft_inplace(fast, true);
        for (std::size_t k = 0; k < n; ++k) {
            REQUIRE(std::abs(fast[k] - x[k]) < 1e-12 * static_cast<double>(n));
        }
    }
}

TEST_CASE("fft rejects non power-of-two sizes") {
    std::vector<std::complex<double>> x(12, {0.0, 0.0});
    REQUIRE_THROWS_AS(dsp::fft_inplace(x), RangeError);
}

TEST_CASE("hann window is the periodic raised cosine") {
    const auto w = dsp::hann_window(160);
    REQUIRE(w[0] == Catch::Approx(0.0).margin(1e-15));
    for (std::size_t i = 0; i < w.size(); ++i) {
        const double expect = 0.5 - 0.5 * std::cos(2.0 * dsp::kPi * i / 160.0);
        REQUIRE(w[i] == Catch::Approx(expect).margin(1e-15));
    }
}

TEST_CASE("cross_correlate equals the direct sum") {
    Rng rng(11);
    std::vector<double> a(50), b(90);
    for (auto& v : a) v = rng.normal();
    for (auto& v : b) v = rng.normal();
    const auto r = dsp::cross_correlate(a, b, 40);
    for (std::size_t tau = 0; tau <= 40; ++tau) {
        double direct = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) direct += a[i] * b[i + tau];
        REQUIRE(r[tau] == Catch::Approx(direct).margin(1e-9));
    }
}

TEST_CASE("levinson recovers AR(2) coefficients") {
    // y[n] = 1.5 y[n-1] - 0.7 y[n-2] + e[n]
    Rng rng(3);
    std::vector<double> y(20000, 0.0);
    for (std::size_t i = 2; i < y.size(); ++i) {
        y[i] = 1.5 * y[i - 1] - 0.7 * y[i - 2] + rng.normal();
    }
    std::vector<double> r(3, 0.0);
    for (int lag = 0; lag <= 2; ++lag) {
        for (std::size_t i = static_cast<std::size_t>(lag); i < y.size(); ++i) {
            r[static_cast<std::size_t>(lag)] += y[i] * y[i - static_cast<std::size_t>(lag)];
        }
    }
    const auto lpc = dsp::levinson(r, 2);
    REQUIRE(lpc[0] == 1.0);
    REQUIRE(lpc[1] == Catch::Approx(-1.5).margin(0.02));
    REQUIRE(lpc[2] == Catch::Approx(0.7).margin(0.02));
}

TEST_CASE("band envelope of an in-band sine tracks its amplitude") {
    const auto clip = synth::sine(2000.0, 0.1, 16000, 0.5);
    const auto env = dsp::band_envelope(clip.samples, 16000, 1000.0, 3000.0);
    // interior samples; edges ring from the block transform
    double lo = 1e9, hi = 0.0;
    for (std::size_t i = 200; i + 200 < env.size(); ++i) {
        lo = std::min(lo, env[i]);
        hi = std::max(hi, env[i]);
    }
    REQUIRE(lo > 0.45);
    REQUIRE(hi < 0.55);
}

TEST_CASE("resampler preserves a sine within passband") {
    const auto clip = synth::sine(440.0, 0.5, 48000, 0.8);
    const auto y = dsp::resample_sinc(clip.samples, 48000, 16000);
    REQUIRE(y.size() == 8000);
    double err = 0.0;
    for (std::size_t i = 500; i + 500 < y.size(); ++i) {
        const double expect = 0.8 * std::sin(2.0 * dsp::kPi * 440.0 * (static_cast<double>(i) / 16000.0));
        err = std::max(err, std::abs(y[i] - expect));
    }
    REQUIRE(err < 1e-3);
}

TEST_CASE("preemphasis is the first difference filter") {
    std::vector<double> x = {1.0, 1.0, 1.0, 1.0};
    dsp::preemphasis_inplace(x, 0.97);
    REQUIRE(x[0] == 1.0);
    for (std::size_t i = 1; i < x.size(); ++i) REQUIRE(x[i] == Catch::Approx(0.03).margin(1e-15));
}

TEST_CASE("quantile type-7 interpolates order statistics") {
    const std::vector<double> v = {4.0, 1.0, 3.0, 2.0};
    REQUIRE(quantile_type7(v, 0.0) == 1.0);
    REQUIRE(quantile_type7(v, 1.0) == 4.0);
    REQUIRE(quantile_type7(v, 0.5) == Catch::Approx(2.5));
    REQUIRE(quantile_type7(v, 0.25) == Catch::Approx(1.75));  // h = 0.75
    REQUIRE(median_of({5.0, 1.0, 9.0}) == 5.0);
}
