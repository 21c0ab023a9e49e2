#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <vector>

#include "voiceprobe/audio.hpp"
#include "voiceprobe/dsp.hpp"
#include "voiceprobe/errors.hpp"
#include "voiceprobe/mathutil.hpp"
#include "voiceprobe/pitch.hpp"

namespace voiceprobe {

struct SpectralConfig {
    std::vector<double> slope_band_centers_hz = {1500.0, 2000.0, 2500.0, 3000.0, 3500.0};
    double slope_band_width_hz = 1000.0;
    double gne_bandwidth_hz = 3000.0;
    double gne_center_step_hz = 500.0;
    double gne_center_min_hz = 1500.0;
    double gne_center_max_hz = 3500.0;
    double frame_window_s = 0.025;
    double frame_hop_s = 0.010;
    std::size_t fft_size = 512;
};

struct BandEnergySeries {
    std::vector<double> center_freqs;
    std::vector<std::vector<double>> energies_db;  // [frame][band]
};

// Overall signal level: 20 log10 of the RMS over all samples, dB re digital
// full scale. Uncalibrated recordings, so this is a relative level only.
inline double level_db(const AudioClip& clip) {
    if (clip.samples.empty()) throw EmptyAudioError("level_db: empty clip");
    double acc = 0.0;
    for (double s : clip.samples) acc += s * s;
    const double rms = std::sqrt(acc / static_cast<double>(clip.samples.size()));
    if (rms <= 0.0) throw MinusInfinityError("level_db: all-zero signal");
    return 20.0 * std::log10(rms);
}

// Ordinary least-squares slope of band level against center frequency.
// Centers in kHz, levels in dB, result in dB/kHz.
inline double slope_from_band_db(const std::vector<double>& centers_khz,
                                 const std::vector<double>& band_db) {
    if (centers_khz.size() != band_db.size() || centers_khz.size() < 2) {
        throw RangeError("slope_from_band_db: need matching bands, at least 2");
    }
    const double mx = mean_of(centers_khz);
    const double my = mean_of(band_db);
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < centers_khz.size(); ++i) {
        sxy += (centers_khz[i] - mx) * (band_db[i] - my);
        sxx += (centers_khz[i] - mx) * (centers_khz[i] - mx);
    }
    if (sxx <= 0.0) throw DegenerateError("slope_from_band_db: identical centers");
    return sxy / sxx;
}

namespace detail {

// Power per band from one Hann-windowed frame, rectangular bin integration
// over [center - width/2, center + width/2).
inline std::vector<double> frame_band_power(const std::vector<double>& frame, int rate,
                                            std::size_t fft_size,
                                            const std::vector<double>& centers,
                                            double width) {
    std::vector<std::complex<double>> z(fft_size, {0.0, 0.0});
    const std::size_t m = std::min(frame.size(), fft_size);
    for (std::size_t i = 0; i < m; ++i) z[i] = {frame[i], 0.0};
    dsp::fft_inplace(z);
    const double bin_hz = static_cast<double>(rate) / static_cast<double>(fft_size);
    std::vector<double> power(centers.size(), 0.0);
    for (std::size_t k = 0; k <= fft_size / 2; ++k) {
        const double f = static_cast<double>(k) * bin_hz;
        const double p = std::norm(z[k]);
        for (std::size_t b = 0; b < centers.size(); ++b) {
            if (f >= centers[b] - width / 2 && f < centers[b] + width / 2) power[b] += p;
        }
    }
    return power;
}

}  // namespace detail

// Band levels per voiced frame for the SLOPE descriptor.
inline BandEnergySeries voiced_band_energies(const AudioClip& clip, const EpochTrack& track,
                                             const SpectralConfig& cfg = {}) {
    BandEnergySeries series;
    series.center_freqs = cfg.slope_band_centers_hz;
    const FrameSequence frames =
        frame_signal(clip, cfg.frame_window_s, cfg.frame_hop_s, WindowShape::hann);
    const std::size_t count = std::min(frames.frames.size(), track.voicing.size());
    for (std::size_t f = 0; f < count; ++f) {
        if (!track.voicing[f]) continue;
        const auto power = detail::frame_band_power(frames.frames[f], clip.sample_rate,
                                                    cfg.fft_size, cfg.slope_band_centers_hz,
                                                    cfg.slope_band_width_hz);
        std::vector<double> db(power.size());
        for (std::size_t b = 0; b < power.size(); ++b) {
            db[b] = 10.0 * std::log10(std::max(power[b], 1e-30));
        }
        series.energies_db.push_back(std::move(db));
    }
    return series;
}

// Spectral slope in dB/kHz: average band level over voiced frames, then an
// OLS line against band center frequency.
inline double spectral_slope(const AudioClip& clip, const EpochTrack& track,
                             const SpectralConfig& cfg = {}) {
    const BandEnergySeries series = voiced_band_energies(clip, track, cfg);
    if (series.energies_db.size() < 5) {
        throw InsufficientVoicingError("spectral_slope: need at least 5 voiced frames");
    }
    const std::size_t n_bands = series.center_freqs.size();
    std::vector<double> mean_db(n_bands, 0.0);
    for (const auto& frame_db : series.energies_db) {
        for (std::size_t b = 0; b < n_bands; ++b) mean_db[b] += frame_db[b];
    }
    for (double& v : mean_db) v /= static_cast<double>(series.energies_db.size());
    std::vector<double> centers_khz(n_bands);
    for (std::size_t b = 0; b < n_bands; ++b) centers_khz[b] = series.center_freqs[b] / 1000.0;
    return slope_from_band_db(centers_khz, mean_db);
}

// Glottal-to-noise excitation ratio. Voiced stretches are downsampled to
// 10 kHz and inverse-filtered with order-13 linear prediction; Hilbert
// envelopes of fixed-band slices of the excitation are cross-correlated and
// the best eligible band pair (center separation above half the bandwidth)
// scores each window. Clean pulsed excitation keeps the band envelopes
// synchronous (score near 1); turbulent noise decorrelates them.
inline double gne(const AudioClip& clip, const EpochTrack& track,
                  const SpectralConfig& cfg = {}) {
    constexpr int kGneRate = 10000;
    constexpr int kLpcOrder = 13;
    const double voiced_s =
        static_cast<double>(std::count(track.voicing.begin(), track.voicing.end(), true)) *
        cfg.frame_hop_s;
    if (voiced_s < 0.2) {
        throw InsufficientVoicingError("gne: need at least 200 ms of voiced speech");
    }

    const std::vector<double> x10 =
        dsp::resample_sinc(clip.samples, clip.sample_rate, kGneRate);

    std::vector<double> centers;
    for (double c = cfg.gne_center_min_hz; c <= cfg.gne_center_max_hz + 1e-9;
         c += cfg.gne_center_step_hz) {
        centers.push_back(c);
    }
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t i = 0; i < centers.size(); ++i) {
        for (std::size_t j = i + 1; j < centers.size(); ++j) {
            if (centers[j] - centers[i] > cfg.gne_bandwidth_hz / 2.0) pairs.emplace_back(i, j);
        }
    }
    if (pairs.empty()) throw RangeError("gne: no band pair with sufficient separation");

    const auto win = static_cast<std::size_t>(std::llround(0.040 * kGneRate));
    const auto hop = static_cast<std::size_t>(std::llround(0.020 * kGneRate));
    const std::vector<double> hann = dsp::hann_window(win);

    // voiced intervals in seconds from the 10 ms frame mask
    std::vector<std::pair<double, double>> intervals;
    for (std::size_t f = 0; f < track.voicing.size(); ++f) {
        if (!track.voicing[f]) continue;
        const double t0 = track.frame_times[f];
        const double t1 = t0 + cfg.frame_window_s;
        if (!intervals.empty() && t0 <= intervals.back().second) {
            intervals.back().second = t1;
        } else {
            intervals.emplace_back(t0, t1);
        }
    }

    std::vector<double> scores;
    std::vector<double> frame(win), windowed(win), residual(win);
    for (const auto& [t0, t1] : intervals) {
        auto start = static_cast<std::size_t>(std::llround(t0 * kGneRate));
        const auto stop = static_cast<std::size_t>(std::llround(t1 * kGneRate));
        for (; start + win <= std::min(stop, x10.size()); start += hop) {
            for (std::size_t i = 0; i < win; ++i) {
                frame[i] = x10[start + i];
                windowed[i] = frame[i] * hann[i];
            }
            std::vector<double> autocorr(kLpcOrder + 1, 0.0);
            for (int lag = 0; lag <= kLpcOrder; ++lag) {
                double acc = 0.0;
                for (std::size_t i = static_cast<std::size_t>(lag); i < win; ++i) {
                    acc += windowed[i] * windowed[i - static_cast<std::size_t>(lag)];
                }
                autocorr[static_cast<std::size_t>(lag)] = acc;
            }
            if (autocorr[0] < 1e-20) continue;
            const std::vector<double> lpc = dsp::levinson(autocorr, kLpcOrder);
            for (std::size_t i = 0; i < win; ++i) {
                double acc = 0.0;
                for (int k = 0; k <= kLpcOrder; ++k) {
                    const std::ptrdiff_t idx = static_cast<std::ptrdiff_t>(start + i) - k;
                    if (idx >= 0) {
                        acc += lpc[static_cast<std::size_t>(k)] * x10[static_cast<std::size_t>(idx)];
                    }
                }
                residual[i] = acc;
            }

            std::vector<std::vector<double>> envelopes(centers.size());
            for (std::size_t b = 0; b < centers.size(); ++b) {
                const double lo = std::max(0.0, centers[b] - cfg.gne_bandwidth_hz / 2.0);
                const double hi = std::min(static_cast<double>(kGneRate) / 2.0,
                                           centers[b] + cfg.gne_bandwidth_hz / 2.0);
                envelopes[b] = dsp::band_envelope(residual, kGneRate, lo, hi);
            }

            double best = 0.0;
            for (const auto& [i, j] : pairs) {
                for (int lag = -3; lag <= 3; ++lag) {
                    const auto& a = envelopes[i];
                    const auto& b = envelopes[j];
                    std::vector<double> va, vb;
                    for (std::size_t t = 0; t < win; ++t) {
                        const std::ptrdiff_t u = static_cast<std::ptrdiff_t>(t) + lag;
                        if (u < 0 || u >= static_cast<std::ptrdiff_t>(win)) continue;
                        va.push_back(a[t]);
                        vb.push_back(b[static_cast<std::size_t>(u)]);
                    }
                    best = std::max(best, pearson(va, vb));
                }
            }
            scores.push_back(std::clamp(best, 0.0, 1.0));
        }
    }
    if (scores.empty()) {
        throw InsufficientVoicingError("gne: no analysable voiced window");
    }
    return median_of(scores);
}

}  // namespace voiceprobe
