#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "voiceprobe/audio.hpp"
#include "voiceprobe/dsp.hpp"
#include "voiceprobe/errors.hpp"
#include "voiceprobe/mathutil.hpp"

namespace voiceprobe {

struct PitchConfig {
    double f0_min_hz = 50.0;
    double f0_max_hz = 500.0;
    double voicing_ncc_threshold = 0.6;
    int ppq_half_width = 2;
};

// Pitch-period epochs with a 10 ms voicing/periodicity grid. Epochs are
// grouped into voiced runs; `periods()` and `run_periods()` never bridge the
// unvoiced gap between two runs.
struct EpochTrack {
    std::vector<double> epoch_times;      // seconds, strictly increasing
    std::vector<std::size_t> run_starts;  // index into epoch_times per voiced run
    std::vector<double> frame_times;      // frame start times, 10 ms hop
    std::vector<bool> voicing;            // per frame
    std::vector<double> periodicity;      // per frame, NCC score clamped to [0,1]

    std::vector<std::vector<double>> run_periods() const {
        std::vector<std::vector<double>> runs;
        for (std::size_t r = 0; r < run_starts.size(); ++r) {
            const std::size_t begin = run_starts[r];
            const std::size_t end =
                (r + 1 < run_starts.size()) ? run_starts[r + 1] : epoch_times.size();
            std::vector<double> periods;
            for (std::size_t i = begin; i + 1 < end; ++i) {
                periods.push_back(epoch_times[i + 1] - epoch_times[i]);
            }
            runs.push_back(std::move(periods));
        }
        return runs;
    }

    std::vector<double> periods() const {
        std::vector<double> all;
        for (auto& run : run_periods()) all.insert(all.end(), run.begin(), run.end());
        return all;
    }
};

namespace detail {

struct PitchCandidate {
    double lag = 0.0;   // refined fractional lag, samples
    double score = 0.0; // parabolic-refined NCC at the peak
};

// Parabolic vertex offset for three equally spaced samples around a peak.
inline double parabolic_offset(double ym, double y0, double yp) {
    const double denom = ym - 2.0 * y0 + yp;
    if (std::abs(denom) < 1e-12) return 0.0;
    return std::clamp(0.5 * (ym - yp) / denom, -0.5, 0.5);
}

// Parabolic estimate of the peak value itself. Fractional-lag peaks sampled
// on the integer grid otherwise score below their exact-integer multiples,
// which flips the tracker onto a period multiple.
inline double parabolic_peak(double ym, double y0, double yp) {
    const double d = parabolic_offset(ym, y0, yp);
    return y0 - 0.25 * (ym - yp) * d;
}

}  // namespace detail

// Frame-level F0 by normalized cross-correlation (25 ms window, 10 ms hop)
// over the 50-500 Hz lag range, smoothed with a Viterbi pass that has an
// explicit unvoiced state. Epochs are then laid down inside each voiced run
// by stepping one local period at a time from the run's peak-correlation
// frame, snapping each step to the nearest waveform peak.
inline EpochTrack track_pitch(const AudioClip& clip, const PitchConfig& cfg = {}) {
    const int rate = clip.sample_rate;
    const std::size_t n = clip.samples.size();
    if (static_cast<double>(n) < 0.1 * rate) {
        throw TooShortError("track_pitch: need at least 100 ms of audio");
    }
    const auto win = static_cast<std::size_t>(std::llround(0.025 * rate));
    const auto hop = static_cast<std::size_t>(std::llround(0.010 * rate));
    const auto lag_min = static_cast<std::size_t>(
        std::max(2.0, std::floor(rate / cfg.f0_max_hz)));
    const auto lag_max =
        static_cast<std::size_t>(std::ceil(rate / cfg.f0_min_hz));

    const std::size_t n_frames = (n >= win) ? 1 + (n - win) / hop : 0;
    if (n_frames == 0) throw TooShortError("track_pitch: clip shorter than one frame");

    EpochTrack track;
    track.frame_times.resize(n_frames);
    track.voicing.assign(n_frames, false);
    track.periodicity.assign(n_frames, 0.0);
    for (std::size_t f = 0; f < n_frames; ++f) {
        track.frame_times[f] = static_cast<double>(f * hop) / rate;
    }

    // Global energy prefix for the NCC denominators and RMS gates.
    std::vector<double> energy_prefix(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        energy_prefix[i + 1] = energy_prefix[i] + clip.samples[i] * clip.samples[i];
    }
    const double clip_rms = std::sqrt(energy_prefix[n] / static_cast<double>(n));
    const double rms_gate = 0.01 * clip_rms;

    const double lag_score_bias = 0.01;  // prefers the shorter of near-equal peaks
    const double octave_jump_cost = 0.4;
    const double voicing_switch_cost = 0.12;

    std::vector<std::vector<detail::PitchCandidate>> candidates(n_frames);
    std::vector<double> frame_rms(n_frames, 0.0);
    for (std::size_t f = 0; f < n_frames; ++f) {
        const std::size_t start = f * hop;
        if (start + win + lag_max > n) break;  // tail frames stay unvoiced
        const double e0 = energy_prefix[start + win] - energy_prefix[start];
        frame_rms[f] = std::sqrt(e0 / static_cast<double>(win));
        if (e0 < 1e-20) continue;

        const std::vector<double> a(clip.samples.begin() + static_cast<std::ptrdiff_t>(start),
                                    clip.samples.begin() + static_cast<std::ptrdiff_t>(start + win));
        const std::vector<double> b(clip.samples.begin() + static_cast<std::ptrdiff_t>(start),
                                    clip.samples.begin() +
                                        static_cast<std::ptrdiff_t>(start + win + lag_max));
        const std::vector<double> raw = dsp::cross_correlate(a, b, lag_max);

        std::vector<double> ncc(lag_max + 1, 0.0);
        for (std::size_t tau = lag_min; tau <= lag_max; ++tau) {
            const double et = energy_prefix[start + tau + win] - energy_prefix[start + tau];
            if (et < 1e-20) continue;
            ncc[tau] = raw[tau] / std::sqrt(e0 * et);
        }
        for (std::size_t tau = lag_min + 1; tau + 1 <= lag_max; ++tau) {
            if (ncc[tau] >= ncc[tau - 1] && ncc[tau] >= ncc[tau + 1] && ncc[tau] > 0.2) {
                const double d = detail::parabolic_offset(ncc[tau - 1], ncc[tau], ncc[tau + 1]);
                const double peak =
                    std::min(1.0, detail::parabolic_peak(ncc[tau - 1], ncc[tau], ncc[tau + 1]));
                candidates[f].push_back({static_cast<double>(tau) + d, peak});
            }
        }
        std::sort(candidates[f].begin(), candidates[f].end(),
                  [](const auto& x, const auto& y) { return x.score > y.score; });
        if (candidates[f].size() > 8) candidates[f].resize(8);
    }

    // Viterbi over per-frame candidates plus one unvoiced state (index -1).
    const auto emission = [&](std::size_t f, int s) {
        if (s < 0) return cfg.voicing_ncc_threshold;
        const auto& c = candidates[f][static_cast<std::size_t>(s)];
        return c.score - lag_score_bias * std::log2(c.lag / static_cast<double>(lag_min));
    };
    std::vector<std::vector<double>> best(n_frames);
    std::vector<std::vector<int>> from(n_frames);
    for (std::size_t f = 0; f < n_frames; ++f) {
        const std::size_t n_states = candidates[f].size() + 1;  // last = unvoiced
        best[f].assign(n_states, 0.0);
        from[f].assign(n_states, -1);
        for (std::size_t s = 0; s < n_states; ++s) {
            const int state = (s + 1 == n_states) ? -1 : static_cast<int>(s);
            const double em = emission(f, state);
            if (f == 0) {
                best[f][s] = em;
                continue;
            }
            double top = -1e30;
            int arg = -1;
            const std::size_t prev_states = candidates[f - 1].size() + 1;
            for (std::size_t p = 0; p < prev_states; ++p) {
                const int pstate = (p + 1 == prev_states) ? -1 : static_cast<int>(p);
                double cost = 0.0;
                if (state >= 0 && pstate >= 0) {
                    cost = octave_jump_cost *
                           std::abs(std::log2(candidates[f][static_cast<std::size_t>(state)].lag /
                                              candidates[f - 1][static_cast<std::size_t>(pstate)].lag));
                } else if ((state >= 0) != (pstate >= 0)) {
                    cost = voicing_switch_cost;
                }
                const double v = best[f - 1][p] - cost;
                if (v > top) {
                    top = v;
                    arg = static_cast<int>(p);
                }
            }
            best[f][s] = top + em;
            from[f][s] = arg;
        }
    }
    std::vector<int> path(n_frames, -1);
    {
        const auto& last = best.back();
        std::size_t arg = 0;
        for (std::size_t s = 1; s < last.size(); ++s) {
            if (last[s] > last[arg]) arg = s;
        }
        int s = (arg + 1 == last.size()) ? -1 : static_cast<int>(arg);
        for (std::size_t f = n_frames; f-- > 0;) {
            path[f] = s;
            if (f > 0) {
                const std::size_t idx =
                    (s < 0) ? best[f].size() - 1 : static_cast<std::size_t>(s);
                const int p = from[f][idx];
                s = (p + 1 == static_cast<int>(best[f - 1].size())) ? -1 : p;
            }
        }
    }

    std::vector<double> frame_lag(n_frames, 0.0);
    for (std::size_t f = 0; f < n_frames; ++f) {
        double score = 0.0;
        if (!candidates[f].empty()) score = candidates[f].front().score;
        if (path[f] >= 0) {
            const auto& c = candidates[f][static_cast<std::size_t>(path[f])];
            score = c.score;
            frame_lag[f] = c.lag;
            track.voicing[f] =
                c.score >= cfg.voicing_ncc_threshold && frame_rms[f] >= rms_gate && clip_rms > 0.0;
        }
        track.periodicity[f] = std::clamp(score, 0.0, 1.0);
    }

    // Epoch synthesis per voiced run.
    const double half_win_s = 0.5 * static_cast<double>(win) / rate;
    const double hop_s = static_cast<double>(hop) / rate;
    const double t_min_period = 1.0 / cfg.f0_max_hz;
    const double t_max_period = 1.0 / cfg.f0_min_hz;

    const auto frame_center = [&](std::size_t f) { return track.frame_times[f] + half_win_s; };

    // Amplitude envelope: rectified signal under a ~3 ms Hann. Formant
    // ringing puts several |x| peaks inside one glottal cycle; the envelope
    // has a single hump per cycle, anchored to the excitation.
    std::vector<double> envelope(n, 0.0);
    {
        const auto w = static_cast<std::ptrdiff_t>(std::llround(0.0015 * rate));
        std::vector<double> weights(static_cast<std::size_t>(2 * w + 1));
        for (std::ptrdiff_t m = -w; m <= w; ++m) {
            weights[static_cast<std::size_t>(m + w)] =
                0.5 + 0.5 * std::cos(dsp::kPi * static_cast<double>(m) / static_cast<double>(w + 1));
        }
        for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
            double acc = 0.0;
            for (std::ptrdiff_t m = -w; m <= w; ++m) {
                const std::ptrdiff_t j = i + m;
                if (j >= 0 && j < static_cast<std::ptrdiff_t>(n)) {
                    acc += weights[static_cast<std::size_t>(m + w)] *
                           std::abs(clip.samples[static_cast<std::size_t>(j)]);
                }
            }
            envelope[static_cast<std::size_t>(i)] = acc;
        }
    }

    // Snap a predicted epoch to the strongest envelope peak nearby, with a
    // parabolic sub-sample refinement. Step snaps stay within a fifth of a
    // period so neighbouring pulses cannot capture the epoch; the run anchor
    // searches a full period to start on a real excitation peak.
    const auto snap_to_peak = [&](double t_pred, double span) {
        auto lo = static_cast<std::ptrdiff_t>(std::ceil((t_pred - span) * rate));
        auto hi = static_cast<std::ptrdiff_t>(std::floor((t_pred + span) * rate));
        lo = std::max<std::ptrdiff_t>(lo, 0);
        hi = std::min<std::ptrdiff_t>(hi, static_cast<std::ptrdiff_t>(n) - 1);
        if (lo > hi) return t_pred;
        std::ptrdiff_t arg = lo;
        for (std::ptrdiff_t i = lo; i <= hi; ++i) {
            if (envelope[static_cast<std::size_t>(i)] > envelope[static_cast<std::size_t>(arg)]) {
                arg = i;
            }
        }
        double refined = static_cast<double>(arg);
        if (arg > 0 && arg + 1 < static_cast<std::ptrdiff_t>(n)) {
            refined += detail::parabolic_offset(envelope[static_cast<std::size_t>(arg - 1)],
                                                envelope[static_cast<std::size_t>(arg)],
                                                envelope[static_cast<std::size_t>(arg + 1)]);
        }
        return refined / rate;
    };

    std::size_t f = 0;
    while (f < n_frames) {
        if (!track.voicing[f]) {
            ++f;
            continue;
        }
        std::size_t run_end = f;
        while (run_end + 1 < n_frames && track.voicing[run_end + 1]) ++run_end;

        std::size_t peak = f;
        for (std::size_t i = f; i <= run_end; ++i) {
            if (track.periodicity[i] > track.periodicity[peak]) peak = i;
        }
        const auto period_at = [&](double t) {
            const double pos = (t - frame_center(f)) / hop_s;
            const auto idx = static_cast<std::size_t>(
                std::clamp(std::llround(pos), 0LL,
                           static_cast<long long>(run_end - f)));
            const double lag = frame_lag[f + idx];
            const double p = (lag > 0.0) ? lag / rate : t_min_period;
            return std::clamp(p, t_min_period, t_max_period);
        };

        const double t_lo = std::max(0.0, frame_center(f) - 0.5 * hop_s);
        const double t_hi = std::min(static_cast<double>(n - 1) / rate,
                                     frame_center(run_end) + 0.5 * hop_s);

        std::vector<double> epochs;
        const double anchor_period = period_at(frame_center(peak));
        const double t_anchor =
            snap_to_peak(frame_center(peak), 0.5 * anchor_period);
        epochs.push_back(t_anchor);
        // forward
        double t = t_anchor;
        while (true) {
            const double p = period_at(t);
            const double pred = t + p;
            if (pred > t_hi) break;
            double next = snap_to_peak(pred, p / 5.0);
            next = std::clamp(next, t + std::max(t_min_period, 0.8 * p),
                              t + std::min(t_max_period, 1.25 * p));
            epochs.push_back(next);
            t = next;
        }
        // backward
        t = t_anchor;
        while (true) {
            const double p = period_at(t);
            const double pred = t - p;
            if (pred < t_lo) break;
            double prev = snap_to_peak(pred, p / 5.0);
            prev = std::clamp(prev, t - std::min(t_max_period, 1.25 * p),
                              t - std::max(t_min_period, 0.8 * p));
            epochs.insert(epochs.begin(), prev);
            t = prev;
        }

        track.run_starts.push_back(track.epoch_times.size());
        track.epoch_times.insert(track.epoch_times.end(), epochs.begin(), epochs.end());
        f = run_end + 1;
    }
    return track;
}

namespace detail {

inline std::vector<double> period_frequencies(const EpochTrack& track, std::size_t min_periods) {
    const std::vector<double> periods = track.periods();
    if (periods.size() < min_periods) {
        throw InsufficientVoicingError("need at least " + std::to_string(min_periods) +
                                       " pitch periods, have " + std::to_string(periods.size()));
    }
    std::vector<double> freqs(periods.size());
    for (std::size_t i = 0; i < periods.size(); ++i) freqs[i] = 1.0 / periods[i];
    return freqs;
}

}  // namespace detail

// Median F0 in semitones re 1 Hz.
inline double fx_median(const EpochTrack& track) {
    const auto freqs = detail::period_frequencies(track, 10);
    return semitones_from_hz(median_of(freqs));
}

// F0 interquartile range in semitones: 12 log2(Q3/Q1), type-7 quartiles.
inline double fx_iqr(const EpochTrack& track) {
    const auto freqs = detail::period_frequencies(track, 10);
    const double q1 = quantile_type7(freqs, 0.25);
    const double q3 = quantile_type7(freqs, 0.75);
    return 12.0 * std::log2(q3 / q1);
}

// Period perturbation quotient, percent. Each period is compared with the
// mean of its neighbourhood of 2k+1 periods; windows never straddle a voiced
// run boundary, the denominator is the run's mean period, and runs combine
// weighted by their window counts.
inline double ppq(const EpochTrack& track, int half_width = 2) {
    if (half_width < 1) throw RangeError("ppq: half_width must be >= 1");
    const std::size_t k = static_cast<std::size_t>(half_width);
    double weighted = 0.0;
    std::size_t total_windows = 0;
    for (const auto& run : track.run_periods()) {
        if (run.size() < 2 * k + 1) continue;
        const double run_mean = mean_of(run);
        if (run_mean <= 0.0) continue;
        double dev_sum = 0.0;
        std::size_t windows = 0;
        for (std::size_t i = k; i + k < run.size(); ++i) {
            double local = 0.0;
            for (std::size_t j = i - k; j <= i + k; ++j) local += run[j];
            local /= static_cast<double>(2 * k + 1);
            dev_sum += std::abs(run[i] - local);
            ++windows;
        }
        weighted += 100.0 * (dev_sum / static_cast<double>(windows)) / run_mean *
                    static_cast<double>(windows);
        total_windows += windows;
    }
    if (total_windows == 0) {
        throw InsufficientVoicingError("ppq: no voiced run with " +
                                       std::to_string(2 * k + 1) + " consecutive periods");
    }
    return weighted / static_cast<double>(total_windows);
}

}  // namespace voiceprobe
