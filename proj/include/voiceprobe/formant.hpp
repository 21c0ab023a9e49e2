#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <vector>

#include "voiceprobe/audio.hpp"
#include "voiceprobe/dsp.hpp"
#include "voiceprobe/errors.hpp"
#include "voiceprobe/pitch.hpp"

namespace voiceprobe {

struct FormantConfig {
    int lpc_order = 18;  // rule of thumb: rate/1000 + 2 at 16 kHz
    double formant_bw_max_hz = 400.0;
    double speed_of_sound_mps = 350.0;
    double preemphasis = 0.97;
    double freq_min_hz = 90.0;
    double freq_max_hz = 5500.0;
    double f1_reliable_max_hz = 1200.0;
    double vtl_min_cm = 8.0;
    double vtl_max_cm = 25.0;
    double frame_window_s = 0.025;
    double frame_hop_s = 0.010;
};

struct FormantFrame {
    double time = 0.0;
    std::array<double, 4> freqs{};       // F1..F4, Hz, ascending
    std::array<double, 4> bandwidths{};  // B1..B4, Hz
    bool reliable = false;
};

namespace detail {

// Roots of 1 + a1 z^-1 + ... + ap z^-p via the companion matrix of the
// monic polynomial z^p + a1 z^(p-1) + ... + ap.
inline std::vector<std::complex<double>> lpc_roots(const std::vector<double>& lpc) {
    const std::size_t p = lpc.size() - 1;
    Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(p),
                                                      static_cast<Eigen::Index>(p));
    for (std::size_t i = 1; i < p; ++i) {
        companion(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i - 1)) = 1.0;
    }
    for (std::size_t i = 0; i < p; ++i) {
        // coefficient of z^i is lpc[p - i]
        companion(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(p - 1)) =
            -lpc[p - i];
    }
    Eigen::EigenSolver<Eigen::MatrixXd> solver(companion, /*computeEigenvectors=*/false);
    std::vector<std::complex<double>> roots;
    roots.reserve(p);
    for (Eigen::Index i = 0; i < solver.eigenvalues().size(); ++i) {
        roots.push_back(solver.eigenvalues()(i));
    }
    return roots;
}

}  // namespace detail

// Per-frame formants from LPC root pairs in voiced frames: pre-emphasis,
// 25 ms Hann window, autocorrelation LPC, roots kept when the mapped
// frequency sits in the speech band with bandwidth under the threshold.
// A frame is reliable when four such roots exist and F1 stays vocalic
// (below the F1 ceiling).
inline std::vector<FormantFrame> estimate_formants(const AudioClip& clip,
                                                   const EpochTrack& track,
                                                   const FormantConfig& cfg = {}) {
    const std::size_t n_voiced =
        static_cast<std::size_t>(std::count(track.voicing.begin(), track.voicing.end(), true));
    if (n_voiced < 5) {
        throw InsufficientVoicingError("estimate_formants: need at least 5 voiced frames");
    }
    AudioClip emphasized = clip;
    dsp::preemphasis_inplace(emphasized.samples, cfg.preemphasis);
    const FrameSequence frames =
        frame_signal(emphasized, cfg.frame_window_s, cfg.frame_hop_s, WindowShape::hann);

    const int rate = clip.sample_rate;
    const std::size_t order = static_cast<std::size_t>(cfg.lpc_order);
    std::vector<FormantFrame> out;
    const std::size_t count = std::min(frames.frames.size(), track.voicing.size());
    for (std::size_t f = 0; f < count; ++f) {
        if (!track.voicing[f]) continue;
        const auto& frame = frames.frames[f];
        std::vector<double> autocorr(order + 1, 0.0);
        for (std::size_t lag = 0; lag <= order; ++lag) {
            double acc = 0.0;
            for (std::size_t i = lag; i < frame.size(); ++i) acc += frame[i] * frame[i - lag];
            autocorr[lag] = acc;
        }
        if (autocorr[0] < 1e-20) continue;
        const std::vector<double> lpc = dsp::levinson(autocorr, cfg.lpc_order);

        std::vector<std::pair<double, double>> resonances;  // (freq, bandwidth)
        for (const auto& root : detail::lpc_roots(lpc)) {
            if (root.imag() <= 0.0) continue;  // keep one of each conjugate pair
            const double mag = std::abs(root);
            if (mag <= 0.0 || mag >= 1.0) continue;
            const double freq = std::atan2(root.imag(), root.real()) * rate / (2.0 * dsp::kPi);
            const double bw = -std::log(mag) * rate / dsp::kPi;
            if (freq >= cfg.freq_min_hz && freq <= cfg.freq_max_hz &&
                bw < cfg.formant_bw_max_hz) {
                resonances.emplace_back(freq, bw);
            }
        }
        if (resonances.size() < 4) continue;
        std::sort(resonances.begin(), resonances.end());

        FormantFrame ff;
        ff.time = frames.start_times[f];
        for (std::size_t i = 0; i < 4; ++i) {
            ff.freqs[i] = resonances[i].first;
            ff.bandwidths[i] = resonances[i].second;
        }
        ff.reliable = ff.freqs[0] < cfg.f1_reliable_max_hz;
        out.push_back(ff);
    }
    return out;
}

// Length of the half-open (quarter-wave) tube best fitting four resonances.
// The model F_n = (2n-1) c / (4L) is linear in x = c/(4L), so the
// least-squares fit is closed-form: x* = sum (2n-1) F_n / sum (2n-1)^2.
inline double tube_fit_length(const std::array<double, 4>& freqs,
                              double speed_of_sound_mps = 350.0) {
    if (!(freqs[0] > 0.0 && freqs[0] < freqs[1] && freqs[1] < freqs[2] &&
          freqs[2] < freqs[3])) {
        throw InvalidFormantsError("tube_fit_length: formants must be positive and increasing");
    }
    double num = 0.0, den = 0.0;
    for (int n = 1; n <= 4; ++n) {
        const double odd = 2.0 * n - 1.0;
        num += odd * freqs[static_cast<std::size_t>(n - 1)];
        den += odd * odd;
    }
    const double x = num / den;              // c / (4L) in Hz
    return 100.0 * speed_of_sound_mps / (4.0 * x);
}

// Mean tube length over reliable formant frames, cm. Frames mapping outside
// the plausible tract range are excluded from the mean.
inline double vtlen_from_frames(const std::vector<FormantFrame>& frames,
                                const FormantConfig& cfg = {}) {
    std::size_t reliable = 0;
    std::vector<double> lengths;
    for (const auto& f : frames) {
        if (!f.reliable) continue;
        ++reliable;
        const double len = tube_fit_length(f.freqs, cfg.speed_of_sound_mps);
        if (len >= cfg.vtl_min_cm && len <= cfg.vtl_max_cm) lengths.push_back(len);
    }
    if (reliable < 10 || lengths.empty()) {
        throw InsufficientFormantsError("vtlen: need at least 10 reliable formant frames, have " +
                                        std::to_string(reliable));
    }
    return mean_of(lengths);
}

inline double vtlen(const AudioClip& clip, const EpochTrack& track,
                    const FormantConfig& cfg = {}) {
    return vtlen_from_frames(estimate_formants(clip, track, cfg), cfg);
}

}  // namespace voiceprobe
