#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <vector>

#include "voiceprobe/errors.hpp"

namespace voiceprobe {
namespace dsp {

inline constexpr double kPi = 3.14159265358979323846264338327950288;

inline std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

// In-place radix-2 Cooley-Tukey. Size must be a power of two.
inline void fft_inplace(std::vector<std::complex<double>>& x, bool inverse = false) {
    const std::size_t n = x.size();
    if (n <= 1) return;
    if ((n & (n - 1)) != 0) throw RangeError("fft size must be a power of two");

    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(x[i], x[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = (inverse ? 2.0 : -2.0) * kPi / static_cast<double>(len);
        const std::complex<double> wlen(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                const std::complex<double> u = x[i + k];
                const std::complex<double> v = x[i + k + len / 2] * w;
                x[i + k] = u + v;
                x[i + k + len / 2] = u - v;
                w *= wlen;
            }
        }
    }
    if (inverse) {
        const double inv = 1.0 / static_cast<double>(n);
        for (auto& v : x) v *= inv;
    }
}

// Periodic Hann: w[n] = 0.5 - 0.5 cos(2 pi n / N).
inline std::vector<double> hann_window(std::size_t n) {
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i) {
        w[i] = 0.5 - 0.5 * std::cos(2.0 * kPi * static_cast<double>(i) / static_cast<double>(n));
    }
    return w;
}

inline double sinc(double x) {
    if (std::abs(x) < 1e-12) return 1.0;
    return std::sin(kPi * x) / (kPi * x);
}

// Modified Bessel function of the first kind, order zero (power series).
inline double bessel_i0(double x) {
    const double half_sq = 0.25 * x * x;
    double term = 1.0;
    double sum = 1.0;
    for (int k = 1; k < 64; ++k) {
        term *= half_sq / (static_cast<double>(k) * static_cast<double>(k));
        sum += term;
        if (term < 1e-14 * sum) break;
    }
    return sum;
}

// Windowed-sinc rate conversion. Kaiser-windowed kernel, 16 taps per branch
// at the output rate; the support stretches by 1/cutoff when decimating so
// the kernel doubles as the anti-alias filter. Per-position weight
// normalization keeps DC flat at the edges.
inline std::vector<double> resample_sinc(const std::vector<double>& x, int src_rate,
                                         int dst_rate, double kaiser_beta = 8.6) {
    if (src_rate == dst_rate) return x;
    const double ratio = static_cast<double>(dst_rate) / static_cast<double>(src_rate);
    const double cutoff = std::min(1.0, ratio);
    const double half = 8.0 / cutoff;  // half-support in input samples
    const double i0_beta = bessel_i0(kaiser_beta);
    const auto n_in = static_cast<std::ptrdiff_t>(x.size());
    const auto n_out = static_cast<std::size_t>(
        std::llround(static_cast<double>(x.size()) * ratio));

    std::vector<double> y(n_out, 0.0);
    for (std::size_t n = 0; n < n_out; ++n) {
        const double t = static_cast<double>(n) / ratio;
        const auto k_lo = static_cast<std::ptrdiff_t>(std::ceil(t - half));
        const auto k_hi = static_cast<std::ptrdiff_t>(std::floor(t + half));
        double acc = 0.0;
        double wsum = 0.0;
        for (std::ptrdiff_t k = k_lo; k <= k_hi; ++k) {
            const double u = t - static_cast<double>(k);
            const double frac = u / half;
            const double win = bessel_i0(kaiser_beta * std::sqrt(std::max(0.0, 1.0 - frac * frac))) / i0_beta;
            const double w = cutoff * sinc(cutoff * u) * win;
            wsum += w;
            if (k >= 0 && k < n_in) acc += w * x[static_cast<std::size_t>(k)];
        }
        y[n] = (wsum != 0.0) ? acc / wsum : 0.0;
    }
    return y;
}

// Levinson-Durbin recursion. Returns {1, a1, .., ap} for the prediction
// polynomial A(z) = 1 + sum a_i z^-i and the final prediction error.
inline std::vector<double> levinson(const std::vector<double>& autocorr, int order,
                                    double* out_error = nullptr) {
    if (static_cast<int>(autocorr.size()) < order + 1) {
        throw RangeError("levinson: need order+1 autocorrelation lags");
    }
    std::vector<double> a(static_cast<std::size_t>(order) + 1, 0.0);
    a[0] = 1.0;
    double err = autocorr[0];
    if (err <= 0.0) {
        if (out_error) *out_error = 0.0;
        return a;  // silent frame, trivial predictor
    }
    std::vector<double> prev(a);
    for (int m = 1; m <= order; ++m) {
        double acc = autocorr[static_cast<std::size_t>(m)];
        for (int i = 1; i < m; ++i) {
            acc += a[static_cast<std::size_t>(i)] * autocorr[static_cast<std::size_t>(m - i)];
        }
        const double k = -acc / err;
        prev = a;
        for (int i = 1; i < m; ++i) {
            a[static_cast<std::size_t>(i)] = prev[static_cast<std::size_t>(i)] +
                                             k * prev[static_cast<std::size_t>(m - i)];
        }
        a[static_cast<std::size_t>(m)] = k;
        err *= (1.0 - k * k);
        if (err <= 0.0) {
            err = 0.0;
            break;
        }
    }
    if (out_error) *out_error = err;
    return a;
}

// Magnitude envelope of the band-limited analytic signal. The band
// [f_lo, f_hi) is selected in the frequency domain, negative frequencies are
// dropped and positive ones doubled, so one inverse FFT yields the analytic
// signal of the band-passed input.
inline std::vector<double> band_envelope(const std::vector<double>& x, double sample_rate,
                                         double f_lo, double f_hi) {
    const std::size_t n = x.size();
    if (n == 0) return {};
    const std::size_t m = next_pow2(n);
    std::vector<std::complex<double>> z(m, {0.0, 0.0});
    for (std::size_t i = 0; i < n; ++i) z[i] = {x[i], 0.0};
    fft_inplace(z);
    const double bin_hz = sample_rate / static_cast<double>(m);
    for (std::size_t k = 0; k < m; ++k) {
        const double f = static_cast<double>(k) * bin_hz;
        const bool positive_band = (k > 0 && k < m / 2 && f >= f_lo && f < f_hi);
        if (positive_band) {
            z[k] *= 2.0;
        } else {
            z[k] = {0.0, 0.0};
        }
    }
    fft_inplace(z, true);
    std::vector<double> env(n);
    for (std::size_t i = 0; i < n; ++i) env[i] = std::abs(z[i]);
    return env;
}

// Linear cross-correlation r[tau] = sum_{i<len_a} a[i]*b[i+tau], tau in
// [0, max_lag], computed via FFT. b must be at least len_a + max_lag long.
inline std::vector<double> cross_correlate(const std::vector<double>& a,
                                           const std::vector<double>& b,
                                           std::size_t max_lag) {
    if (b.size() < a.size() + max_lag) {
        throw RangeError("cross_correlate: b shorter than len(a) + max_lag");
    }
    const std::size_t m = next_pow2(a.size() + max_lag + 1);
    std::vector<std::complex<double>> fa(m, {0.0, 0.0});
    std::vector<std::complex<double>> fb(m, {0.0, 0.0});
    for (std::size_t i = 0; i < a.size(); ++i) fa[i] = {a[i], 0.0};
    for (std::size_t i = 0; i < b.size() && i < m; ++i) fb[i] = {b[i], 0.0};
    fft_inplace(fa);
    fft_inplace(fb);
    for (std::size_t k = 0; k < m; ++k) fa[k] = std::conj(fa[k]) * fb[k];
    fft_inplace(fa, true);
    std::vector<double> r(max_lag + 1);
    for (std::size_t tau = 0; tau <= max_lag; ++tau) r[tau] = fa[tau].real();
    return r;
}

inline void preemphasis_inplace(std::vector<double>& x, double coeff) {
    for (std::size_t i = x.size(); i > 1; --i) {
        x[i - 1] -= coeff * x[i - 2];
    }
}

}  // namespace dsp
}  // namespace voiceprobe
