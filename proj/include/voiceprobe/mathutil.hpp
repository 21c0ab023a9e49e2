#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "voiceprobe/errors.hpp"

namespace voiceprobe {

inline double mean_of(const std::vector<double>& v) {
    if (v.empty()) throw EmptyInputError("mean of empty sequence");
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

inline double sample_sd(const std::vector<double>& v) {
    if (v.size() < 2) throw EmptyInputError("sd needs at least 2 values");
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

// Type-7 quantile (linear interpolation between order statistics), the
// common default in statistical software. p in [0, 1].
inline double quantile_type7(std::vector<double> values, double p) {
    if (values.empty()) throw EmptyInputError("quantile of empty sequence");
    if (p < 0.0 || p > 1.0) throw RangeError("quantile p outside [0,1]");
    std::sort(values.begin(), values.end());
    const double h = p * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    if (lo + 1 >= values.size()) return values.back();
    const double frac = h - static_cast<double>(lo);
    return values[lo] + frac * (values[lo + 1] - values[lo]);
}

inline double median_of(const std::vector<double>& v) { return quantile_type7(v, 0.5); }

// Pearson correlation; returns 0 when either side is constant (the
// convention used for held-out scores of intercept-only models).
inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw RangeError("pearson: length mismatch");
    if (a.size() < 2) throw EmptyInputError("pearson needs at least 2 pairs");
    const double ma = mean_of(a);
    const double mb = mean_of(b);
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    if (saa <= 0.0 || sbb <= 0.0) return 0.0;
    return sab / std::sqrt(saa * sbb);
}

inline double semitones_from_hz(double f_hz) {
    // 12 * log2(f / 1 Hz); the reference cancels downstream after z-scoring.
    return 12.0 * std::log2(f_hz);
}

}  // namespace voiceprobe
