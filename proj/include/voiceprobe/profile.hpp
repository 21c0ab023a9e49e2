#pragma once

#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "voiceprobe/audio.hpp"
#include "voiceprobe/csv.hpp"
#include "voiceprobe/errors.hpp"
#include "voiceprobe/formant.hpp"
#include "voiceprobe/mathutil.hpp"
#include "voiceprobe/pitch.hpp"
#include "voiceprobe/spectral.hpp"

namespace voiceprobe {

enum Descriptor : int {
    kFxMedian = 0,
    kFxIqr,
    kPpq,
    kGne,
    kSlope,
    kVtlen,
    kLevel,
    kStoi,
    kPesq,
    kDescriptorCount
};

inline constexpr std::array<const char*, kDescriptorCount> kDescriptorNames = {
    "fxmedian", "fxiqr", "ppq", "gne", "slope", "vtlen", "level", "stoi", "pesq"};

inline int descriptor_from_name(const std::string& name) {
    for (int i = 0; i < kDescriptorCount; ++i) {
        if (name == kDescriptorNames[static_cast<std::size_t>(i)]) return i;
    }
    throw RangeError("unknown descriptor '" + name + "'");
}

enum class FieldStatus { ok, absent, insufficient_voicing, insufficient_formants, minus_infinity };

// The nine per-recording descriptors. STOI and PESQ come from an external
// sidecar; acoustic fields turn absent (with a status) when a recording has
// too little voiced or vocalic material.
struct AcousticProfile {
    std::array<std::optional<double>, kDescriptorCount> values{};
    std::array<FieldStatus, kDescriptorCount> status{
        FieldStatus::absent, FieldStatus::absent, FieldStatus::absent,
        FieldStatus::absent, FieldStatus::absent, FieldStatus::absent,
        FieldStatus::absent, FieldStatus::absent, FieldStatus::absent};

    void set(int d, double v) {
        values[static_cast<std::size_t>(d)] = v;
        status[static_cast<std::size_t>(d)] = FieldStatus::ok;
    }
    void mark(int d, FieldStatus s) { status[static_cast<std::size_t>(d)] = s; }
    std::optional<double> get(int d) const { return values[static_cast<std::size_t>(d)]; }
    bool has(int d) const { return values[static_cast<std::size_t>(d)].has_value(); }
};

enum class Gender { male, female, unknown };

inline std::string gender_name(Gender g) {
    switch (g) {
        case Gender::male: return "male";
        case Gender::female: return "female";
        default: return "unknown";
    }
}

inline Gender parse_gender(const std::string& s) {
    if (s == "male" || s == "m" || s == "M") return Gender::male;
    if (s == "female" || s == "f" || s == "F") return Gender::female;
    if (s.empty() || s == "unknown") return Gender::unknown;
    throw FormatError("bad gender value '" + s + "'");
}

struct SpeakerRecord {
    std::string speaker_id;
    Gender gender = Gender::unknown;
    std::optional<double> age_years;
    std::vector<AcousticProfile> profiles;
    AcousticProfile mean_profile;
};

struct SidecarRecord {
    std::optional<double> stoi;
    std::optional<double> pesq;
};

struct AnalysisConfig {
    PitchConfig pitch;
    SpectralConfig spectral;
    FormantConfig formant;
};

// Run the full descriptor battery on one recording. Per-field shortfalls
// (too little voicing, too few reliable formant frames, silent signal)
// leave the field absent with a status rather than failing the recording.
inline AcousticProfile analyze_recording(const AudioClip& clip,
                                         const std::optional<SidecarRecord>& sidecar = {},
                                         const AnalysisConfig& cfg = {}) {
    AcousticProfile p;
    const EpochTrack track = track_pitch(clip, cfg.pitch);

    try {
        p.set(kFxMedian, fx_median(track));
    } catch (const InsufficientVoicingError&) {
        p.mark(kFxMedian, FieldStatus::insufficient_voicing);
    }
    try {
        p.set(kFxIqr, fx_iqr(track));
    } catch (const InsufficientVoicingError&) {
        p.mark(kFxIqr, FieldStatus::insufficient_voicing);
    }
    try {
        p.set(kPpq, ppq(track, cfg.pitch.ppq_half_width));
    } catch (const InsufficientVoicingError&) {
        p.mark(kPpq, FieldStatus::insufficient_voicing);
    }
    try {
        p.set(kGne, gne(clip, track, cfg.spectral));
    } catch (const InsufficientVoicingError&) {
        p.mark(kGne, FieldStatus::insufficient_voicing);
    }
    try {
        p.set(kSlope, spectral_slope(clip, track, cfg.spectral));
    } catch (const InsufficientVoicingError&) {
        p.mark(kSlope, FieldStatus::insufficient_voicing);
    }
    try {
        p.set(kVtlen, vtlen(clip, track, cfg.formant));
    } catch (const InsufficientVoicingError&) {
        p.mark(kVtlen, FieldStatus::insufficient_voicing);
    } catch (const InsufficientFormantsError&) {
        p.mark(kVtlen, FieldStatus::insufficient_formants);
    }
    try {
        p.set(kLevel, level_db(clip));
    } catch (const MinusInfinityError&) {
        p.mark(kLevel, FieldStatus::minus_infinity);
    }
    if (sidecar) {
        if (sidecar->stoi) p.set(kStoi, *sidecar->stoi);
        if (sidecar->pesq) p.set(kPesq, *sidecar->pesq);
    }
    return p;
}

// Field-wise arithmetic mean over segments; a field is present in the mean
// when present in at least one segment.
inline AcousticProfile aggregate_speaker(const std::vector<AcousticProfile>& profiles) {
    if (profiles.empty()) throw EmptyInputError("aggregate_speaker: no profiles");
    AcousticProfile out;
    for (int d = 0; d < kDescriptorCount; ++d) {
        double acc = 0.0;
        std::size_t count = 0;
        for (const auto& p : profiles) {
            if (p.has(d)) {
                acc += *p.get(d);
                ++count;
            }
        }
        if (count > 0) out.set(d, acc / static_cast<double>(count));
    }
    return out;
}

enum class Transform { identity, log10, logit };

inline const char* transform_name(Transform t) {
    switch (t) {
        case Transform::log10: return "log10";
        case Transform::logit: return "logit";
        default: return "identity";
    }
}

// Per-descriptor transform ahead of z-scoring: log10 for the right-skewed
// positive descriptors, logit for bounded scores, identity elsewhere.
inline Transform default_transform(int d) {
    switch (d) {
        case kPpq:
        case kFxIqr: return Transform::log10;
        case kGne:
        case kStoi: return Transform::logit;
        default: return Transform::identity;
    }
}

inline double apply_transform(Transform t, double v) {
    switch (t) {
        case Transform::log10:
            return std::log10(std::max(v, 1e-6));  // degenerate-zero guard
        case Transform::logit: {
            const double c = std::clamp(v, 1e-4, 1.0 - 1e-4);
            return std::log(c / (1.0 - c));
        }
        default: return v;
    }
}

// Fitted cohort normalizer: transform then z-score with the fitting cohort's
// mean and SD per descriptor. Strictly monotone, so speaker rank order per
// column is preserved.
struct Normalizer {
    std::vector<int> descriptors;
    std::vector<Transform> transforms;
    std::vector<double> means;
    std::vector<double> sds;

    double apply(std::size_t col, double raw) const {
        return (apply_transform(transforms[col], raw) - means[col]) / sds[col];
    }
};

struct NormalizedMatrix {
    std::vector<std::string> speaker_ids;       // rows, fitting cohort order
    std::vector<int> descriptors;               // column -> Descriptor
    std::vector<std::vector<double>> values;    // [row][col], transformed + z-scored
    std::vector<std::string> dropped_speakers;  // missing a modeled field
    Normalizer normalizer;
};

inline std::vector<int> all_descriptors() {
    std::vector<int> d(kDescriptorCount);
    for (int i = 0; i < kDescriptorCount; ++i) d[static_cast<std::size_t>(i)] = i;
    return d;
}

// Build the cohort modeling matrix. Speakers missing any modeled descriptor
// are dropped (no imputation) and reported.
inline NormalizedMatrix fit_normalizer(const std::vector<SpeakerRecord>& records,
                                       const std::vector<int>& descriptors = all_descriptors()) {
    NormalizedMatrix m;
    m.descriptors = descriptors;
    std::vector<std::vector<double>> raw;
    for (const auto& rec : records) {
        std::vector<double> row;
        bool complete = true;
        for (int d : descriptors) {
            if (!rec.mean_profile.has(d)) {
                complete = false;
                break;
            }
            row.push_back(*rec.mean_profile.get(d));
        }
        if (complete) {
            m.speaker_ids.push_back(rec.speaker_id);
            raw.push_back(std::move(row));
        } else {
            m.dropped_speakers.push_back(rec.speaker_id);
        }
    }
    if (raw.size() < 10) {
        throw InsufficientDataError("fit_normalizer: need at least 10 complete speakers, have " +
                                    std::to_string(raw.size()));
    }

    const std::size_t n = raw.size();
    const std::size_t p = descriptors.size();
    m.normalizer.descriptors = descriptors;
    m.normalizer.transforms.resize(p);
    m.normalizer.means.resize(p);
    m.normalizer.sds.resize(p);
    m.values.assign(n, std::vector<double>(p, 0.0));

    for (std::size_t c = 0; c < p; ++c) {
        const Transform t = default_transform(descriptors[c]);
        m.normalizer.transforms[c] = t;
        std::vector<double> col(n);
        for (std::size_t r = 0; r < n; ++r) col[r] = apply_transform(t, raw[r][c]);
        const double mu = mean_of(col);
        double ss = 0.0;
        for (double v : col) ss += (v - mu) * (v - mu);
        const double sd = std::sqrt(ss / static_cast<double>(n - 1));
        if (!(sd > 1e-12)) {
            throw ZeroVarianceError(std::string("fit_normalizer: zero variance in '") +
                                    kDescriptorNames[static_cast<std::size_t>(descriptors[c])] +
                                    "'");
        }
        m.normalizer.means[c] = mu;
        m.normalizer.sds[c] = sd;
        for (std::size_t r = 0; r < n; ++r) m.values[r][c] = (col[r] - mu) / sd;
    }
    return m;
}

// ---------------------------------------------------------------------------
// File formats

struct FeatureRow {
    std::string speaker_id;
    std::string segment_id;
    AcousticProfile profile;
};

inline std::vector<std::string> feature_header() {
    std::vector<std::string> h = {"speaker_id", "segment_id"};
    for (const char* name : kDescriptorNames) h.emplace_back(name);
    return h;
}

inline void write_features(const std::string& path, const std::vector<FeatureRow>& rows) {
    std::vector<std::vector<std::string>> cells;
    for (const auto& row : rows) {
        std::vector<std::string> r = {row.speaker_id, row.segment_id};
        for (int d = 0; d < kDescriptorCount; ++d) {
            r.push_back(row.profile.has(d) ? csv::format_double(*row.profile.get(d)) : "");
        }
        cells.push_back(std::move(r));
    }
    csv::write_file(path, feature_header(), cells);
}

inline std::vector<FeatureRow> read_features(const std::string& path) {
    const csv::Table t = csv::read_file(path);
    const int c_speaker = t.require_column("speaker_id", path);
    const int c_segment = t.require_column("segment_id", path);
    std::array<int, kDescriptorCount> cols{};
    for (int d = 0; d < kDescriptorCount; ++d) {
        cols[static_cast<std::size_t>(d)] =
            t.require_column(kDescriptorNames[static_cast<std::size_t>(d)], path);
    }
    std::vector<FeatureRow> rows;
    for (const auto& r : t.rows) {
        FeatureRow row;
        row.speaker_id = r[static_cast<std::size_t>(c_speaker)];
        row.segment_id = r[static_cast<std::size_t>(c_segment)];
        for (int d = 0; d < kDescriptorCount; ++d) {
            const std::string& cell = r[static_cast<std::size_t>(cols[static_cast<std::size_t>(d)])];
            if (!cell.empty()) row.profile.set(d, csv::parse_double(cell, path));
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

struct MetadataRecord {
    Gender gender = Gender::unknown;
    std::optional<double> age_years;
};

// speaker_id,gender,age with one row per speaker.
inline std::map<std::string, MetadataRecord> read_metadata(const std::string& path) {
    const csv::Table t = csv::read_file(path);
    const int c_speaker = t.require_column("speaker_id", path);
    const int c_gender = t.require_column("gender", path);
    const int c_age = t.require_column("age", path);
    std::map<std::string, MetadataRecord> out;
    for (const auto& r : t.rows) {
        const std::string& id = r[static_cast<std::size_t>(c_speaker)];
        if (out.count(id)) throw FormatError(path + ": duplicate speaker_id '" + id + "'");
        MetadataRecord rec;
        rec.gender = parse_gender(r[static_cast<std::size_t>(c_gender)]);
        const std::string& age = r[static_cast<std::size_t>(c_age)];
        if (!age.empty()) {
            const double a = csv::parse_double(age, path);
            if (a <= 0.0) throw FormatError(path + ": non-positive age for '" + id + "'");
            rec.age_years = a;
        }
        out[id] = rec;
    }
    return out;
}

// segment_id,stoi,pesq: the externally computed quality estimates.
inline std::map<std::string, SidecarRecord> read_sidecar(const std::string& path) {
    const csv::Table t = csv::read_file(path);
    const int c_segment = t.require_column("segment_id", path);
    const int c_stoi = t.require_column("stoi", path);
    const int c_pesq = t.require_column("pesq", path);
    std::map<std::string, SidecarRecord> out;
    for (const auto& r : t.rows) {
        SidecarRecord rec;
        const std::string& stoi = r[static_cast<std::size_t>(c_stoi)];
        const std::string& pesq = r[static_cast<std::size_t>(c_pesq)];
        if (!stoi.empty()) {
            const double v = csv::parse_double(stoi, path);
            if (v < 0.0 || v > 1.0) throw FormatError(path + ": stoi outside [0,1]");
            rec.stoi = v;
        }
        if (!pesq.empty()) {
            const double v = csv::parse_double(pesq, path);
            if (v < 1.0 || v > 5.0) throw FormatError(path + ": pesq outside [1,5]");
            rec.pesq = v;
        }
        out[r[static_cast<std::size_t>(c_segment)]] = rec;
    }
    return out;
}

inline std::vector<std::string> speaker_header() {
    std::vector<std::string> h = {"speaker_id", "gender", "age", "n_segments"};
    for (const char* name : kDescriptorNames) h.emplace_back(name);
    return h;
}

inline void write_speakers(const std::string& path, const std::vector<SpeakerRecord>& records) {
    std::vector<std::vector<std::string>> cells;
    for (const auto& rec : records) {
        std::vector<std::string> r = {rec.speaker_id, gender_name(rec.gender),
                                      rec.age_years ? csv::format_double(*rec.age_years) : "",
                                      std::to_string(rec.profiles.size())};
        for (int d = 0; d < kDescriptorCount; ++d) {
            r.push_back(rec.mean_profile.has(d) ? csv::format_double(*rec.mean_profile.get(d))
                                                : "");
        }
        cells.push_back(std::move(r));
    }
    csv::write_file(path, speaker_header(), cells);
}

inline std::vector<SpeakerRecord> read_speakers(const std::string& path) {
    const csv::Table t = csv::read_file(path);
    const int c_speaker = t.require_column("speaker_id", path);
    const int c_gender = t.require_column("gender", path);
    const int c_age = t.require_column("age", path);
    std::array<int, kDescriptorCount> cols{};
    for (int d = 0; d < kDescriptorCount; ++d) {
        cols[static_cast<std::size_t>(d)] =
            t.require_column(kDescriptorNames[static_cast<std::size_t>(d)], path);
    }
    std::vector<SpeakerRecord> out;
    for (const auto& r : t.rows) {
        SpeakerRecord rec;
        rec.speaker_id = r[static_cast<std::size_t>(c_speaker)];
        rec.gender = parse_gender(r[static_cast<std::size_t>(c_gender)]);
        const std::string& age = r[static_cast<std::size_t>(c_age)];
        if (!age.empty()) rec.age_years = csv::parse_double(age, path);
        for (int d = 0; d < kDescriptorCount; ++d) {
            const std::string& cell = r[static_cast<std::size_t>(cols[static_cast<std::size_t>(d)])];
            if (!cell.empty()) rec.mean_profile.set(d, csv::parse_double(cell, path));
        }
        out.push_back(std::move(rec));
    }
    return out;
}

}  // namespace voiceprobe
