#pragma once

#include <stdexcept>
#include <string>

namespace voiceprobe {

// Base class for all toolkit errors.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed container or unparsable file content.
struct FormatError : Error {
    using Error::Error;
};

// Recognized container but unsupported codec/layout.
struct UnsupportedError : Error {
    using Error::Error;
};

// Audio payload with zero samples.
struct EmptyAudioError : Error {
    using Error::Error;
};

// Sample rate outside the accepted input set.
struct UnsupportedRateError : Error {
    using Error::Error;
};

// Empty input sequence where at least one element is required.
struct EmptyInputError : Error {
    using Error::Error;
};

// Signal shorter than the analysis window.
struct TooShortError : Error {
    using Error::Error;
};

// Not enough voiced material for a pitch-based descriptor.
struct InsufficientVoicingError : Error {
    using Error::Error;
};

// Not enough reliable formant frames for a tract-length estimate.
struct InsufficientFormantsError : Error {
    using Error::Error;
};

// Formant frequencies not strictly increasing/positive.
struct InvalidFormantsError : Error {
    using Error::Error;
};

// RMS of an all-zero signal; level is -inf and excluded from aggregation.
struct MinusInfinityError : Error {
    using Error::Error;
};

// A descriptor column with zero variance cannot be z-scored.
struct ZeroVarianceError : Error {
    using Error::Error;
};

// Cosine distance is undefined for a zero vector.
struct ZeroVectorError : Error {
    using Error::Error;
};

// Index or count outside its valid range.
struct RangeError : Error {
    using Error::Error;
};

// Rank-deficient design matrix.
struct SingularError : Error {
    using Error::Error;
};

// Degenerate statistical input (constant data, non-positive RSS, bad split).
struct DegenerateError : Error {
    using Error::Error;
};

// A cluster too small to fit a per-cluster model.
struct InsufficientDataError : Error {
    using Error::Error;
};

// Majority vote between cluster namings is tied.
struct TieError : Error {
    using Error::Error;
};

// Training loss became non-finite.
struct DivergenceError : Error {
    using Error::Error;
};

// Plot coloring requested from a column that is not available.
struct ColorSourceError : Error {
    using Error::Error;
};

// Bad key/value in a run configuration.
struct ConfigError : Error {
    using Error::Error;
};

}  // namespace voiceprobe
