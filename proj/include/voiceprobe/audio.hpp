#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "voiceprobe/dsp.hpp"
#include "voiceprobe/errors.hpp"

namespace voiceprobe {

inline constexpr int kAnalysisRate = 16000;

// Mono audio, amplitudes in [-1, 1]. The unit of analysis for every
// descriptor; immutable by convention once built.
struct AudioClip {
    std::vector<double> samples;
    int sample_rate = kAnalysisRate;
    std::string source_id;

    double duration_s() const {
        return static_cast<double>(samples.size()) / static_cast<double>(sample_rate);
    }
};

enum class WindowShape { hann, rectangular };

struct FrameSequence {
    std::vector<std::vector<double>> frames;
    double hop_s = 0.0;
    double window_s = 0.0;
    std::vector<double> start_times;
};

namespace detail {

inline std::uint32_t read_u32le(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline std::uint16_t read_u16le(const unsigned char* p) {
    return static_cast<std::uint16_t>(static_cast<std::uint32_t>(p[0]) |
                                      (static_cast<std::uint32_t>(p[1]) << 8));
}

inline std::string file_stem(const std::string& path) {
    std::size_t slash = path.find_last_of("/\\");
    std::string name = (slash == std::string::npos) ? path : path.substr(slash + 1);
    std::size_t dot = name.find_last_of('.');
    if (dot != std::string::npos && dot > 0) name = name.substr(0, dot);
    return name;
}

}  // namespace detail

// RIFF/WAVE reader for PCM16 and IEEE float32. Non-audio chunks are skipped,
// channels are averaged to mono, integer samples scale to [-1, 1].
inline AudioClip load_wav(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
    if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
        std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
        throw FormatError(path + ": not a RIFF/WAVE file");
    }

    std::uint16_t audio_format = 0, channels = 0, bits = 0;
    std::uint32_t rate = 0;
    const unsigned char* data = nullptr;
    std::size_t data_len = 0;
    bool have_fmt = false;

    std::size_t pos = 12;
    while (pos + 8 <= bytes.size()) {
        const char* id = reinterpret_cast<const char*>(bytes.data() + pos);
        const std::uint32_t size = detail::read_u32le(bytes.data() + pos + 4);
        const std::size_t body = pos + 8;
        if (body + size > bytes.size()) throw FormatError(path + ": truncated chunk");
        if (std::memcmp(id, "fmt ", 4) == 0) {
            if (size < 16) throw FormatError(path + ": fmt chunk too small");
            audio_format = detail::read_u16le(bytes.data() + body);
            channels = detail::read_u16le(bytes.data() + body + 2);
            rate = detail::read_u32le(bytes.data() + body + 4);
            bits = detail::read_u16le(bytes.data() + body + 14);
            have_fmt = true;
        } else if (std::memcmp(id, "data", 4) == 0) {
            data = bytes.data() + body;
            data_len = size;
        }
        pos = body + size + (size & 1);  // chunks are word-aligned
    }
    if (!have_fmt) throw FormatError(path + ": missing fmt chunk");
    if (channels == 0 || rate == 0) throw FormatError(path + ": bad fmt fields");
    const bool pcm16 = (audio_format == 1 && bits == 16);
    const bool float32 = (audio_format == 3 && bits == 32);
    if (!pcm16 && !float32) {
        throw UnsupportedError(path + ": only PCM16 and float32 are supported (format " +
                               std::to_string(audio_format) + ", " + std::to_string(bits) +
                               " bits)");
    }
    if (data == nullptr || data_len == 0) throw EmptyAudioError(path + ": empty data chunk");

    const std::size_t bytes_per = bits / 8u;
    const std::size_t frame_bytes = bytes_per * channels;
    const std::size_t n_frames = data_len / frame_bytes;
    if (n_frames == 0) throw EmptyAudioError(path + ": no complete sample frames");

    AudioClip clip;
    clip.sample_rate = static_cast<int>(rate);
    clip.source_id = detail::file_stem(path);
    clip.samples.resize(n_frames);
    for (std::size_t i = 0; i < n_frames; ++i) {
        double acc = 0.0;
        for (std::uint16_t c = 0; c < channels; ++c) {
            const unsigned char* p = data + i * frame_bytes + c * bytes_per;
            if (pcm16) {
                std::int16_t v;
                std::memcpy(&v, p, 2);
                acc += static_cast<double>(v) / 32768.0;
            } else {
                float v;
                std::memcpy(&v, p, 4);
                if (!std::isfinite(v)) throw FormatError(path + ": non-finite sample");
                acc += std::clamp(static_cast<double>(v), -1.0, 1.0);
            }
        }
        clip.samples[i] = acc / channels;
    }
    return clip;
}

// PCM16 mono writer; the counterpart of load_wav used for fixtures and
// round-trip checks. Quantization error is at most 1/32768 per sample.
inline void write_wav(const std::string& path, const AudioClip& clip) {
    if (clip.samples.empty()) throw EmptyAudioError("write_wav: empty clip");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write " + path);

    const std::uint32_t n = static_cast<std::uint32_t>(clip.samples.size());
    const std::uint32_t data_bytes = n * 2;
    const std::uint32_t rate = static_cast<std::uint32_t>(clip.sample_rate);
    const std::uint32_t byte_rate = rate * 2;

    auto put_u32 = [&out](std::uint32_t v) {
        unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                              static_cast<unsigned char>((v >> 8) & 0xff),
                              static_cast<unsigned char>((v >> 16) & 0xff),
                              static_cast<unsigned char>((v >> 24) & 0xff)};
        out.write(reinterpret_cast<const char*>(b), 4);
    };
    auto put_u16 = [&out](std::uint16_t v) {
        unsigned char b[2] = {static_cast<unsigned char>(v & 0xff),
                              static_cast<unsigned char>((v >> 8) & 0xff)};
        out.write(reinterpret_cast<const char*>(b), 2);
    };

    out.write("RIFF", 4);
    put_u32(36 + data_bytes);
    out.write("WAVE", 4);
    out.write("fmt ", 4);
    put_u32(16);
    put_u16(1);  // PCM
    put_u16(1);  // mono
    put_u32(rate);
    put_u32(byte_rate);
    put_u16(2);
    put_u16(16);
    out.write("data", 4);
    put_u32(data_bytes);
    for (double s : clip.samples) {
        const long q = std::lround(std::clamp(s, -1.0, 1.0) * 32768.0);
        const std::int16_t v = static_cast<std::int16_t>(std::clamp(q, -32768L, 32767L));
        put_u16(static_cast<std::uint16_t>(v));
    }
    if (!out) throw FormatError("write failed for " + path);
}

// Resample to the toolkit-wide 16 kHz analysis rate.
inline AudioClip resample_to_16k(const AudioClip& clip) {
    static constexpr int accepted[] = {8000, 16000, 22050, 32000, 44100, 48000};
    bool ok = false;
    for (int r : accepted) ok = ok || (clip.sample_rate == r);
    if (!ok) {
        throw UnsupportedRateError("unsupported input rate " + std::to_string(clip.sample_rate));
    }
    if (clip.sample_rate == kAnalysisRate) return clip;
    AudioClip out;
    out.sample_rate = kAnalysisRate;
    out.source_id = clip.source_id;
    out.samples = dsp::resample_sinc(clip.samples, clip.sample_rate, kAnalysisRate);
    for (double& s : out.samples) s = std::clamp(s, -1.0, 1.0);
    return out;
}

struct ChunkResult {
    std::vector<AudioClip> segments;
    bool below_min = false;  // total audio shorter than min_s, single segment returned
};

// Concatenate one speaker's clips in input order, then cut into consecutive
// segments of at least min_s seconds. A trailing remainder shorter than
// min_s is merged into the previous segment; if everything is shorter than
// min_s, one flagged segment holds it all. Sample count is conserved.
inline ChunkResult chunk_min_duration(const std::vector<AudioClip>& clips, double min_s = 30.0) {
    if (clips.empty()) throw EmptyInputError("chunk_min_duration: no clips");
    const int rate = clips.front().sample_rate;
    std::size_t total = 0;
    for (const auto& c : clips) {
        if (c.samples.empty()) throw EmptyAudioError("chunk_min_duration: empty clip");
        if (c.sample_rate != rate) {
            throw FormatError("chunk_min_duration: mixed sample rates");
        }
        total += c.samples.size();
    }
    std::vector<double> all;
    all.reserve(total);
    for (const auto& c : clips) all.insert(all.end(), c.samples.begin(), c.samples.end());

    const std::string base = clips.front().source_id;
    const auto min_samples = static_cast<std::size_t>(std::llround(min_s * rate));

    ChunkResult result;
    auto make_segment = [&](std::size_t begin, std::size_t end) {
        AudioClip seg;
        seg.sample_rate = rate;
        seg.source_id = base + "#" + std::to_string(result.segments.size());
        seg.samples.assign(all.begin() + static_cast<std::ptrdiff_t>(begin),
                           all.begin() + static_cast<std::ptrdiff_t>(end));
        result.segments.push_back(std::move(seg));
    };

    if (total < min_samples || min_samples == 0) {
        make_segment(0, total);
        result.below_min = total < min_samples;
        return result;
    }
    const std::size_t n_full = total / min_samples;
    for (std::size_t k = 0; k < n_full; ++k) {
        const std::size_t begin = k * min_samples;
        std::size_t end = begin + min_samples;
        if (k + 1 == n_full) end = total;  // remainder merges into the last segment
        make_segment(begin, end);
    }
    return result;
}

// Fixed-size analysis frames; count = 1 + floor((N - W) / H).
inline FrameSequence frame_signal(const AudioClip& clip, double window_s, double hop_s,
                                  WindowShape shape) {
    if (hop_s <= 0.0 || hop_s > window_s) {
        throw RangeError("frame_signal: need 0 < hop <= window");
    }
    const auto w = static_cast<std::size_t>(std::llround(window_s * clip.sample_rate));
    const auto h = static_cast<std::size_t>(std::llround(hop_s * clip.sample_rate));
    if (w == 0 || h == 0) throw RangeError("frame_signal: window/hop too small");
    if (clip.samples.size() < w) throw TooShortError("frame_signal: clip shorter than window");

    const std::size_t count = 1 + (clip.samples.size() - w) / h;
    std::vector<double> weights;
    if (shape == WindowShape::hann) weights = dsp::hann_window(w);

    FrameSequence seq;
    seq.hop_s = hop_s;
    seq.window_s = window_s;
    seq.frames.reserve(count);
    seq.start_times.reserve(count);
    for (std::size_t f = 0; f < count; ++f) {
        const std::size_t begin = f * h;
        std::vector<double> frame(clip.samples.begin() + static_cast<std::ptrdiff_t>(begin),
                                  clip.samples.begin() + static_cast<std::ptrdiff_t>(begin + w));
        if (shape == WindowShape::hann) {
            for (std::size_t i = 0; i < w; ++i) frame[i] *= weights[i];
        }
        seq.frames.push_back(std::move(frame));
        seq.start_times.push_back(static_cast<double>(begin) / clip.sample_rate);
    }
    return seq;
}

}  // namespace voiceprobe
