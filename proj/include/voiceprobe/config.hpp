#pragma once

#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "voiceprobe/errors.hpp"
#include "voiceprobe/mlp.hpp"
#include "voiceprobe/profile.hpp"

namespace voiceprobe {

// Every tunable the modules expose, with the documented defaults. A config
// file can override any of them; CLI flags override the file.
struct RunConfig {
    double min_chunk_seconds = 30.0;
    AnalysisConfig analysis;
    double alpha = 0.05;
    double heldout_fraction = 0.2;
    int gmm_restarts = 5;
    double ridge_lambda = 1.0;
    MlpConfig mlp;
    int folds = 5;
    std::uint64_t seed = 0;
    int jobs = 1;
};

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t");
    std::size_t e = s.find_last_not_of(" \t");
    if (b == std::string::npos) return "";
    return s.substr(b, e - b + 1);
}

inline double config_number(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        const double v = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("bad numeric value for " + key + ": '" + value + "'");
    }
}

inline std::vector<double> config_list(const std::string& key, const std::string& value) {
    std::vector<double> out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(config_number(key, trim(item)));
    if (out.empty()) throw ConfigError("empty list for " + key);
    return out;
}

}  // namespace detail

inline void validate_config(const RunConfig& cfg) {
    if (cfg.min_chunk_seconds < 0.0) throw ConfigError("min_chunk_seconds must be >= 0");
    if (!(cfg.analysis.pitch.f0_min_hz > 0.0 &&
          cfg.analysis.pitch.f0_min_hz < cfg.analysis.pitch.f0_max_hz)) {
        throw ConfigError("need 0 < f0_min < f0_max");
    }
    if (cfg.analysis.pitch.ppq_half_width < 1) throw ConfigError("ppq_half_width must be >= 1");
    if (cfg.analysis.formant.lpc_order < 4) throw ConfigError("lpc_order must be >= 4");
    if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0)) throw ConfigError("alpha must be in (0,1)");
    if (!(cfg.heldout_fraction > 0.0 && cfg.heldout_fraction < 1.0)) {
        throw ConfigError("heldout_fraction must be in (0,1)");
    }
    if (cfg.gmm_restarts < 1) throw ConfigError("gmm_restarts must be >= 1");
    if (cfg.mlp.epochs < 0) throw ConfigError("mlp epochs must be >= 0");
    if (cfg.mlp.batch_size < 1) throw ConfigError("mlp batch_size must be >= 1");
    if (cfg.folds < 2) throw ConfigError("folds must be >= 2");
    if (cfg.jobs < 1) throw ConfigError("jobs must be >= 1");
}

// key = value sections; '#' and ';' start comments; unknown keys rejected.
inline RunConfig parse_config_text(std::istream& in, RunConfig cfg = {}) {
    using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;
    static const std::map<std::string, Setter> setters = {
        {"audio.min_chunk_seconds",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.min_chunk_seconds = detail::config_number(k, v);
         }},
        {"pitch.f0_min",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.analysis.pitch.f0_min_hz = detail::config_number(k, v);
         }},
        {"pitch.f0_max",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.analysis.pitch.f0_max_hz = detail::config_number(k, v);
         }},
        {"pitch.voicing_ncc_threshold",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.analysis.pitch.voicing_ncc_threshold = detail::config_number(k, v);
         }},
        {"pitch.ppq_half_width",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.analysis.pitch.ppq_half_width = static_cast<int>(detail::config_number(k, v));
         }},
        {"spectral.slope_band_centers_hz",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.analysis.spectral.slope_band_centers_hz = detail::config_list(k, v);
         }},
        {"spectral.slope_band_width_hz",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.analysis.spectral.slope_band_width_hz = detail::config_number(k, v);
         }},
        {"spectral.gne_bandwidth_hz",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.analysis.spectral.gne_bandwidth_hz = detail::config_number(k, v);
         }},
        {"spectral.gne_center_step_hz",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.analysis.spectral.gne_center_step_hz = detail::config_number(k, v);
         }},
        {"spectral.frame_window_s",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.analysis.spectral.frame_window_s = detail::config_number(k, v);
         }},
        {"spectral.frame_hop_s",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.analysis.spectral.frame_hop_s = detail::config_number(k, v);
         }},
        {"spectral.fft_size",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.analysis.spectral.fft_size =
                 static_cast<std::size_t>(detail::config_number(k, v));
         }},
        {"formant.lpc_order",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.analysis.formant.lpc_order = static_cast<int>(detail::config_number(k, v));
         }},
        {"formant.formant_bw_max_hz",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.analysis.formant.formant_bw_max_hz = detail::config_number(k, v);
         }},
        {"formant.speed_of_sound_mps",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.analysis.formant.speed_of_sound_mps = detail::config_number(k, v);
         }},
        {"interpret.alpha",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.alpha = detail::config_number(k, v);
         }},
        {"interpret.heldout_fraction",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.heldout_fraction = detail::config_number(k, v);
         }},
        {"interpret.gmm_restarts",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.gmm_restarts = static_cast<int>(detail::config_number(k, v));
         }},
        {"interpret.ridge_lambda",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.ridge_lambda = detail::config_number(k, v);
         }},
        {"mlp.epochs",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.mlp.epochs = static_cast<int>(detail::config_number(k, v));
         }},
        {"mlp.batch_size",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.mlp.batch_size = static_cast<int>(detail::config_number(k, v));
         }},
        {"mlp.learning_rate",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.mlp.learning_rate = detail::config_number(k, v);
         }},
        {"mlp.folds",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.folds = static_cast<int>(detail::config_number(k, v));
         }},
        {"run.seed",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.seed = static_cast<std::uint64_t>(detail::config_number(k, v));
         }},
        {"run.jobs",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.jobs = static_cast<int>(detail::config_number(k, v));
         }},
    };

    std::string section;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::size_t hash = line.find_first_of("#;");
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') {
                throw ConfigError("line " + std::to_string(line_no) + ": bad section header");
            }
            section = detail::trim(line.substr(1, line.size() - 2));
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
        }
        const std::string key = section + "." + detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        const auto it = setters.find(key);
        if (it == setters.end()) {
            throw ConfigError("line " + std::to_string(line_no) + ": unknown key '" + key + "'");
        }
        it->second(cfg, key, value);
    }
    validate_config(cfg);
    return cfg;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    return parse_config_text(in);
}

}  // namespace voiceprobe
