#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "waveguard/dsp.hpp"
#include "waveguard/lpc.hpp"
#include "waveguard/mel.hpp"

namespace waveguard {

class ConfigError : public Error {
  public:
    using Error::Error;
};

// --- Quantization-Dequantization -------------------------------------------

// Mid-tread quantizer: levels k * step with step = 2/2^q, round half away from
// zero. k is allowed to reach +2^(q-1) so that the worst-case error on [-1, 1]
// is step/2; q=16 is the identity on the 16-bit PCM lattice.
inline AudioBuffer quantize_dequantize(const AudioBuffer& x, unsigned bits) {
    if (bits < 1 || bits > 16) throw ConfigError("quantize_dequantize: bits must be in 1..16");
    const double step = 2.0 / std::pow(2.0, static_cast<double>(bits));
    const double k_min = -std::pow(2.0, static_cast<double>(bits - 1));
    const double k_max = -k_min;

    AudioBuffer out;
    out.sample_rate = x.sample_rate;
    out.samples.resize(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double scaled = x.samples[i] / step;
        double k = scaled >= 0.0 ? std::floor(scaled + 0.5) : std::ceil(scaled - 0.5);
        k = std::clamp(k, k_min, k_max);
        out.samples[i] = k * step;
    }
    return out;
}

// --- Downsampling-Upsampling -------------------------------------------------

namespace detail {

// Linear interpolation at fractional index t, extrapolating the end segments
// so affine signals survive the round trip exactly.
inline double lerp_at(const std::vector<double>& x, double t) {
    if (x.size() == 1) return x[0];
    const double last = static_cast<double>(x.size() - 1);
    double lo = std::floor(t);
    lo = std::clamp(lo, 0.0, last - 1.0);
    const std::size_t i = static_cast<std::size_t>(lo);
    const double frac = t - lo;
    return x[i] + (x[i + 1] - x[i]) * frac;
}

}  // namespace detail

// Linear-interpolation decimation to the intermediate rate and back. No
// anti-alias prefilter: the aliasing is part of the transform's distortion.
inline AudioBuffer down_up_sample(const AudioBuffer& x, int intermediate_rate) {
    if (intermediate_rate <= 0 || intermediate_rate >= x.sample_rate)
        throw ConfigError("down_up_sample: intermediate rate must be in (0, input rate)");

    AudioBuffer out;
    out.sample_rate = x.sample_rate;
    out.samples.resize(x.size());
    if (x.empty()) return out;

    const double ratio_down = static_cast<double>(x.sample_rate) /
                              static_cast<double>(intermediate_rate);
    const std::size_t n_down =
        static_cast<std::size_t>(std::floor(static_cast<double>(x.size() - 1) / ratio_down)) + 1;
    std::vector<double> down(std::max<std::size_t>(n_down, 2));
    for (std::size_t j = 0; j < down.size(); ++j)
        down[j] = detail::lerp_at(x.samples, static_cast<double>(j) * ratio_down);

    for (std::size_t i = 0; i < x.size(); ++i)
        out.samples[i] = detail::lerp_at(down, static_cast<double>(i) / ratio_down);
    return out;
}

// --- Filtering ---------------------------------------------------------------

// One RBJ-cookbook biquad, direct form I.
struct Biquad {
    double b0 = 1, b1 = 0, b2 = 0, a1 = 0, a2 = 0;

    static Biquad low_shelf(double f0, double fs, double gain_db, double q) {
        return shelf(f0, fs, gain_db, q, false);
    }
    static Biquad high_shelf(double f0, double fs, double gain_db, double q) {
        return shelf(f0, fs, gain_db, q, true);
    }

    void process(std::vector<double>& x) const {
        double x1 = 0, x2 = 0, y1 = 0, y2 = 0;
        for (double& v : x) {
            const double y = b0 * v + b1 * x1 + b2 * x2 - a1 * y1 - a2 * y2;
            x2 = x1;
            x1 = v;
            y2 = y1;
            y1 = y;
            v = y;
        }
    }

  private:
    static Biquad shelf(double f0, double fs, double gain_db, double q, bool high) {
        const double amp = std::pow(10.0, gain_db / 40.0);
        const double w0 = 2.0 * kPi * std::clamp(f0, 1.0, fs / 2.0 - 1.0) / fs;
        const double c = std::cos(w0);
        const double alpha = std::sin(w0) / (2.0 * q);
        const double sq = 2.0 * std::sqrt(amp) * alpha;
        const double sgn = high ? 1.0 : -1.0;

        const double b0 = amp * ((amp + 1) + sgn * (amp - 1) * c + sq);
        const double b1 = -2.0 * sgn * amp * ((amp - 1) + sgn * (amp + 1) * c);
        const double b2 = amp * ((amp + 1) + sgn * (amp - 1) * c - sq);
        const double a0 = (amp + 1) - sgn * (amp - 1) * c + sq;
        const double a1 = 2.0 * sgn * ((amp - 1) - sgn * (amp + 1) * c);
        const double a2 = (amp + 1) - sgn * (amp - 1) * c - sq;
        return Biquad{b0 / a0, b1 / a0, b2 / a0, a1 / a0, a2 / a0};
    }
};

// Per-frame spectral centroid of the magnitude spectrogram, one value per
// non-silent frame.
inline std::vector<double> spectral_centroids(const AudioBuffer& x,
                                              std::size_t frame_length = kDefaultFrameLength,
                                              std::size_t hop_length = kDefaultHopLength) {
    const Spectrogram spec = stft(x, frame_length, hop_length);
    std::vector<double> centroids;
    centroids.reserve(spec.n_frames);
    for (std::size_t t = 0; t < spec.n_frames; ++t) {
        double num = 0.0, den = 0.0;
        for (std::size_t k = 0; k < spec.n_bins; ++k) {
            const double mag = std::abs(spec.at(t, k));
            const double f = static_cast<double>(k) * static_cast<double>(x.sample_rate) /
                             static_cast<double>(frame_length);
            num += f * mag;
            den += mag;
        }
        if (den > 0.0) centroids.push_back(num / den);
    }
    return centroids;
}

// Median centroid F_c, then a -30 dB low shelf at 0.1 F_c and a -30 dB high
// shelf at 1.5 F_c in cascade (Q = 0.707). All-zero input passes through.
inline AudioBuffer shelf_filter(const AudioBuffer& x, double low_factor = 0.1,
                                double high_factor = 1.5, double gain_db = -30.0) {
    AudioBuffer out = x;
    if (x.empty()) return out;

    std::vector<double> centroids = spectral_centroids(x);
    if (centroids.empty()) return out;  // silent input: centroid undefined

    const std::size_t mid = centroids.size() / 2;
    std::nth_element(centroids.begin(), centroids.begin() + mid, centroids.end());
    double median = centroids[mid];
    if (centroids.size() % 2 == 0) {
        const double hi = median;
        std::nth_element(centroids.begin(), centroids.begin() + mid - 1, centroids.end());
        median = (centroids[mid - 1] + hi) / 2.0;
    }

    const double fs = static_cast<double>(x.sample_rate);
    Biquad::low_shelf(low_factor * median, fs, gain_db, 0.707).process(out.samples);
    Biquad::high_shelf(high_factor * median, fs, gain_db, 0.707).process(out.samples);
    return out;
}

// --- TransformConfig ----------------------------------------------------------

struct QuantizeConfig {
    unsigned bits = 6;
};

struct ResampleConfig {
    int intermediate_rate = 6000;
};

struct ShelfFilterConfig {
    double low_factor = 0.1;
    double high_factor = 1.5;
    double gain_db = -30.0;
};

struct MelInvertConfig {
    std::size_t n_mels = 80;
    std::size_t griffin_lim_iters = 32;
};

struct LpcConfig {
    std::size_t order = 20;
    double window_ms = 25.0;
    double hop_ms = 12.5;
    std::uint64_t excitation_seed = 0;
};

using TransformConfig =
    std::variant<QuantizeConfig, ResampleConfig, ShelfFilterConfig, MelInvertConfig, LpcConfig>;

inline std::string transform_name(const TransformConfig& g) {
    struct Visitor {
        std::string operator()(const QuantizeConfig&) const { return "quantize"; }
        std::string operator()(const ResampleConfig&) const { return "resample"; }
        std::string operator()(const ShelfFilterConfig&) const { return "shelf_filter"; }
        std::string operator()(const MelInvertConfig&) const { return "mel_invert"; }
        std::string operator()(const LpcConfig&) const { return "lpc"; }
    };
    return std::visit(Visitor{}, g);
}

inline nlohmann::json transform_to_json(const TransformConfig& g) {
    struct Visitor {
        nlohmann::json operator()(const QuantizeConfig& c) const {
            return {{"type", "quantize"}, {"bits", c.bits}};
        }
        nlohmann::json operator()(const ResampleConfig& c) const {
            return {{"type", "resample"}, {"intermediate_rate", c.intermediate_rate}};
        }
        nlohmann::json operator()(const ShelfFilterConfig& c) const {
            return {{"type", "shelf_filter"},
                    {"low_factor", c.low_factor},
                    {"high_factor", c.high_factor},
                    {"gain_db", c.gain_db}};
        }
        nlohmann::json operator()(const MelInvertConfig& c) const {
            return {{"type", "mel_invert"},
                    {"n_mels", c.n_mels},
                    {"griffin_lim_iters", c.griffin_lim_iters}};
        }
        nlohmann::json operator()(const LpcConfig& c) const {
            return {{"type", "lpc"},
                    {"order", c.order},
                    {"window_ms", c.window_ms},
                    {"hop_ms", c.hop_ms},
                    {"excitation_seed", c.excitation_seed}};
        }
    };
    return std::visit(Visitor{}, g);
}

inline TransformConfig transform_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("type"))
        throw ConfigError("transform config: expected object with a \"type\" field");
    const std::string type = j.at("type").get<std::string>();
    if (type == "quantize") {
        QuantizeConfig c;
        c.bits = j.value("bits", c.bits);
        return c;
    }
    if (type == "resample") {
        ResampleConfig c;
        c.intermediate_rate = j.value("intermediate_rate", c.intermediate_rate);
        return c;
    }
    if (type == "shelf_filter") {
        ShelfFilterConfig c;
        c.low_factor = j.value("low_factor", c.low_factor);
        c.high_factor = j.value("high_factor", c.high_factor);
        c.gain_db = j.value("gain_db", c.gain_db);
        return c;
    }
    if (type == "mel_invert") {
        MelInvertConfig c;
        c.n_mels = j.value("n_mels", c.n_mels);
        c.griffin_lim_iters = j.value("griffin_lim_iters", c.griffin_lim_iters);
        return c;
    }
    if (type == "lpc") {
        LpcConfig c;
        c.order = j.value("order", c.order);
        c.window_ms = j.value("window_ms", c.window_ms);
        c.hop_ms = j.value("hop_ms", c.hop_ms);
        c.excitation_seed = j.value("excitation_seed", c.excitation_seed);
        return c;
    }
    throw ConfigError("transform config: unknown type \"" + type + "\"");
}

// Published hyper-parameter presets. The downsampling preset follows the
// 6000 Hz reading of the published figure; see README.
inline TransformConfig transform_preset(const std::string& name) {
    if (name == "quant6") return QuantizeConfig{6};
    if (name == "down6000") return ResampleConfig{6000};
    if (name == "filter") return ShelfFilterConfig{};
    if (name == "mel80") return MelInvertConfig{80, 32};
    if (name == "lpc20") return LpcConfig{20, 25.0, 12.5, 0};
    throw ConfigError("unknown transform preset \"" + name +
                      "\" (expected quant6|down6000|filter|mel80|lpc20)");
}

// Dispatches to the configured transform. Every branch preserves length,
// sample rate and sample finiteness; empty input short-circuits to a copy.
inline AudioBuffer apply_transform(const TransformConfig& g, const AudioBuffer& x) {
    if (x.empty()) return x;
    struct Visitor {
        const AudioBuffer& x;
        AudioBuffer operator()(const QuantizeConfig& c) const {
            return quantize_dequantize(x, c.bits);
        }
        AudioBuffer operator()(const ResampleConfig& c) const {
            return down_up_sample(x, c.intermediate_rate);
        }
        AudioBuffer operator()(const ShelfFilterConfig& c) const {
            return shelf_filter(x, c.low_factor, c.high_factor, c.gain_db);
        }
        AudioBuffer operator()(const MelInvertConfig& c) const {
            return mel_invert(mel_extract(x, c.n_mels), c.griffin_lim_iters);
        }
        AudioBuffer operator()(const LpcConfig& c) const {
            return lpc_transform(x, c.order, c.window_ms, c.hop_ms, c.excitation_seed);
        }
    };
    return std::visit(Visitor{x}, g);
}

}  // namespace waveguard
