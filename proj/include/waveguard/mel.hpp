#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "waveguard/dsp.hpp"

namespace waveguard {

inline double hz_to_mel(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }
inline double mel_to_hz(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }

// Amplitudes below this floor are clamped before taking the log.
inline constexpr double kMelLogFloor = 1e-5;

// Triangular filters on the HTK mel scale spanning 0 Hz to Nyquist.
// Rows are filters [n_mels x n_bins]; overlapping neighbors sum to one
// between the first and last peak.
struct MelFilterbank {
    std::size_t n_mels = 0;
    std::size_t n_bins = 0;
    std::vector<double> weights;  // row-major [n_mels x n_bins]

    double at(std::size_t mel, std::size_t bin) const { return weights[mel * n_bins + bin]; }

    static MelFilterbank build(std::size_t n_mels, std::size_t n_bins, std::size_t frame_length,
                               int sample_rate) {
        if (n_mels == 0) throw GeometryError("mel filterbank: n_mels must be positive");
        if (n_mels >= n_bins) throw GeometryError("mel filterbank: n_mels must be < n_bins");

        MelFilterbank fb;
        fb.n_mels = n_mels;
        fb.n_bins = n_bins;
        fb.weights.assign(n_mels * n_bins, 0.0);

        const double nyquist = static_cast<double>(sample_rate) / 2.0;
        const double mel_max = hz_to_mel(nyquist);
        std::vector<double> edges_hz(n_mels + 2);
        for (std::size_t i = 0; i < n_mels + 2; ++i)
            edges_hz[i] = mel_to_hz(mel_max * static_cast<double>(i) /
                                    static_cast<double>(n_mels + 1));

        for (std::size_t m = 0; m < n_mels; ++m) {
            const double lo = edges_hz[m], mid = edges_hz[m + 1], hi = edges_hz[m + 2];
            for (std::size_t k = 0; k < n_bins; ++k) {
                const double f = static_cast<double>(k) * static_cast<double>(sample_rate) /
                                 static_cast<double>(frame_length);
                double w = 0.0;
                if (f > lo && f < hi)
                    w = f <= mid ? (f - lo) / (mid - lo) : (hi - f) / (hi - mid);
                fb.weights[m * n_bins + k] = w;
            }
            double sum = 0.0;
            for (std::size_t k = 0; k < n_bins; ++k) sum += fb.weights[m * n_bins + k];
            if (sum <= 0.0) {
                // Filter narrower than one bin; pin it to the bin nearest its peak.
                const std::size_t k = static_cast<std::size_t>(std::min(
                    static_cast<double>(n_bins - 1),
                    std::round(mid * static_cast<double>(frame_length) /
                               static_cast<double>(sample_rate))));
                fb.weights[m * n_bins + k] = 1.0;
            }
        }
        return fb;
    }

    // Approximate inverse: transpose with each bin row scaled so a flat
    // spectrum round-trips to a flat spectrum on the covered band.
    std::vector<double> pseudo_inverse() const {
        std::vector<double> row_sums(n_mels, 0.0);
        for (std::size_t m = 0; m < n_mels; ++m)
            for (std::size_t k = 0; k < n_bins; ++k) row_sums[m] += at(m, k);

        std::vector<double> pinv(n_bins * n_mels, 0.0);  // [n_bins x n_mels]
        for (std::size_t k = 0; k < n_bins; ++k) {
            double cover = 0.0;
            for (std::size_t m = 0; m < n_mels; ++m) cover += at(m, k) * row_sums[m];
            const double scale = cover > 1e-12 ? 1.0 / cover : 0.0;
            for (std::size_t m = 0; m < n_mels; ++m) pinv[k * n_mels + m] = at(m, k) * scale;
        }
        return pinv;
    }
};

// Log-amplitude mel spectrogram plus the STFT geometry needed to invert it.
struct MelSpectrogram {
    std::vector<double> data;  // row-major [n_frames x n_mels]
    std::size_t n_frames = 0;
    std::size_t n_mels = 0;
    std::size_t frame_length = 0;
    std::size_t hop_length = 0;
    std::size_t signal_length = 0;
    int sample_rate = 16000;

    double& at(std::size_t frame, std::size_t mel) { return data[frame * n_mels + mel]; }
    double at(std::size_t frame, std::size_t mel) const { return data[frame * n_mels + mel]; }
};

// |STFT| -> filterbank -> log(max(., floor)).
inline MelSpectrogram mel_extract(const AudioBuffer& x, std::size_t n_mels,
                                  std::size_t frame_length = kDefaultFrameLength,
                                  std::size_t hop_length = kDefaultHopLength) {
    const Spectrogram spec = stft(x, frame_length, hop_length);
    const MelFilterbank fb = MelFilterbank::build(n_mels, spec.n_bins, frame_length,
                                                  x.sample_rate);

    MelSpectrogram mel;
    mel.n_frames = spec.n_frames;
    mel.n_mels = n_mels;
    mel.frame_length = frame_length;
    mel.hop_length = hop_length;
    mel.signal_length = spec.signal_length;
    mel.sample_rate = spec.sample_rate;
    mel.data.assign(spec.n_frames * n_mels, 0.0);

    for (std::size_t t = 0; t < spec.n_frames; ++t) {
        for (std::size_t m = 0; m < n_mels; ++m) {
            double acc = 0.0;
            for (std::size_t k = 0; k < spec.n_bins; ++k)
                acc += fb.at(m, k) * std::abs(spec.at(t, k));
            mel.at(t, m) = std::log(std::max(acc, kMelLogFloor));
        }
    }
    return mel;
}

// One vanilla Griffin-Lim pass is istft followed by stft; phases come from the
// re-analysis while magnitudes stay pinned to the target. No momentum, so the
// consistency error is non-increasing.
inline Spectrogram griffin_lim(const std::vector<double>& target_magnitude, std::size_t n_frames,
                               std::size_t n_bins, std::size_t frame_length,
                               std::size_t hop_length, std::size_t signal_length, int sample_rate,
                               std::size_t iterations,
                               std::vector<double>* consistency_trace = nullptr) {
    if (target_magnitude.size() != n_frames * n_bins)
        throw GeometryError("griffin_lim: magnitude size mismatch");

    Spectrogram spec;
    spec.n_frames = n_frames;
    spec.n_bins = n_bins;
    spec.frame_length = frame_length;
    spec.hop_length = hop_length;
    spec.signal_length = signal_length;
    spec.sample_rate = sample_rate;
    spec.data.resize(n_frames * n_bins);
    for (std::size_t i = 0; i < spec.data.size(); ++i) spec.data[i] = target_magnitude[i];

    for (std::size_t it = 0; it < iterations; ++it) {
        const AudioBuffer estimate = istft(spec);
        const Spectrogram re = stft(estimate, frame_length, hop_length);
        if (consistency_trace) {
            double err = 0.0;
            for (std::size_t i = 0; i < re.data.size(); ++i) {
                const double d = std::abs(re.data[i]) - target_magnitude[i];
                err += d * d;
            }
            consistency_trace->push_back(std::sqrt(err));
        }
        for (std::size_t i = 0; i < spec.data.size(); ++i) {
            const double mag = std::abs(re.data[i]);
            spec.data[i] = mag > 1e-300 ? re.data[i] * (target_magnitude[i] / mag)
                                        : std::complex<double>(target_magnitude[i], 0.0);
        }
    }
    return spec;
}

// exp -> filterbank pseudo-inverse (clamped at zero) -> Griffin-Lim -> istft,
// trimmed to the stored original length.
inline AudioBuffer mel_invert(const MelSpectrogram& mel, std::size_t griffin_lim_iters) {
    if (mel.n_frames == 0 || mel.n_mels == 0) throw GeometryError("mel_invert: empty input");
    if (mel.data.size() != mel.n_frames * mel.n_mels)
        throw GeometryError("mel_invert: inconsistent geometry");

    const std::size_t n_bins = mel.frame_length / 2 + 1;
    const MelFilterbank fb =
        MelFilterbank::build(mel.n_mels, n_bins, mel.frame_length, mel.sample_rate);
    const std::vector<double> pinv = fb.pseudo_inverse();

    std::vector<double> magnitude(mel.n_frames * n_bins, 0.0);
    for (std::size_t t = 0; t < mel.n_frames; ++t) {
        for (std::size_t k = 0; k < n_bins; ++k) {
            double acc = 0.0;
            for (std::size_t m = 0; m < mel.n_mels; ++m)
                acc += pinv[k * mel.n_mels + m] * std::exp(mel.at(t, m));
            magnitude[t * n_bins + k] = std::max(acc, 0.0);
        }
    }

    const Spectrogram spec =
        griffin_lim(magnitude, mel.n_frames, n_bins, mel.frame_length, mel.hop_length,
                    mel.signal_length, mel.sample_rate, griffin_lim_iters);
    AudioBuffer out = istft(spec);
    out.samples.resize(mel.signal_length, 0.0);
    return out;
}

}  // namespace waveguard
