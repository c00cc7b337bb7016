#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "waveguard/dsp.hpp"
#include "waveguard/rng.hpp"

namespace waveguard {

// All-pole model of one analysis window: x(n) ~ sum_k a_k x(n-k) + e(n).
struct LpcFrame {
    std::vector<double> coefficients;  // a_1..a_p
    double gain = 0.0;                 // RMS of the prediction residual
};

namespace detail {

inline std::vector<double> autocorrelate(const std::vector<double>& x, std::size_t order) {
    std::vector<double> r(order + 1, 0.0);
    for (std::size_t k = 0; k <= order; ++k)
        for (std::size_t n = k; n < x.size(); ++n) r[k] += x[n] * x[n - k];
    return r;
}

}  // namespace detail

// Levinson-Durbin on the autocorrelation sequence. Returns a_1..a_p of the
// minimum-mean-square-error predictor; the autocorrelation method keeps the
// synthesis filter stable.
inline std::vector<double> levinson_durbin(const std::vector<double>& r, std::size_t order) {
    std::vector<double> a(order + 1, 0.0);
    a[0] = 1.0;
    double error = r[0];
    if (error <= 0.0) return std::vector<double>(order, 0.0);

    std::vector<double> prev(order + 1, 0.0);
    for (std::size_t m = 1; m <= order; ++m) {
        double acc = r[m];
        for (std::size_t j = 1; j < m; ++j) acc += a[j] * r[m - j];
        const double k = -acc / error;
        prev = a;
        for (std::size_t j = 1; j < m; ++j) a[j] = prev[j] + k * prev[m - j];
        a[m] = k;
        error *= (1.0 - k * k);
        if (error <= 0.0) break;
    }
    // Predictor convention: x(n) ~ sum a_k x(n-k), so flip the filter signs.
    std::vector<double> coeffs(order);
    for (std::size_t j = 0; j < order; ++j) coeffs[j] = -a[j + 1];
    return coeffs;
}

// Analyzes one (already windowed) frame: coefficients plus residual RMS taken
// over the zero-padded extent, which the autocorrelation method minimizes.
inline LpcFrame lpc_analyze_frame(const std::vector<double>& windowed, std::size_t order) {
    LpcFrame frame;
    frame.coefficients.assign(order, 0.0);
    const std::vector<double> r = detail::autocorrelate(windowed, order);
    if (r[0] <= 0.0) return frame;  // degenerate frame
    frame.coefficients = levinson_durbin(r, order);

    const std::size_t n = windowed.size();
    double energy = 0.0;
    for (std::size_t i = 0; i < n + order; ++i) {
        double pred = 0.0;
        for (std::size_t k = 1; k <= order; ++k) {
            if (i >= k && i - k < n) pred += frame.coefficients[k - 1] * windowed[i - k];
        }
        const double sample = i < n ? windowed[i] : 0.0;
        const double e = sample - pred;
        energy += e * e;
    }
    frame.gain = std::sqrt(energy / static_cast<double>(n));
    return frame;
}

// Per-frame residual energy over the zero-padded extent; never exceeds the
// windowed frame energy because the zero predictor is in the feasible set.
inline double lpc_residual_energy(const std::vector<double>& windowed, const LpcFrame& frame) {
    const std::size_t n = windowed.size();
    const std::size_t order = frame.coefficients.size();
    double energy = 0.0;
    for (std::size_t i = 0; i < n + order; ++i) {
        double pred = 0.0;
        for (std::size_t k = 1; k <= order; ++k)
            if (i >= k && i - k < n) pred += frame.coefficients[k - 1] * windowed[i - k];
        const double sample = i < n ? windowed[i] : 0.0;
        energy += (sample - pred) * (sample - pred);
    }
    return energy;
}

// Analysis-resynthesis through the source-filter model: per Hann-windowed
// frame, fit an order-p predictor, then excite the all-pole filter with
// unit-variance white noise scaled by the residual RMS. The excitation is
// counter-based on (seed, frame index), so output is reproducible and frames
// may be synthesized in parallel. Output is hard-clipped to [-1, 1].
inline AudioBuffer lpc_transform(const AudioBuffer& x, std::size_t order, double window_ms = 25.0,
                                 double hop_ms = 12.5, std::uint64_t excitation_seed = 0) {
    AudioBuffer out;
    out.sample_rate = x.sample_rate;
    out.samples.assign(x.size(), 0.0);
    if (x.empty()) return out;

    const std::size_t frame_length = static_cast<std::size_t>(
        std::lround(window_ms * static_cast<double>(x.sample_rate) / 1000.0));
    const std::size_t hop = static_cast<std::size_t>(
        std::lround(hop_ms * static_cast<double>(x.sample_rate) / 1000.0));
    if (frame_length < 2 || hop == 0) throw GeometryError("lpc_transform: window too short");
    if (order >= frame_length)
        throw GeometryError("lpc_transform: order must be < window length in samples");

    const std::vector<double> window = hann_window(frame_length);
    const std::size_t n_frames = 1 + (x.size() + hop - 1) / hop;

    std::vector<double> acc(x.size() + frame_length, 0.0);
    std::vector<double> norm(x.size() + frame_length, 0.0);
    std::vector<double> windowed(frame_length);
    std::vector<double> synth(frame_length);

    for (std::size_t t = 0; t < n_frames; ++t) {
        const std::size_t base = t * hop;
        double energy = 0.0;
        for (std::size_t i = 0; i < frame_length; ++i) {
            const std::size_t idx = base + i;
            const double s = idx < x.size() ? x.samples[idx] : 0.0;
            windowed[i] = s * window[i];
            energy += windowed[i] * windowed[i];
        }
        if (energy <= 0.0) continue;  // degenerate frame: synthesize silence

        const LpcFrame frame = lpc_analyze_frame(windowed, order);
        for (std::size_t i = 0; i < frame_length; ++i) {
            double v = frame.gain * rng::gaussian(excitation_seed, t, i);
            for (std::size_t k = 1; k <= order && k <= i; ++k)
                v += frame.coefficients[k - 1] * synth[i - k];
            synth[i] = std::clamp(v, -1.0, 1.0);
        }
        for (std::size_t i = 0; i < frame_length; ++i) {
            acc[base + i] += synth[i] * window[i];
            norm[base + i] += window[i];
        }
    }

    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = norm[i];
        out.samples[i] = d > 1e-12 ? std::clamp(acc[i] / d, -1.0, 1.0) : 0.0;
    }
    return out;
}

}  // namespace waveguard
