#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "waveguard/audio.hpp"

namespace waveguard {

class GeometryError : public Error {
  public:
    using Error::Error;
};

inline constexpr double kPi = 3.14159265358979323846;

// Analysis defaults: 32 ms frames, 8 ms hop at 16 kHz.
inline constexpr std::size_t kDefaultFrameLength = 512;
inline constexpr std::size_t kDefaultHopLength = 128;

// Periodic Hann; satisfies COLA for hop = N/2, N/4, ...
inline std::vector<double> hann_window(std::size_t n) {
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i)
        w[i] = 0.5 * (1.0 - std::cos(2.0 * kPi * static_cast<double>(i) / static_cast<double>(n)));
    return w;
}

// Iterative radix-2 FFT with precomputed twiddles; size must be a power of two.
class Fft {
  public:
    explicit Fft(std::size_t n) : n_(n) {
        if (n == 0 || (n & (n - 1)) != 0) throw GeometryError("FFT size must be a power of two");
        twiddles_.resize(n / 2);
        for (std::size_t k = 0; k < n / 2; ++k) {
            const double a = -2.0 * kPi * static_cast<double>(k) / static_cast<double>(n);
            twiddles_[k] = {std::cos(a), std::sin(a)};
        }
    }

    std::size_t size() const { return n_; }

    void forward(std::vector<std::complex<double>>& a) const { transform(a, false); }

    void inverse(std::vector<std::complex<double>>& a) const {
        transform(a, true);
        const double inv = 1.0 / static_cast<double>(n_);
        for (auto& v : a) v *= inv;
    }

  private:
    void transform(std::vector<std::complex<double>>& a, bool invert) const {
        if (a.size() != n_) throw GeometryError("FFT input size mismatch");
        for (std::size_t i = 1, j = 0; i < n_; ++i) {
            std::size_t bit = n_ >> 1;
            for (; j & bit; bit >>= 1) j ^= bit;
            j ^= bit;
            if (i < j) std::swap(a[i], a[j]);
        }
        for (std::size_t len = 2; len <= n_; len <<= 1) {
            const std::size_t stride = n_ / len;
            for (std::size_t i = 0; i < n_; i += len) {
                for (std::size_t k = 0; k < len / 2; ++k) {
                    std::complex<double> w = twiddles_[k * stride];
                    if (invert) w = std::conj(w);
                    const std::complex<double> u = a[i + k];
                    const std::complex<double> v = a[i + k + len / 2] * w;
                    a[i + k] = u + v;
                    a[i + k + len / 2] = u - v;
                }
            }
        }
    }

    std::size_t n_;
    std::vector<std::complex<double>> twiddles_;
};

// Real-input FFT of size N via an N/2 complex FFT and a twiddle untangle.
class RealFft {
  public:
    explicit RealFft(std::size_t n) : n_(n), half_(n / 2) {
        if (n < 2 || (n & (n - 1)) != 0)
            throw GeometryError("real FFT size must be a power of two >= 2");
        twiddles_.resize(n / 2 + 1);
        for (std::size_t k = 0; k <= n / 2; ++k) {
            const double a = -2.0 * kPi * static_cast<double>(k) / static_cast<double>(n);
            twiddles_[k] = {std::cos(a), std::sin(a)};
        }
    }

    std::size_t size() const { return n_; }
    std::size_t n_bins() const { return n_ / 2 + 1; }

    // spectrum gets n/2 + 1 bins.
    void forward(const double* input, std::complex<double>* spectrum) const {
        std::vector<std::complex<double>> packed(n_ / 2);
        for (std::size_t i = 0; i < n_ / 2; ++i) packed[i] = {input[2 * i], input[2 * i + 1]};
        half_.forward(packed);
        for (std::size_t k = 0; k <= n_ / 2; ++k) {
            const std::complex<double> zk = k == n_ / 2 ? packed[0] : packed[k];
            const std::complex<double> zr = std::conj(packed[(n_ / 2 - k) % (n_ / 2)]);
            const std::complex<double> even = 0.5 * (zk + zr);
            const std::complex<double> odd =
                std::complex<double>(0.0, -0.5) * (zk - zr);  // (zk - zr) / 2i
            spectrum[k] = even + twiddles_[k] * odd;
        }
    }

    void inverse(const std::complex<double>* spectrum, double* output) const {
        std::vector<std::complex<double>> packed(n_ / 2);
        for (std::size_t k = 0; k < n_ / 2; ++k) {
            const std::complex<double> xk = spectrum[k];
            const std::complex<double> xr = std::conj(spectrum[n_ / 2 - k]);
            const std::complex<double> even = 0.5 * (xk + xr);
            const std::complex<double> odd = 0.5 * (xk - xr) * std::conj(twiddles_[k]);
            packed[k] = even + std::complex<double>(0.0, 1.0) * odd;
        }
        half_.inverse(packed);
        for (std::size_t i = 0; i < n_ / 2; ++i) {
            output[2 * i] = packed[i].real();
            output[2 * i + 1] = packed[i].imag();
        }
    }

  private:
    std::size_t n_;
    Fft half_;
    std::vector<std::complex<double>> twiddles_;
};

// Complex STFT frames, row-major [n_frames x n_bins], n_bins = frame_length/2 + 1.
// signal_length is kept so the inverse can trim back to the original extent.
struct Spectrogram {
    std::vector<std::complex<double>> data;
    std::size_t n_frames = 0;
    std::size_t n_bins = 0;
    std::size_t frame_length = 0;
    std::size_t hop_length = 0;
    std::size_t signal_length = 0;
    int sample_rate = 16000;

    std::complex<double>& at(std::size_t frame, std::size_t bin) {
        return data[frame * n_bins + bin];
    }
    const std::complex<double>& at(std::size_t frame, std::size_t bin) const {
        return data[frame * n_bins + bin];
    }
};

namespace detail {

// Mirror reflection without edge repetition, valid for any index.
inline double reflect_sample(const std::vector<double>& x, long long i) {
    const long long n = static_cast<long long>(x.size());
    if (n == 1) return x[0];
    const long long period = 2 * (n - 1);
    long long m = i % period;
    if (m < 0) m += period;
    if (m >= n) m = period - m;
    return x[static_cast<std::size_t>(m)];
}

}  // namespace detail

// Hann-windowed STFT, reflect-padded by frame_length/2 on both ends so that
// n_frames = 1 + ceil(len/hop) regardless of alignment.
inline Spectrogram stft(const AudioBuffer& buffer, std::size_t frame_length = kDefaultFrameLength,
                        std::size_t hop_length = kDefaultHopLength) {
    if (buffer.empty()) throw GeometryError("stft: buffer shorter than 1 sample");
    if (frame_length == 0 || (frame_length & (frame_length - 1)) != 0)
        throw GeometryError("stft: frame_length must be a power of two");
    if (hop_length == 0 || hop_length > frame_length)
        throw GeometryError("stft: hop must be in [1, frame_length]");

    const std::size_t len = buffer.size();
    const std::size_t n_frames = 1 + (len + hop_length - 1) / hop_length;
    const std::size_t n_bins = frame_length / 2 + 1;
    const long long pad = static_cast<long long>(frame_length / 2);

    Spectrogram spec;
    spec.n_frames = n_frames;
    spec.n_bins = n_bins;
    spec.frame_length = frame_length;
    spec.hop_length = hop_length;
    spec.signal_length = len;
    spec.sample_rate = buffer.sample_rate;
    spec.data.resize(n_frames * n_bins);

    const std::vector<double> window = hann_window(frame_length);
    const RealFft fft(frame_length);

    // Materialize the reflect-padded signal once; frames are then contiguous.
    const std::size_t padded_length = (n_frames - 1) * hop_length + frame_length;
    std::vector<double> padded(padded_length);
    for (std::size_t i = 0; i < padded_length; ++i)
        padded[i] = detail::reflect_sample(buffer.samples, static_cast<long long>(i) - pad);

    std::vector<double> frame(frame_length);
    for (std::size_t t = 0; t < n_frames; ++t) {
        const double* src = padded.data() + t * hop_length;
        for (std::size_t i = 0; i < frame_length; ++i) frame[i] = src[i] * window[i];
        fft.forward(frame.data(), &spec.at(t, 0));
    }
    return spec;
}

// Overlap-add inverse with window-square normalization; output is trimmed to
// the stored signal_length.
inline AudioBuffer istft(const Spectrogram& spec) {
    if (spec.n_frames == 0 || spec.n_bins == 0) throw GeometryError("istft: empty spectrogram");
    if (spec.n_bins != spec.frame_length / 2 + 1)
        throw GeometryError("istft: n_bins inconsistent with frame_length");
    if (spec.data.size() != spec.n_frames * spec.n_bins)
        throw GeometryError("istft: inconsistent frame dimensions");

    const std::size_t frame_length = spec.frame_length;
    const std::size_t hop = spec.hop_length;
    const std::size_t padded = (spec.n_frames - 1) * hop + frame_length;
    const std::size_t pad = frame_length / 2;

    std::vector<double> acc(padded, 0.0);
    std::vector<double> norm(padded, 0.0);
    const std::vector<double> window = hann_window(frame_length);
    const RealFft fft(frame_length);
    std::vector<double> frame(frame_length);

    for (std::size_t t = 0; t < spec.n_frames; ++t) {
        fft.inverse(&spec.at(t, 0), frame.data());
        const std::size_t base = t * hop;
        for (std::size_t i = 0; i < frame_length; ++i) {
            acc[base + i] += frame[i] * window[i];
            norm[base + i] += window[i] * window[i];
        }
    }

    AudioBuffer out;
    out.sample_rate = spec.sample_rate;
    out.samples.resize(spec.signal_length, 0.0);
    for (std::size_t i = 0; i < spec.signal_length && pad + i < padded; ++i) {
        const double d = norm[pad + i];
        out.samples[i] = d > 1e-12 ? acc[pad + i] / d : 0.0;
    }
    return out;
}

// Magnitudes of a spectrogram, row-major [n_frames x n_bins].
inline std::vector<double> magnitudes(const Spectrogram& spec) {
    std::vector<double> mag(spec.data.size());
    for (std::size_t i = 0; i < spec.data.size(); ++i) mag[i] = std::abs(spec.data[i]);
    return mag;
}

}  // namespace waveguard
