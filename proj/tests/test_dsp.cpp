#include <catch2/catch_amalgamated.hpp>

#include <complex>

#include "waveguard/dsp.hpp"
#include "support/fixtures.hpp"

using namespace waveguard;
using waveguard::testing::sine;
using waveguard::testing::white_noise;

namespace {

// Direct O(N^2) DFT oracle, independent of the FFT path.
std::vector<std::complex<double>> naive_dft(const std::vector<double>& x) {
    const std::size_t n = x.size();
    std::vector<std::complex<double>> out(n);
    for (std::size_t k = 0; k < n; ++k) {
        std::complex<double> acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double a = -2.0 * kPi * static_cast<double>(k * i) / static_cast<double>(n);
            acc += x[i] * std::complex<double>(std::cos(a), std::sin(a));
        }
        out[k] = acc;
    }
    return out;
}

double roundtrip_rms_error(const AudioBuffer& x, std::size_t frame, std::size_t hop) {
    const AudioBuffer back = istft(stft(x, frame, hop));
    REQUIRE(back.size() == x.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = back.samples[i] - x.samples[i];
        acc += d * d;
    }
    return std::sqrt(acc / static_cast<double>(x.size()));
}

}  // namespace

TEST_CASE("FFT matches the naive DFT oracle") {
    AudioBuffer x = white_noise(0.0, 0.3);
    x.samples.resize(64);
    for (std::size_t i = 0; i < 64; ++i) x.samples[i] = 0.4 * std::sin(0.17 * i) + 0.1 * i / 64.0;

    std::vector<std::complex<double>> a(64);
    for (std::size_t i = 0; i < 64; ++i) a[i] = x.samples[i];
    Fft(64).forward(a);
    const auto oracle = naive_dft(x.samples);
    for (std::size_t k = 0; k < 64; ++k) CHECK(std::abs(a[k] - oracle[k]) < 1e-9);
}

TEST_CASE("stft of DC concentrates in bin 0 with the Hann window sum") {
    AudioBuffer x;
    x.samples.assign(4000, 1.0);
    const Spectrogram spec = stft(x, 512, 128);
    CHECK(spec.n_frames == 1 + (4000 + 127) / 128);
    CHECK(spec.n_bins == 257);

    const std::vector<double> w = hann_window(512);
    double wsum = 0.0;
    for (double v : w) wsum += v;

    const std::size_t mid = spec.n_frames / 2;
    CHECK(std::abs(spec.at(mid, 0)) == Catch::Approx(wsum).epsilon(1e-3));
    for (std::size_t k = 2; k < spec.n_bins; ++k)
        CHECK(std::abs(spec.at(mid, k)) < 1e-3 * wsum);
}

TEST_CASE("stft peak bin of a 1 kHz sine is round(1000*512/16000)") {
    const AudioBuffer x = sine(1000.0, 0.5);
    const Spectrogram spec = stft(x, 512, 128);
    const std::size_t mid = spec.n_frames / 2;
    std::size_t argmax = 0;
    for (std::size_t k = 1; k < spec.n_bins; ++k)
        if (std::abs(spec.at(mid, k)) > std::abs(spec.at(mid, argmax))) argmax = k;
    CHECK(argmax == 32);
}

TEST_CASE("stft of silence is all zero") {
    AudioBuffer x;
    x.samples.assign(3000, 0.0);
    const Spectrogram spec = stft(x);
    for (const auto& v : spec.data) CHECK(std::abs(v) == 0.0);
}

TEST_CASE("stft rejects invalid geometry") {
    AudioBuffer empty;
    CHECK_THROWS_AS(stft(empty), GeometryError);
    const AudioBuffer x = sine(440.0, 0.1);
    CHECK_THROWS_AS(stft(x, 500, 128), GeometryError);  // not a power of two
    CHECK_THROWS_AS(stft(x, 512, 1024), GeometryError);
}

TEST_CASE("istft(stft(x)) reconstructs within 1e-6 RMS") {
    for (std::size_t hop : {256u, 128u}) {
        CHECK(roundtrip_rms_error(white_noise(0.4, 0.4, 21), 512, hop) < 1e-6);
        CHECK(roundtrip_rms_error(sine(523.0, 0.37, 0.7), 512, hop) < 1e-6);
    }
    // Length not a hop multiple.
    AudioBuffer odd = white_noise(0.0, 0.4, 5);
    odd.samples.resize(5003);
    CHECK(roundtrip_rms_error(odd, 512, 128) < 1e-6);
}

TEST_CASE("istft of an all-zero spectrogram is silence") {
    const AudioBuffer x = sine(440.0, 0.2);
    Spectrogram spec = stft(x);
    for (auto& v : spec.data) v = 0.0;
    const AudioBuffer out = istft(spec);
    for (double s : out.samples) CHECK(s == 0.0);
}

TEST_CASE("istft rejects inconsistent frame dimensions") {
    const AudioBuffer x = sine(440.0, 0.2);
    Spectrogram spec = stft(x);
    spec.data.pop_back();
    CHECK_THROWS_AS(istft(spec), GeometryError);
    Spectrogram bad = stft(x);
    bad.n_bins = 13;
    CHECK_THROWS_AS(istft(bad), GeometryError);
}

TEST_CASE("stft is linear in its input") {
    const AudioBuffer x = white_noise(0.2, 0.3, 9);
    AudioBuffer scaled = x;
    for (double& s : scaled.samples) s *= 2.5;
    const Spectrogram sx = stft(x);
    const Spectrogram ss = stft(scaled);
    for (std::size_t i = 0; i < sx.data.size(); ++i) {
        const std::complex<double> want = 2.5 * sx.data[i];
        CHECK(std::abs(ss.data[i] - want) <= 1e-9 * (1.0 + std::abs(want)));
    }
}

TEST_CASE("Parseval: windowed frame energy equals spectrum energy / N") {
    const AudioBuffer x = white_noise(0.3, 0.4, 33);
    const std::size_t frame = 512, hop = 128;
    const Spectrogram spec = stft(x, frame, hop);
    const std::vector<double> w = hann_window(frame);

    // Recompute the windowed frame directly from the same padding rule.
    const std::size_t t = spec.n_frames / 2;
    const long long start = static_cast<long long>(t * hop) - static_cast<long long>(frame / 2);
    double time_energy = 0.0;
    for (std::size_t i = 0; i < frame; ++i) {
        const double v =
            waveguard::detail::reflect_sample(x.samples, start + static_cast<long long>(i)) * w[i];
        time_energy += v * v;
    }

    double freq_energy = std::norm(spec.at(t, 0)) + std::norm(spec.at(t, spec.n_bins - 1));
    for (std::size_t k = 1; k + 1 < spec.n_bins; ++k) freq_energy += 2.0 * std::norm(spec.at(t, k));
    freq_energy /= static_cast<double>(frame);

    CHECK(freq_energy == Catch::Approx(time_energy).epsilon(1e-6));
}
