#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "waveguard/lpc.hpp"
#include "waveguard/rng.hpp"
#include "support/fixtures.hpp"

using namespace waveguard;
using waveguard::testing::speechlike;

namespace {

// Stable AR(4): conjugate pole pairs at radius 0.8, angles 0.3 and 1.1 rad.
// Expanding (1 - p z^-1) factors gives the recursion coefficients.
std::vector<double> ar4_true_coefficients() {
    const double r = 0.8;
    const double t1 = 0.3, t2 = 1.1;
    // (1 - 2r cos t z^-1 + r^2 z^-2) per pair; multiply the two quadratics.
    const double b1 = -2.0 * r * std::cos(t1), b2 = r * r;
    const double c1 = -2.0 * r * std::cos(t2), c2 = r * r;
    const double q1 = b1 + c1;
    const double q2 = b2 + c2 + b1 * c1;
    const double q3 = b1 * c2 + c1 * b2;
    const double q4 = b2 * c2;
    // x(n) = sum a_k x(n-k) + e(n)  with  a_k = -q_k.
    return {-q1, -q2, -q3, -q4};
}

AudioBuffer ar4_process(std::size_t n, std::uint64_t seed) {
    const std::vector<double> a = ar4_true_coefficients();
    AudioBuffer x;
    x.sample_rate = 16000;
    const std::size_t warmup = 1000;
    std::vector<double> buf(n + warmup, 0.0);
    for (std::size_t i = 4; i < buf.size(); ++i) {
        double v = rng::gaussian(seed, 0, i);
        for (std::size_t k = 0; k < 4; ++k) v += a[k] * buf[i - 1 - k];
        buf[i] = v;
    }
    x.samples.assign(buf.begin() + warmup, buf.end());
    return x;
}

}  // namespace

TEST_CASE("levinson-durbin recovers AR(4) coefficients within 0.1") {
    const std::vector<double> truth = ar4_true_coefficients();
    const AudioBuffer x = ar4_process(8192, 42);

    const std::vector<double> window = hann_window(x.size());
    std::vector<double> windowed(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) windowed[i] = x.samples[i] * window[i];

    const LpcFrame frame = lpc_analyze_frame(windowed, 4);
    REQUIRE(frame.coefficients.size() == 4);
    for (std::size_t k = 0; k < 4; ++k)
        CHECK(std::abs(frame.coefficients[k] - truth[k]) < 0.1);
}

TEST_CASE("residual energy never exceeds frame energy on speech-like frames") {
    const AudioBuffer x = speechlike(1.5);
    const std::size_t frame_length = 400, hop = 200, order = 20;
    const std::vector<double> window = hann_window(frame_length);

    std::size_t checked = 0;
    for (std::size_t base = 0; base + frame_length <= x.size(); base += hop) {
        std::vector<double> windowed(frame_length);
        double frame_energy = 0.0;
        for (std::size_t i = 0; i < frame_length; ++i) {
            windowed[i] = x.samples[base + i] * window[i];
            frame_energy += windowed[i] * windowed[i];
        }
        if (frame_energy <= 0.0) continue;
        const LpcFrame frame = lpc_analyze_frame(windowed, order);
        CHECK(lpc_residual_energy(windowed, frame) <= frame_energy * (1.0 + 1e-9));
        ++checked;
    }
    CHECK(checked > 50);
}

TEST_CASE("lpc_transform on all-zero input is all-zero") {
    AudioBuffer x;
    x.sample_rate = 16000;
    x.samples.assign(8000, 0.0);
    const AudioBuffer out = lpc_transform(x, 20);
    REQUIRE(out.size() == x.size());
    for (double s : out.samples) CHECK(s == 0.0);
}

TEST_CASE("lpc_transform is bit-identical across runs with a fixed seed") {
    const AudioBuffer x = speechlike(0.8);
    const AudioBuffer a = lpc_transform(x, 20, 25.0, 12.5, 1234);
    const AudioBuffer b = lpc_transform(x, 20, 25.0, 12.5, 1234);
    CHECK(a.samples == b.samples);

    const AudioBuffer other = lpc_transform(x, 20, 25.0, 12.5, 1235);
    CHECK(a.samples != other.samples);
}

TEST_CASE("lpc_transform output stays in [-1, 1] and preserves geometry") {
    const AudioBuffer x = speechlike(1.0);
    const AudioBuffer out = lpc_transform(x, 20);
    CHECK(out.size() == x.size());
    CHECK(out.sample_rate == x.sample_rate);
    for (double s : out.samples) {
        CHECK(s <= 1.0);
        CHECK(s >= -1.0);
    }
    CHECK(out.rms() > 1e-4);
}

TEST_CASE("lpc_transform rejects an order wider than the window") {
    const AudioBuffer x = speechlike(0.3);
    CHECK_THROWS_AS(lpc_transform(x, 400, 25.0, 12.5, 0), GeometryError);
}
