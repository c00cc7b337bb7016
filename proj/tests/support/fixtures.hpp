#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "waveguard/audio.hpp"
#include "waveguard/rng.hpp"

namespace waveguard::testing {

inline AudioBuffer sine(double freq, double seconds, double amplitude = 0.5,
                        int sample_rate = 16000) {
    AudioBuffer buf;
    buf.sample_rate = sample_rate;
    const auto n = static_cast<std::size_t>(seconds * sample_rate);
    buf.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        buf.samples[i] = amplitude * std::sin(2.0 * 3.14159265358979323846 * freq *
                                              static_cast<double>(i) / sample_rate);
    return buf;
}

inline AudioBuffer white_noise(double seconds, double amplitude = 0.3, std::uint64_t seed = 7,
                               int sample_rate = 16000) {
    AudioBuffer buf;
    buf.sample_rate = sample_rate;
    const auto n = static_cast<std::size_t>(seconds * sample_rate);
    buf.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        buf.samples[i] = amplitude * (2.0 * rng::uniform(seed, 0, i) - 1.0);
    return buf;
}

// Harmonic-plus-noise signal with a slow envelope and pauses; stands in for a
// speech recording where the tests call for one.
inline AudioBuffer speechlike(double seconds, std::uint64_t seed = 11, int sample_rate = 16000) {
    AudioBuffer buf;
    buf.sample_rate = sample_rate;
    const auto n = static_cast<std::size_t>(seconds * sample_rate);
    buf.samples.resize(n);
    const double pi = 3.14159265358979323846;
    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / sample_rate;
        const double f0 = 140.0 + 40.0 * std::sin(2.0 * pi * 1.3 * t);
        const double envelope = 0.5 * (1.0 + std::sin(2.0 * pi * 2.1 * t));
        const double gate = std::fmod(t, 0.9) < 0.7 ? 1.0 : 0.05;
        double v = 0.0;
        double phase = 2.0 * pi * f0 * t;
        v += 0.5 * std::sin(phase);
        v += 0.25 * std::sin(2.0 * phase + 0.3);
        v += 0.12 * std::sin(3.0 * phase + 1.1);
        v += 0.08 * (2.0 * rng::uniform(seed, 1, i) - 1.0);
        buf.samples[i] = 0.55 * envelope * gate * v;
    }
    return buf;
}

// Unique scratch directory, removed on destruction.
struct TempDir {
    std::filesystem::path path;

    explicit TempDir(const std::string& tag) {
        path = std::filesystem::temp_directory_path() /
               ("waveguard_test_" + tag + "_" + std::to_string(::getpid()));
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    std::string file(const std::string& name) const { return (path / name).string(); }
};

}  // namespace waveguard::testing
