#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace waveguard {

class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Malformed or unsupported WAV input; the message names the violation.
class WavFormatError : public Error {
  public:
    using Error::Error;
};

class IoError : public Error {
  public:
    using Error::Error;
};

// Mono waveform, double samples in [-1, 1], 16-bit PCM at the file boundary only.
struct AudioBuffer {
    std::vector<double> samples;
    int sample_rate = 16000;

    std::size_t size() const { return samples.size(); }
    bool empty() const { return samples.empty(); }

    double rms() const {
        if (samples.empty()) return 0.0;
        double acc = 0.0;
        for (double s : samples) acc += s * s;
        return std::sqrt(acc / static_cast<double>(samples.size()));
    }

    double peak() const {
        double p = 0.0;
        for (double s : samples) p = std::max(p, std::abs(s));
        return p;
    }
};

namespace detail {

inline std::uint32_t read_u32le(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline std::uint16_t read_u16le(const unsigned char* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

inline void write_u32le(std::ostream& out, std::uint32_t v) {
    const char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                       static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
    out.write(b, 4);
}

inline void write_u16le(std::ostream& out, std::uint16_t v) {
    const char b[2] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff)};
    out.write(b, 2);
}

}  // namespace detail

// Reads a RIFF/WAVE file. Accepts PCM, 16-bit, mono only; anything else is a
// WavFormatError naming the offending field. Samples are normalized by 1/32768.
inline AudioBuffer load_wav(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open WAV file: " + path);

    unsigned char hdr[12];
    if (!in.read(reinterpret_cast<char*>(hdr), 12))
        throw WavFormatError("truncated RIFF header: " + path);
    if (std::string(reinterpret_cast<char*>(hdr), 4) != "RIFF")
        throw WavFormatError("missing RIFF tag: " + path);
    if (std::string(reinterpret_cast<char*>(hdr) + 8, 4) != "WAVE")
        throw WavFormatError("missing WAVE tag: " + path);

    bool have_fmt = false;
    std::uint16_t format_tag = 0, channels = 0, bits = 0;
    std::uint32_t rate = 0;
    std::vector<unsigned char> data;
    bool have_data = false;

    unsigned char chdr[8];
    while (in.read(reinterpret_cast<char*>(chdr), 8)) {
        const std::string id(reinterpret_cast<char*>(chdr), 4);
        const std::uint32_t csize = detail::read_u32le(chdr + 4);
        if (id == "fmt ") {
            if (csize < 16) throw WavFormatError("fmt chunk too small: " + path);
            std::vector<unsigned char> fmt(csize);
            if (!in.read(reinterpret_cast<char*>(fmt.data()), csize))
                throw WavFormatError("truncated fmt chunk: " + path);
            format_tag = detail::read_u16le(fmt.data());
            channels = detail::read_u16le(fmt.data() + 2);
            rate = detail::read_u32le(fmt.data() + 4);
            bits = detail::read_u16le(fmt.data() + 14);
            have_fmt = true;
        } else if (id == "data") {
            data.resize(csize);
            if (csize > 0 && !in.read(reinterpret_cast<char*>(data.data()), csize))
                throw WavFormatError("truncated data chunk: " + path);
            have_data = true;
        } else {
            in.seekg(csize + (csize & 1), std::ios::cur);
            continue;
        }
        if (csize & 1) in.seekg(1, std::ios::cur);
    }

    if (!have_fmt) throw WavFormatError("missing fmt chunk: " + path);
    if (!have_data) throw WavFormatError("missing data chunk: " + path);
    if (format_tag != 1)
        throw WavFormatError("unsupported codec (format tag " + std::to_string(format_tag) +
                             ", want PCM=1): " + path);
    if (channels != 1)
        throw WavFormatError("unsupported channel count " + std::to_string(channels) +
                             " (mono only): " + path);
    if (bits != 16)
        throw WavFormatError("unsupported bit depth " + std::to_string(bits) +
                             " (16-bit only): " + path);
    if (rate == 0) throw WavFormatError("zero sample rate: " + path);

    AudioBuffer out;
    out.sample_rate = static_cast<int>(rate);
    const std::size_t n = data.size() / 2;
    out.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto v = static_cast<std::int16_t>(detail::read_u16le(data.data() + 2 * i));
        out.samples[i] = static_cast<double>(v) / 32768.0;
    }
    return out;
}

// Writes 16-bit PCM mono. Out-of-range samples are clamped, so a round trip is
// exact to within the 1/32768 quantization step.
inline void save_wav(const AudioBuffer& buffer, const std::string& path) {
    if (buffer.empty()) throw Error("save_wav: refusing to write empty buffer");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot create WAV file: " + path);

    const std::uint32_t data_bytes = static_cast<std::uint32_t>(buffer.size() * 2);
    out.write("RIFF", 4);
    detail::write_u32le(out, 36 + data_bytes);
    out.write("WAVE", 4);
    out.write("fmt ", 4);
    detail::write_u32le(out, 16);
    detail::write_u16le(out, 1);  // PCM
    detail::write_u16le(out, 1);  // mono
    detail::write_u32le(out, static_cast<std::uint32_t>(buffer.sample_rate));
    detail::write_u32le(out, static_cast<std::uint32_t>(buffer.sample_rate) * 2);
    detail::write_u16le(out, 2);
    detail::write_u16le(out, 16);
    out.write("data", 4);
    detail::write_u32le(out, data_bytes);
    for (double s : buffer.samples) {
        double scaled = std::round(s * 32768.0);
        scaled = std::clamp(scaled, -32768.0, 32767.0);
        detail::write_u16le(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(scaled)));
    }
    if (!out) throw IoError("write failure: " + path);
}

}  // namespace waveguard
