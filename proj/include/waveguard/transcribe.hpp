#pragma once

#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include <unistd.h>

#include <httplib.h>

#include "waveguard/audio.hpp"
#include "waveguard/metrics.hpp"
#include "waveguard/rng.hpp"

namespace waveguard {

// Backend failure (nonzero exit, HTTP error, timeout) with diagnostics.
class TranscriptionError : public Error {
  public:
    using Error::Error;
};

// --- Mock transcriber ----------------------------------------------------------

// Coarse energy signature: per-frame RMS quantized on a linear ladder. Small
// perturbations stay inside a ladder cell and map to the same signature;
// transformation-scale distortion moves cells.
struct FingerprintParams {
    std::size_t frame_length = 1600;  // 100 ms at 16 kHz
    double rms_quantum = 0.05;
};

inline std::vector<int> fingerprint_levels(const AudioBuffer& x,
                                           const FingerprintParams& params = {}) {
    std::vector<int> levels;
    const std::size_t n = x.size();
    for (std::size_t base = 0; base < n; base += params.frame_length) {
        const std::size_t end = std::min(n, base + params.frame_length);
        double acc = 0.0;
        for (std::size_t i = base; i < end; ++i) acc += x.samples[i] * x.samples[i];
        const double rms = std::sqrt(acc / static_cast<double>(end - base));
        levels.push_back(static_cast<int>(std::lround(rms / params.rms_quantum)));
    }
    return levels;
}

inline std::string fingerprint_key(const std::vector<int>& levels) {
    std::string key;
    for (std::size_t i = 0; i < levels.size(); ++i) {
        if (i) key.push_back('.');
        key += std::to_string(levels[i]);
    }
    return key;
}

inline std::string fingerprint(const AudioBuffer& x, const FingerprintParams& params = {}) {
    return fingerprint_key(fingerprint_levels(x, params));
}

// Deterministically substitutes or deletes ceil(severity * len) characters.
// severity 0 is the identity; substituted characters never equal the original.
inline Transcript mock_garble(const Transcript& base, double severity, std::uint64_t seed) {
    const std::string& text = base.text;
    if (text.empty() || severity <= 0.0) return base;
    severity = std::min(severity, 1.0);
    const std::size_t n_edits =
        static_cast<std::size_t>(std::ceil(severity * static_cast<double>(text.size())));

    std::vector<std::size_t> order(text.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (std::size_t i = order.size(); i > 1; --i) {
        const std::size_t j = rng::hash(seed, 1, i) % i;
        std::swap(order[i - 1], order[j]);
    }

    std::string result = text;
    std::vector<bool> deleted(text.size(), false);
    for (std::size_t e = 0; e < n_edits && e < order.size(); ++e) {
        const std::size_t pos = order[e];
        const std::uint64_t h = rng::hash(seed, 2, pos);
        if (h % 10 < 3) {
            deleted[pos] = true;
        } else {
            const char orig = text[pos];
            char sub;
            if (orig >= 'a' && orig <= 'z')
                sub = static_cast<char>('a' + (orig - 'a' + 1 + h % 25) % 26);
            else
                sub = static_cast<char>('a' + h % 26);
            result[pos] = sub;
        }
    }
    std::string final_text;
    for (std::size_t i = 0; i < result.size(); ++i)
        if (!deleted[i]) final_text.push_back(result[i]);
    return Transcript(final_text);
}

struct MockEntry {
    std::vector<int> levels;
    Transcript transcript;
};

// Scripted transcriber for closed-loop tests. Exact-signature hits return the
// scripted transcript; misses fall back to either a fixed string or a garbled
// copy of the nearest scripted transcript with severity proportional to the
// signature distance.
struct MockSpec {
    enum class Fallback { Fixed, NearestGarble };

    std::map<std::string, MockEntry> script;
    Fallback fallback = Fallback::NearestGarble;
    std::string fixed_text;
    double garble_scale = 0.25;
    std::uint64_t seed = 0;
    FingerprintParams fingerprint_params;

    void add_entry(const AudioBuffer& audio, const std::string& transcript) {
        const std::vector<int> levels = fingerprint_levels(audio, fingerprint_params);
        script[fingerprint_key(levels)] = MockEntry{levels, Transcript(transcript)};
    }
};

namespace detail {

inline double fingerprint_distance(const std::vector<int>& a, const std::vector<int>& b) {
    const std::size_t n = std::max(a.size(), b.size());
    if (n == 0) return 0.0;
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const int va = i < a.size() ? a[i] : 0;
        const int vb = i < b.size() ? b[i] : 0;
        acc += std::abs(va - vb);
    }
    return acc / static_cast<double>(n);
}

inline Transcript transcribe_mock(const MockSpec& spec, const AudioBuffer& x) {
    const std::vector<int> levels = fingerprint_levels(x, spec.fingerprint_params);
    const std::string key = fingerprint_key(levels);
    const auto hit = spec.script.find(key);
    if (hit != spec.script.end()) return hit->second.transcript;

    if (spec.fallback == MockSpec::Fallback::Fixed || spec.script.empty())
        return Transcript(spec.fixed_text);

    const MockEntry* nearest = nullptr;
    double best = 0.0;
    for (const auto& [k, entry] : spec.script) {
        const double d = fingerprint_distance(levels, entry.levels);
        if (!nearest || d < best) {
            nearest = &entry;
            best = d;
        }
    }
    const double severity = std::min(1.0, spec.garble_scale * best);
    return mock_garble(nearest->transcript, severity, spec.seed);
}

}  // namespace detail

// --- Subprocess transcriber ------------------------------------------------------

// Shell command with an {input} placeholder for the WAV path; the transcript
// is the trimmed stdout of a zero-exit run.
struct SubprocessSpec {
    std::string command_template;
};

namespace detail {

struct TempWav {
    std::filesystem::path path;

    explicit TempWav(const AudioBuffer& x) {
        static std::atomic<std::uint64_t> counter{0};
        const std::uint64_t id = counter.fetch_add(1);
        path = std::filesystem::temp_directory_path() /
               ("waveguard_" + std::to_string(::getpid()) + "_" + std::to_string(id) + ".wav");
        save_wav(x, path.string());
    }
    ~TempWav() {
        std::error_code ec;
        std::filesystem::remove(path, ec);
    }
    TempWav(const TempWav&) = delete;
    TempWav& operator=(const TempWav&) = delete;
};

inline std::string shell_quote(const std::string& s) {
    std::string out = "'";
    for (char c : s) {
        if (c == '\'')
            out += "'\\''";
        else
            out.push_back(c);
    }
    out.push_back('\'');
    return out;
}

inline Transcript transcribe_subprocess(const SubprocessSpec& spec, const AudioBuffer& x) {
    if (spec.command_template.find("{input}") == std::string::npos)
        throw TranscriptionError("subprocess transcriber: command template lacks {input}");

    const TempWav wav(x);
    std::string cmd = spec.command_template;
    const std::string quoted = shell_quote(wav.path.string());
    for (std::size_t pos = cmd.find("{input}"); pos != std::string::npos;
         pos = cmd.find("{input}", pos + quoted.size()))
        cmd.replace(pos, 7, quoted);

    FILE* pipe = ::popen(cmd.c_str(), "r");
    if (!pipe) throw TranscriptionError("subprocess transcriber: popen failed for: " + cmd);
    std::string output;
    std::array<char, 4096> chunk{};
    std::size_t got = 0;
    while ((got = std::fread(chunk.data(), 1, chunk.size(), pipe)) > 0)
        output.append(chunk.data(), got);
    const int status = ::pclose(pipe);
    if (status != 0)
        throw TranscriptionError("subprocess transcriber: exit status " + std::to_string(status) +
                                 " from: " + cmd);
    return Transcript(output);
}

}  // namespace detail

// --- HTTP transcriber --------------------------------------------------------------

// POST audio/wav body; a 200 text response is the transcript.
struct HttpSpec {
    std::string endpoint;  // e.g. "http://127.0.0.1:8080/transcribe"
    int timeout_ms = 10000;
};

namespace detail {

inline std::string wav_bytes(const AudioBuffer& x) {
    const TempWav wav(x);
    std::ifstream in(wav.path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void split_endpoint(const std::string& endpoint, std::string& host_port,
                           std::string& path) {
    std::string rest = endpoint;
    const std::size_t scheme = rest.find("://");
    std::string prefix;
    if (scheme != std::string::npos) {
        prefix = rest.substr(0, scheme + 3);
        rest = rest.substr(scheme + 3);
    }
    const std::size_t slash = rest.find('/');
    if (slash == std::string::npos) {
        host_port = prefix + rest;
        path = "/";
    } else {
        host_port = prefix + rest.substr(0, slash);
        path = rest.substr(slash);
    }
}

}  // namespace detail

inline Transcript transcribe_http(const HttpSpec& spec, const AudioBuffer& x) {
    if (spec.timeout_ms <= 0) throw TranscriptionError("http transcriber: timeout must be > 0");
    std::string host_port, path;
    detail::split_endpoint(spec.endpoint, host_port, path);

    httplib::Client client(host_port);
    client.set_connection_timeout(0, spec.timeout_ms * 1000);
    client.set_read_timeout(spec.timeout_ms / 1000, (spec.timeout_ms % 1000) * 1000);

    const std::string body = detail::wav_bytes(x);
    const httplib::Result res = client.Post(path, body, "audio/wav");
    if (!res)
        throw TranscriptionError("http transcriber: request to " + spec.endpoint +
                                 " failed: " + httplib::to_string(res.error()));
    if (res->status != 200)
        throw TranscriptionError("http transcriber: HTTP " + std::to_string(res->status) +
                                 " from " + spec.endpoint);
    return Transcript(res->body);
}

// --- Dispatch ------------------------------------------------------------------------

using TranscriberSpec = std::variant<SubprocessSpec, HttpSpec, MockSpec>;

inline Transcript transcribe(const TranscriberSpec& spec, const AudioBuffer& x) {
    struct Visitor {
        const AudioBuffer& x;
        Transcript operator()(const SubprocessSpec& s) const {
            return detail::transcribe_subprocess(s, x);
        }
        Transcript operator()(const HttpSpec& s) const { return transcribe_http(s, x); }
        Transcript operator()(const MockSpec& s) const { return detail::transcribe_mock(s, x); }
    };
    return std::visit(Visitor{x}, spec);
}

}  // namespace waveguard
