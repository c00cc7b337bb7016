#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include <json.hpp>

#include "waveguard/audio.hpp"

namespace waveguard {

class MetricError : public Error {
  public:
    using Error::Error;
};

// Lowercase, runs of whitespace collapsed to single spaces, ends trimmed.
// Idempotent by construction.
inline std::string normalize_transcript(const std::string& raw) {
    std::string out;
    out.reserve(raw.size());
    bool pending_space = false;
    for (char c : raw) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            pending_space = !out.empty();
        } else {
            if (pending_space) out.push_back(' ');
            pending_space = false;
            out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        }
    }
    return out;
}

struct Transcript {
    std::string text;

    Transcript() = default;
    explicit Transcript(const std::string& raw) : text(normalize_transcript(raw)) {}

    std::size_t length() const { return text.size(); }
    bool operator==(const Transcript& other) const { return text == other.text; }
};

// Unit-cost Levenshtein distance over characters, spaces included.
inline std::size_t edit_distance(const Transcript& a, const Transcript& b) {
    const std::string& s = a.text;
    const std::string& t = b.text;
    if (s.empty()) return t.size();
    if (t.empty()) return s.size();

    std::vector<std::size_t> prev(t.size() + 1), cur(t.size() + 1);
    for (std::size_t j = 0; j <= t.size(); ++j) prev[j] = j;
    for (std::size_t i = 1; i <= s.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= t.size(); ++j) {
            const std::size_t sub = prev[j - 1] + (s[i - 1] == t[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    return prev[t.size()];
}

// Edit distance normalized by the longer string; cer("", "") is defined as 0.
inline double cer(const Transcript& a, const Transcript& b) {
    const std::size_t denom = std::max(a.length(), b.length());
    if (denom == 0) return 0.0;
    return static_cast<double>(edit_distance(a, b)) / static_cast<double>(denom);
}

// Max absolute sample difference in 16-bit integer units (x32768).
inline double linf(const AudioBuffer& x, const AudioBuffer& y) {
    if (x.size() != y.size()) throw MetricError("linf: buffer length mismatch");
    double m = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i)
        m = std::max(m, std::abs(x.samples[i] - y.samples[i]));
    return m * 32768.0;
}

// Relative loudness dB(delta) - dB(x) with dB(v) = max_i 20 log10 |v_i| over
// integer-domain magnitudes. Absolute value applied; log of a negative sample
// is undefined otherwise.
inline double db_relative(const AudioBuffer& x, const AudioBuffer& delta) {
    const double px = x.peak();
    const double pd = delta.peak();
    if (px <= 0.0) throw MetricError("db_relative: silent reference signal");
    if (pd <= 0.0) throw MetricError("db_relative: silent perturbation");
    return 20.0 * std::log10(pd * 32768.0) - 20.0 * std::log10(px * 32768.0);
}

struct RocPoint {
    double fpr = 0.0;
    double tpr = 0.0;
};

struct RocCurve {
    std::vector<RocPoint> points;  // sorted by FPR, from (0,0) to (1,1)
    double auc = 0.0;
};

inline void to_json(nlohmann::json& j, const RocCurve& roc) {
    nlohmann::json pts = nlohmann::json::array();
    for (const auto& p : roc.points) pts.push_back({{"fpr", p.fpr}, {"tpr", p.tpr}});
    j = nlohmann::json{{"points", pts}, {"auc", roc.auc}};
}

// Threshold sweep over the distinct scores; positive class is adversarial and
// a score >= threshold counts as positive. AUC by the trapezoid rule, which
// handles ties the same way as pair counting with half credit.
inline RocCurve roc_auc(const std::vector<double>& benign_scores,
                        const std::vector<double>& adv_scores) {
    if (benign_scores.empty() || adv_scores.empty())
        throw MetricError("roc_auc: both score lists must be non-empty");

    std::vector<double> thresholds;
    thresholds.reserve(benign_scores.size() + adv_scores.size());
    thresholds.insert(thresholds.end(), benign_scores.begin(), benign_scores.end());
    thresholds.insert(thresholds.end(), adv_scores.begin(), adv_scores.end());
    std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
    thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

    const double np = static_cast<double>(adv_scores.size());
    const double nn = static_cast<double>(benign_scores.size());

    RocCurve roc;
    roc.points.push_back({0.0, 0.0});
    for (double t : thresholds) {
        std::size_t tp = 0, fp = 0;
        for (double s : adv_scores) tp += s >= t ? 1 : 0;
        for (double s : benign_scores) fp += s >= t ? 1 : 0;
        roc.points.push_back({static_cast<double>(fp) / nn, static_cast<double>(tp) / np});
    }
    if (roc.points.back().fpr != 1.0 || roc.points.back().tpr != 1.0)
        roc.points.push_back({1.0, 1.0});

    double auc = 0.0;
    for (std::size_t i = 1; i < roc.points.size(); ++i) {
        const auto& a = roc.points[i - 1];
        const auto& b = roc.points[i];
        auc += (b.fpr - a.fpr) * (a.tpr + b.tpr) / 2.0;
    }
    roc.auc = auc;
    return roc;
}

struct Calibration {
    double threshold = 0.0;
    double accuracy = 0.0;
};

// Best-accuracy threshold for the rule "adversarial iff score > t". Candidates
// are the midpoints of consecutive distinct scores plus the maximum score;
// ties break toward the smaller threshold.
inline Calibration calibrate_threshold(const std::vector<double>& benign_scores,
                                       const std::vector<double>& adv_scores) {
    if (benign_scores.empty() || adv_scores.empty())
        throw MetricError("calibrate_threshold: both score lists must be non-empty");

    std::vector<double> distinct;
    distinct.insert(distinct.end(), benign_scores.begin(), benign_scores.end());
    distinct.insert(distinct.end(), adv_scores.begin(), adv_scores.end());
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());

    std::vector<double> candidates;
    for (std::size_t i = 1; i < distinct.size(); ++i)
        candidates.push_back((distinct[i - 1] + distinct[i]) / 2.0);
    candidates.push_back(distinct.back());
    std::sort(candidates.begin(), candidates.end());

    const double total = static_cast<double>(benign_scores.size() + adv_scores.size());
    Calibration best{candidates.front(), -1.0};
    for (double t : candidates) {
        std::size_t correct = 0;
        for (double s : adv_scores) correct += s > t ? 1 : 0;
        for (double s : benign_scores) correct += s > t ? 0 : 1;
        const double acc = static_cast<double>(correct) / total;
        if (acc > best.accuracy) best = {t, acc};
    }
    return best;
}

}  // namespace waveguard
