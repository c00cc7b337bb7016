#pragma once

#include <chrono>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "waveguard/metrics.hpp"
#include "waveguard/transcribe.hpp"
#include "waveguard/transforms.hpp"

namespace waveguard {

class ManifestError : public Error {
  public:
    using Error::Error;
};

class EmptyClassError : public Error {
  public:
    using Error::Error;
};

enum class Verdict { Benign, Adversarial };

inline const char* to_string(Verdict v) {
    return v == Verdict::Adversarial ? "adversarial" : "benign";
}

struct DetectionTimings {
    double transform_ms = 0.0;
    double transcribe_x_ms = 0.0;
    double transcribe_gx_ms = 0.0;
};

struct DetectionResult {
    double cer_x_gx = 0.0;
    Verdict verdict = Verdict::Benign;
    double threshold = 0.0;
    Transcript transcript_x;
    Transcript transcript_gx;
    DetectionTimings timings;
};

namespace detail {

inline double elapsed_ms(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
        .count();
}

}  // namespace detail

// The decision rule: adversarial iff CER(C(x), C(g(x))) > t, strictly.
inline DetectionResult detect(const AudioBuffer& x, const TransformConfig& g,
                              const TranscriberSpec& transcriber, double threshold) {
    if (threshold < 0.0 || threshold > 1.0) throw ConfigError("detect: threshold must be in [0,1]");

    DetectionResult result;
    result.threshold = threshold;

    auto t0 = std::chrono::steady_clock::now();
    const AudioBuffer gx = apply_transform(g, x);
    result.timings.transform_ms = detail::elapsed_ms(t0);

    t0 = std::chrono::steady_clock::now();
    result.transcript_x = transcribe(transcriber, x);
    result.timings.transcribe_x_ms = detail::elapsed_ms(t0);

    t0 = std::chrono::steady_clock::now();
    result.transcript_gx = transcribe(transcriber, gx);
    result.timings.transcribe_gx_ms = detail::elapsed_ms(t0);

    result.cer_x_gx = cer(result.transcript_x, result.transcript_gx);
    result.verdict = result.cer_x_gx > threshold ? Verdict::Adversarial : Verdict::Benign;
    return result;
}

// --- Manifests -----------------------------------------------------------------

// One evaluation pair: a benign recording, its attacked counterpart, and the
// reference transcript.
struct ManifestRow {
    std::string id;
    std::string benign_path;
    std::string adversarial_path;
    std::string transcript;
    std::string attack_label;
};

inline std::vector<ManifestRow> load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ManifestError("cannot open manifest: " + path);
    std::vector<ManifestRow> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ManifestError("manifest " + path + " line " + std::to_string(line_no) + ": " +
                                e.what());
        }
        ManifestRow row;
        row.id = j.value("id", std::to_string(line_no));
        row.benign_path = j.value("benign", "");
        row.adversarial_path = j.value("adversarial", "");
        row.transcript = j.value("transcript", "");
        row.attack_label = j.value("attack_label", "unknown");
        rows.push_back(std::move(row));
    }
    return rows;
}

inline void save_manifest(const std::vector<ManifestRow>& rows, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot create manifest: " + path);
    for (const auto& row : rows) {
        const nlohmann::json j{{"id", row.id},
                               {"benign", row.benign_path},
                               {"adversarial", row.adversarial_path},
                               {"transcript", row.transcript},
                               {"attack_label", row.attack_label}};
        out << j.dump() << "\n";
    }
}

// --- Evaluation ------------------------------------------------------------------

struct RowResult {
    std::string id;
    std::string attack_label;
    double benign_score = 0.0;      // CER(C(x), C(g(x))) for the benign file
    double adversarial_score = 0.0; // same for the adversarial file
    double recovery_score = 0.0;    // CER(reference transcript, C(g(adv)))
    Verdict benign_verdict = Verdict::Benign;
    Verdict adversarial_verdict = Verdict::Benign;
    DetectionTimings benign_timings;
    DetectionTimings adversarial_timings;
};

struct RowFailure {
    std::string id;
    std::string message;
};

struct MeanCerTriplet {
    double benign_transformed = 0.0;       // CER(orig, g(orig))
    double adversarial_transformed = 0.0;  // CER(adv, g(adv))
    double recovery = 0.0;                 // CER(orig transcript, C(g(adv)))
    std::size_t count = 0;
};

struct AttackSummary {
    MeanCerTriplet mean_cer;
    double auc = 0.0;
    double accuracy = 0.0;
};

struct EvaluationReport {
    std::vector<RowResult> rows;
    std::vector<RowFailure> failures;
    RocCurve roc;
    double threshold = 0.0;
    std::string threshold_source;  // "calibrated", "fixed" or "preset:<name>"
    double accuracy = 0.0;
    MeanCerTriplet mean_cer;
    std::map<std::string, AttackSummary> per_attack;
    DetectionTimings mean_timings;
};

struct EvaluateOptions {
    unsigned jobs = 1;
    std::optional<double> fixed_threshold;
    std::string threshold_label;  // populated for presets
};

namespace detail {

struct ScoredPair {
    double benign = 0.0;
    double adversarial = 0.0;
};

// Scores one manifest row end to end; throws on missing files or backend
// failures so the caller can record the row as failed.
inline RowResult score_row(const ManifestRow& row, const TransformConfig& g,
                           const TranscriberSpec& transcriber) {
    RowResult r;
    r.id = row.id;
    r.attack_label = row.attack_label;

    const AudioBuffer benign = load_wav(row.benign_path);
    const AudioBuffer adversarial = load_wav(row.adversarial_path);

    auto t0 = std::chrono::steady_clock::now();
    const AudioBuffer g_benign = apply_transform(g, benign);
    r.benign_timings.transform_ms = elapsed_ms(t0);
    t0 = std::chrono::steady_clock::now();
    const AudioBuffer g_adv = apply_transform(g, adversarial);
    r.adversarial_timings.transform_ms = elapsed_ms(t0);

    t0 = std::chrono::steady_clock::now();
    const Transcript c_benign = transcribe(transcriber, benign);
    r.benign_timings.transcribe_x_ms = elapsed_ms(t0);
    t0 = std::chrono::steady_clock::now();
    const Transcript c_g_benign = transcribe(transcriber, g_benign);
    r.benign_timings.transcribe_gx_ms = elapsed_ms(t0);

    t0 = std::chrono::steady_clock::now();
    const Transcript c_adv = transcribe(transcriber, adversarial);
    r.adversarial_timings.transcribe_x_ms = elapsed_ms(t0);
    t0 = std::chrono::steady_clock::now();
    const Transcript c_g_adv = transcribe(transcriber, g_adv);
    r.adversarial_timings.transcribe_gx_ms = elapsed_ms(t0);

    r.benign_score = cer(c_benign, c_g_benign);
    r.adversarial_score = cer(c_adv, c_g_adv);
    r.recovery_score = cer(Transcript(row.transcript), c_g_adv);
    return r;
}

inline std::vector<double> benign_scores(const std::vector<RowResult>& rows) {
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(r.benign_score);
    return out;
}

inline std::vector<double> adversarial_scores(const std::vector<RowResult>& rows) {
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(r.adversarial_score);
    return out;
}

inline void score_rows(const std::vector<ManifestRow>& manifest, const TransformConfig& g,
                       const TranscriberSpec& transcriber, unsigned jobs,
                       std::vector<RowResult>& results, std::vector<RowFailure>& failures) {
    std::vector<std::optional<RowResult>> slots(manifest.size());
    std::vector<std::optional<RowFailure>> fails(manifest.size());

    auto worker = [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            try {
                slots[i] = score_row(manifest[i], g, transcriber);
            } catch (const std::exception& e) {
                fails[i] = RowFailure{manifest[i].id, e.what()};
            }
        }
    };

    if (jobs <= 1) {
        worker(0, manifest.size());
    } else {
        std::vector<std::thread> threads;
        const std::size_t per = (manifest.size() + jobs - 1) / jobs;
        for (unsigned j = 0; j < jobs; ++j) {
            const std::size_t begin = std::min<std::size_t>(j * per, manifest.size());
            const std::size_t end = std::min<std::size_t>(begin + per, manifest.size());
            if (begin < end) threads.emplace_back(worker, begin, end);
        }
        for (auto& t : threads) t.join();
    }

    for (auto& s : slots)
        if (s) results.push_back(std::move(*s));
    for (auto& f : fails)
        if (f) failures.push_back(std::move(*f));
}

}  // namespace detail

// Scores every manifest pair, calibrates the threshold on the calibration
// manifest (unless a fixed threshold is supplied), and reports ROC/AUC,
// accuracy and the mean-CER triplet overall and per attack label. Per-row
// failures are recorded and excluded from the metrics rather than counted
// toward either class.
inline EvaluationReport evaluate(const std::vector<ManifestRow>& manifest,
                                 const TransformConfig& g, const TranscriberSpec& transcriber,
                                 const std::vector<ManifestRow>& calibration_manifest,
                                 const EvaluateOptions& options = {}) {
    if (manifest.empty()) throw EmptyClassError("evaluate: empty evaluation manifest");

    EvaluationReport report;
    detail::score_rows(manifest, g, transcriber, options.jobs, report.rows, report.failures);
    if (report.rows.empty())
        throw EmptyClassError("evaluate: every manifest row failed; no scores to evaluate");

    if (options.fixed_threshold) {
        report.threshold = *options.fixed_threshold;
        report.threshold_source =
            options.threshold_label.empty() ? "fixed" : options.threshold_label;
    } else {
        if (calibration_manifest.empty())
            throw EmptyClassError("evaluate: no calibration manifest and no fixed threshold");
        std::vector<RowResult> calib_rows;
        std::vector<RowFailure> calib_failures;
        detail::score_rows(calibration_manifest, g, transcriber, options.jobs, calib_rows,
                           calib_failures);
        if (calib_rows.empty())
            throw EmptyClassError("evaluate: every calibration row failed");
        const Calibration calib = calibrate_threshold(detail::benign_scores(calib_rows),
                                                      detail::adversarial_scores(calib_rows));
        report.threshold = calib.threshold;
        report.threshold_source = "calibrated";
    }

    std::size_t correct = 0;
    for (auto& row : report.rows) {
        row.benign_verdict =
            row.benign_score > report.threshold ? Verdict::Adversarial : Verdict::Benign;
        row.adversarial_verdict =
            row.adversarial_score > report.threshold ? Verdict::Adversarial : Verdict::Benign;
        correct += row.benign_verdict == Verdict::Benign ? 1 : 0;
        correct += row.adversarial_verdict == Verdict::Adversarial ? 1 : 0;
    }
    report.accuracy = static_cast<double>(correct) / static_cast<double>(2 * report.rows.size());
    report.roc = roc_auc(detail::benign_scores(report.rows),
                         detail::adversarial_scores(report.rows));

    auto accumulate_triplet = [](MeanCerTriplet& acc, const RowResult& r) {
        acc.benign_transformed += r.benign_score;
        acc.adversarial_transformed += r.adversarial_score;
        acc.recovery += r.recovery_score;
        acc.count += 1;
    };
    auto finish_triplet = [](MeanCerTriplet& acc) {
        if (acc.count == 0) return;
        const double n = static_cast<double>(acc.count);
        acc.benign_transformed /= n;
        acc.adversarial_transformed /= n;
        acc.recovery /= n;
    };

    std::map<std::string, std::vector<const RowResult*>> by_label;
    for (const auto& row : report.rows) {
        accumulate_triplet(report.mean_cer, row);
        by_label[row.attack_label].push_back(&row);
        report.mean_timings.transform_ms +=
            row.benign_timings.transform_ms + row.adversarial_timings.transform_ms;
        report.mean_timings.transcribe_x_ms +=
            row.benign_timings.transcribe_x_ms + row.adversarial_timings.transcribe_x_ms;
        report.mean_timings.transcribe_gx_ms +=
            row.benign_timings.transcribe_gx_ms + row.adversarial_timings.transcribe_gx_ms;
    }
    finish_triplet(report.mean_cer);
    const double calls = static_cast<double>(2 * report.rows.size());
    report.mean_timings.transform_ms /= calls;
    report.mean_timings.transcribe_x_ms /= calls;
    report.mean_timings.transcribe_gx_ms /= calls;

    for (const auto& [label, rows] : by_label) {
        AttackSummary summary;
        std::vector<double> ben, adv;
        std::size_t label_correct = 0;
        for (const RowResult* r : rows) {
            accumulate_triplet(summary.mean_cer, *r);
            ben.push_back(r->benign_score);
            adv.push_back(r->adversarial_score);
            label_correct += r->benign_verdict == Verdict::Benign ? 1 : 0;
            label_correct += r->adversarial_verdict == Verdict::Adversarial ? 1 : 0;
        }
        finish_triplet(summary.mean_cer);
        summary.auc = roc_auc(ben, adv).auc;
        summary.accuracy = static_cast<double>(label_correct) / static_cast<double>(2 * rows.size());
        report.per_attack[label] = summary;
    }
    return report;
}

// Mean transform-only wall-clock seconds over the manifest's benign files,
// single-threaded.
inline double timing_bench(const std::vector<ManifestRow>& manifest, const TransformConfig& g) {
    if (manifest.empty()) throw EmptyClassError("timing_bench: empty manifest");
    double total_ms = 0.0;
    for (const auto& row : manifest) {
        const AudioBuffer x = load_wav(row.benign_path);
        const auto t0 = std::chrono::steady_clock::now();
        const AudioBuffer gx = apply_transform(g, x);
        total_ms += detail::elapsed_ms(t0);
        (void)gx;
    }
    return total_ms / 1000.0 / static_cast<double>(manifest.size());
}

// --- Threshold presets ----------------------------------------------------------

// Published detection thresholds per transform/ASR pairing, for users running
// a real ASR backend.
inline const std::map<std::string, double>& threshold_presets() {
    static const std::map<std::string, double> presets = {
        {"downsampling:deepspeech", 0.48}, {"downsampling:lingvo", 0.48},
        {"quantization:deepspeech", 0.44}, {"quantization:lingvo", 0.26},
        {"filtering:deepspeech", 0.32},    {"filtering:lingvo", 0.31},
        {"mel:deepspeech", 0.33},          {"mel:lingvo", 0.31},
        {"lpc:deepspeech", 0.38},          {"lpc:lingvo", 0.46},
    };
    return presets;
}

inline double threshold_preset(const std::string& name) {
    const auto& presets = threshold_presets();
    const auto it = presets.find(name);
    if (it == presets.end()) {
        std::string known;
        for (const auto& [k, v] : presets) known += (known.empty() ? "" : ", ") + k;
        throw ConfigError("unknown threshold preset \"" + name + "\" (known: " + known + ")");
    }
    return it->second;
}

// --- Report serialization ----------------------------------------------------------

inline nlohmann::json report_to_json(const EvaluationReport& report, const TransformConfig& g) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : report.rows) {
        rows.push_back({{"id", r.id},
                        {"attack_label", r.attack_label},
                        {"cer_benign", r.benign_score},
                        {"cer_adversarial", r.adversarial_score},
                        {"cer_recovery", r.recovery_score},
                        {"verdict_benign", to_string(r.benign_verdict)},
                        {"verdict_adversarial", to_string(r.adversarial_verdict)}});
    }
    nlohmann::json failures = nlohmann::json::array();
    for (const auto& f : report.failures)
        failures.push_back({{"id", f.id}, {"error", f.message}});

    nlohmann::json per_attack = nlohmann::json::object();
    for (const auto& [label, s] : report.per_attack) {
        per_attack[label] = {{"auc", s.auc},
                             {"accuracy", s.accuracy},
                             {"count", s.mean_cer.count},
                             {"mean_cer_benign", s.mean_cer.benign_transformed},
                             {"mean_cer_adversarial", s.mean_cer.adversarial_transformed},
                             {"mean_cer_recovery", s.mean_cer.recovery}};
    }

    return nlohmann::json{
        {"transform", transform_to_json(g)},
        {"threshold", report.threshold},
        {"threshold_source", report.threshold_source},
        {"auc", report.roc.auc},
        {"accuracy", report.accuracy},
        {"roc", report.roc},
        {"mean_cer",
         {{"benign_transformed", report.mean_cer.benign_transformed},
          {"adversarial_transformed", report.mean_cer.adversarial_transformed},
          {"recovery", report.mean_cer.recovery}}},
        {"mean_timings_ms",
         {{"transform", report.mean_timings.transform_ms},
          {"transcribe_x", report.mean_timings.transcribe_x_ms},
          {"transcribe_gx", report.mean_timings.transcribe_gx_ms}}},
        {"per_attack", per_attack},
        {"rows", rows},
        {"failures", failures}};
}

inline std::string report_to_table(const EvaluationReport& report, const TransformConfig& g) {
    std::ostringstream out;
    char line[160];
    out << "Defense: " << transform_name(g) << "   threshold: " << report.threshold << " ("
        << report.threshold_source << ")\n";
    std::snprintf(line, sizeof(line), "%-12s %6s %8s %10s %12s %12s %12s\n", "Attack", "n", "AUC",
                  "Accuracy", "CER(o,go)", "CER(a,ga)", "CER(o,ga)");
    out << line;
    for (const auto& [label, s] : report.per_attack) {
        std::snprintf(line, sizeof(line), "%-12s %6zu %8.2f %9.1f%% %12.3f %12.3f %12.3f\n",
                      label.c_str(), s.mean_cer.count, s.auc, 100.0 * s.accuracy,
                      s.mean_cer.benign_transformed, s.mean_cer.adversarial_transformed,
                      s.mean_cer.recovery);
        out << line;
    }
    std::snprintf(line, sizeof(line), "%-12s %6zu %8.2f %9.1f%% %12.3f %12.3f %12.3f\n", "overall",
                  report.mean_cer.count, report.roc.auc, 100.0 * report.accuracy,
                  report.mean_cer.benign_transformed, report.mean_cer.adversarial_transformed,
                  report.mean_cer.recovery);
    out << line;
    return out.str();
}

}  // namespace waveguard
