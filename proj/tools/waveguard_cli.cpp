// Command-line surface: transform, detect, evaluate, calibrate, bench,
// attack-sweep. Exit codes: 0 success, 1 usage error, 2 runtime error.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "waveguard/waveguard.hpp"

namespace {

using namespace waveguard;
using nlohmann::json;

struct TransformOptions {
    std::string preset;
    std::string config_json;

    void attach(CLI::App* app) {
        auto* p = app->add_option("--preset", preset,
                                  "Transform preset: quant6|down6000|filter|mel80|lpc20");
        auto* t = app->add_option("--transform", config_json,
                                  "Transform config as JSON, e.g. {\"type\":\"quantize\",\"bits\":6}");
        p->excludes(t);
    }

    TransformConfig resolve(std::uint64_t seed) const {
        TransformConfig g;
        if (!preset.empty()) {
            g = transform_preset(preset);
        } else if (!config_json.empty()) {
            g = transform_from_json(json::parse(config_json));
        } else {
            throw ConfigError("no transform given: pass --preset or --transform");
        }
        // A preset LPC transform draws its excitation from the global seed.
        if (auto* lpc = std::get_if<LpcConfig>(&g); lpc && !preset.empty())
            lpc->excitation_seed = seed;
        return g;
    }
};

struct TranscriberOptions {
    std::string mock_script_path;
    std::string asr_cmd;
    std::string asr_http;
    int asr_timeout_ms = 10000;

    void attach(CLI::App* app) {
        app->add_option("--mock-script", mock_script_path,
                        "Mock transcriber script (JSON; see README)");
        app->add_option("--asr-cmd", asr_cmd,
                        "Subprocess ASR command template with {input} placeholder "
                        "(default: env WAVEGUARD_ASR_CMD)");
        app->add_option("--asr-http", asr_http, "HTTP ASR endpoint (POST audio/wav)");
        app->add_option("--asr-timeout-ms", asr_timeout_ms, "HTTP timeout in milliseconds");
    }

    TranscriberSpec resolve(std::uint64_t seed) const {
        int given = 0;
        given += mock_script_path.empty() ? 0 : 1;
        given += asr_cmd.empty() ? 0 : 1;
        given += asr_http.empty() ? 0 : 1;
        if (given > 1)
            throw ConfigError("give exactly one of --mock-script, --asr-cmd, --asr-http");

        if (!mock_script_path.empty()) return load_mock_script(mock_script_path, seed);
        if (!asr_http.empty()) return HttpSpec{asr_http, asr_timeout_ms};
        if (!asr_cmd.empty()) return SubprocessSpec{asr_cmd};
        if (const char* env = std::getenv("WAVEGUARD_ASR_CMD"); env && *env)
            return SubprocessSpec{env};
        throw ConfigError("no transcriber given: pass --mock-script, --asr-cmd, --asr-http "
                          "or set WAVEGUARD_ASR_CMD");
    }

    static MockSpec load_mock_script(const std::string& path, std::uint64_t seed) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open mock script: " + path);
        json j = json::parse(in);
        MockSpec mock;
        mock.seed = j.value("seed", seed);
        mock.garble_scale = j.value("garble_scale", mock.garble_scale);
        mock.fixed_text = j.value("fixed_text", "");
        const std::string fallback = j.value("fallback", "garble");
        mock.fallback =
            fallback == "fixed" ? MockSpec::Fallback::Fixed : MockSpec::Fallback::NearestGarble;
        if (j.contains("fingerprint")) {
            const json& fp = j.at("fingerprint");
            mock.fingerprint_params.frame_length =
                fp.value("frame_length", mock.fingerprint_params.frame_length);
            mock.fingerprint_params.rms_quantum =
                fp.value("rms_quantum", mock.fingerprint_params.rms_quantum);
        }
        for (const json& entry : j.value("entries", json::array()))
            mock.add_entry(load_wav(entry.at("wav").get<std::string>()),
                           entry.at("transcript").get<std::string>());
        return mock;
    }
};

struct ThresholdOptions {
    double threshold = -1.0;
    std::string preset;

    void attach(CLI::App* app) {
        auto* t = app->add_option("--threshold", threshold, "Detection threshold in [0,1]");
        auto* p = app->add_option("--threshold-preset", preset,
                                  "Published threshold preset, e.g. mel:deepspeech");
        p->excludes(t);
    }

    bool given() const { return threshold >= 0.0 || !preset.empty(); }

    double resolve() const {
        if (!preset.empty()) return threshold_preset(preset);
        if (threshold >= 0.0) return threshold;
        throw ConfigError("no threshold given: pass --threshold or --threshold-preset");
    }

    std::string label() const { return preset.empty() ? "fixed" : "preset:" + preset; }
};

void emit(const json& j, const std::string& out_path) {
    if (out_path.empty()) {
        std::cout << j.dump(2) << "\n";
    } else {
        std::ofstream out(out_path);
        if (!out) throw IoError("cannot create output file: " + out_path);
        out << j.dump(2) << "\n";
    }
}

// Deterministic attack fixtures: band-limited noise bursts with short targets
// drawn from the model alphabet.
std::vector<AttackFixture> make_sweep_fixtures(const ToyAcousticModel& model, std::size_t count,
                                               std::size_t n_frames, std::uint64_t seed) {
    std::vector<AttackFixture> fixtures;
    for (std::size_t f = 0; f < count; ++f) {
        AttackFixture fixture;
        fixture.audio.sample_rate = 16000;
        const std::size_t n = model.frame_length + (n_frames - 1) * model.hop;
        fixture.audio.samples.resize(n);
        for (std::size_t i = 0; i < n; ++i)
            fixture.audio.samples[i] = 0.25 * (2.0 * rng::uniform(seed, 100 + f, i) - 1.0);
        std::string target;
        const std::size_t len = 2 + rng::hash(seed, 200 + f, 0) % 2;
        for (std::size_t i = 0; i < len; ++i)
            target.push_back(
                model.alphabet[rng::hash(seed, 300 + f, i) % model.alphabet.size()]);
        fixture.target = Transcript(target);
        fixtures.push_back(std::move(fixture));
    }
    return fixtures;
}

int run(int argc, char** argv) {
    CLI::App app{"WaveGuard: adversarial-audio detection via input transformations"};
    app.require_subcommand(1);
    std::uint64_t seed = 0;
    app.add_option("--seed", seed, "Seed for all randomness (LPC excitation, mock garbling)");

    // transform
    auto* cmd_transform = app.add_subcommand("transform", "Apply a transform g to a WAV file");
    TransformOptions tf_transform;
    tf_transform.attach(cmd_transform);
    std::string in_path, out_path;
    cmd_transform->add_option("--in", in_path, "Input WAV")->required();
    cmd_transform->add_option("--out", out_path, "Output WAV")->required();

    // detect
    auto* cmd_detect = app.add_subcommand("detect", "Classify one example; JSON verdict on stdout");
    TransformOptions tf_detect;
    TranscriberOptions tr_detect;
    ThresholdOptions th_detect;
    tf_detect.attach(cmd_detect);
    tr_detect.attach(cmd_detect);
    th_detect.attach(cmd_detect);
    std::string detect_in;
    cmd_detect->add_option("--in", detect_in, "Input WAV")->required();

    // evaluate
    auto* cmd_eval = app.add_subcommand("evaluate", "Score a manifest; JSON report");
    TransformOptions tf_eval;
    TranscriberOptions tr_eval;
    ThresholdOptions th_eval;
    tf_eval.attach(cmd_eval);
    tr_eval.attach(cmd_eval);
    th_eval.attach(cmd_eval);
    std::string eval_manifest, eval_calibration, eval_out;
    unsigned eval_jobs = 1;
    bool eval_table = false;
    cmd_eval->add_option("--manifest", eval_manifest, "Evaluation manifest (JSONL)")->required();
    cmd_eval->add_option("--calibration", eval_calibration,
                         "Calibration manifest (JSONL); alternative to a fixed threshold");
    cmd_eval->add_option("--out", eval_out, "Write the JSON report here instead of stdout");
    cmd_eval->add_option("--jobs", eval_jobs, "Parallel rows (default 1)");
    cmd_eval->add_flag("--table", eval_table, "Also print the plain-text summary table");

    // calibrate
    auto* cmd_cal = app.add_subcommand("calibrate", "Best-accuracy threshold from a manifest");
    TransformOptions tf_cal;
    TranscriberOptions tr_cal;
    tf_cal.attach(cmd_cal);
    tr_cal.attach(cmd_cal);
    std::string cal_manifest;
    unsigned cal_jobs = 1;
    cmd_cal->add_option("--manifest", cal_manifest, "Calibration manifest (JSONL)")->required();
    cmd_cal->add_option("--jobs", cal_jobs, "Parallel rows (default 1)");

    // bench
    auto* cmd_bench = app.add_subcommand("bench", "Mean transform wall-clock time over a manifest");
    TransformOptions tf_bench;
    tf_bench.attach(cmd_bench);
    std::string bench_manifest;
    bool bench_all = false;
    cmd_bench->add_option("--manifest", bench_manifest, "Manifest (JSONL)")->required();
    cmd_bench->add_flag("--all-presets", bench_all, "Bench all five presets");

    // attack-sweep
    auto* cmd_sweep = app.add_subcommand(
        "attack-sweep", "Adaptive-attack robustness sweep against the toy transcriber");
    TransformOptions tf_sweep;
    tf_sweep.attach(cmd_sweep);
    std::vector<double> sweep_epsilons{0.0, 500.0, 1000.0, 4000.0};
    std::size_t sweep_fixtures = 10, sweep_frames = 24, sweep_iters = 500;
    double sweep_alpha = 10.0;
    std::string sweep_out;
    bool sweep_identity = false;
    cmd_sweep->add_option("--epsilons", sweep_epsilons,
                          "Integer-domain L-inf bounds (default 0 500 1000 4000)");
    cmd_sweep->add_option("--fixtures", sweep_fixtures, "Number of synthetic fixtures");
    cmd_sweep->add_option("--frames", sweep_frames, "Frames per fixture");
    cmd_sweep->add_option("--max-iters", sweep_iters, "Attack iterations per fixture");
    cmd_sweep->add_option("--alpha", sweep_alpha, "Sign-gradient step (integer-domain)");
    cmd_sweep->add_option("--out", sweep_out, "Write the JSON rows here instead of stdout");
    cmd_sweep->add_flag("--identity", sweep_identity,
                        "Attack the undefended model (no transform)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {  // --help
            app.exit(e);
            return 0;
        }
        std::cerr << app.help() << "\n";
        app.exit(e);
        return 1;
    }

    try {
        if (*cmd_transform) {
            const TransformConfig g = tf_transform.resolve(seed);
            const AudioBuffer x = load_wav(in_path);
            save_wav(apply_transform(g, x), out_path);
            return 0;
        }

        if (*cmd_detect) {
            const TransformConfig g = tf_detect.resolve(seed);
            const TranscriberSpec transcriber = tr_detect.resolve(seed);
            const double threshold = th_detect.resolve();
            const DetectionResult result = detect(load_wav(detect_in), g, transcriber, threshold);
            emit(json{{"cer", result.cer_x_gx},
                      {"verdict", to_string(result.verdict)},
                      {"threshold", result.threshold},
                      {"threshold_source", th_detect.label()},
                      {"transcript_x", result.transcript_x.text},
                      {"transcript_gx", result.transcript_gx.text},
                      {"timings_ms",
                       {{"transform", result.timings.transform_ms},
                        {"transcribe_x", result.timings.transcribe_x_ms},
                        {"transcribe_gx", result.timings.transcribe_gx_ms}}}},
                 "");
            return 0;
        }

        if (*cmd_eval) {
            const TransformConfig g = tf_eval.resolve(seed);
            const TranscriberSpec transcriber = tr_eval.resolve(seed);
            EvaluateOptions options;
            options.jobs = eval_jobs;
            if (th_eval.given()) {
                options.fixed_threshold = th_eval.resolve();
                options.threshold_label = th_eval.label();
            }
            const std::vector<ManifestRow> manifest = load_manifest(eval_manifest);
            const std::vector<ManifestRow> calibration =
                eval_calibration.empty() ? std::vector<ManifestRow>{}
                                         : load_manifest(eval_calibration);
            const EvaluationReport report = evaluate(manifest, g, transcriber, calibration,
                                                     options);
            emit(report_to_json(report, g), eval_out);
            if (eval_table || !eval_out.empty()) std::cout << report_to_table(report, g);
            return 0;
        }

        if (*cmd_cal) {
            const TransformConfig g = tf_cal.resolve(seed);
            const TranscriberSpec transcriber = tr_cal.resolve(seed);
            const std::vector<ManifestRow> manifest = load_manifest(cal_manifest);
            // Scoring via evaluate with a placeholder threshold keeps one code path.
            EvaluateOptions options;
            options.jobs = cal_jobs;
            options.fixed_threshold = 0.5;
            const EvaluationReport scored = evaluate(manifest, g, transcriber, {}, options);
            std::vector<double> benign, adversarial;
            for (const auto& row : scored.rows) {
                benign.push_back(row.benign_score);
                adversarial.push_back(row.adversarial_score);
            }
            const Calibration calib = calibrate_threshold(benign, adversarial);
            emit(json{{"threshold", calib.threshold}, {"accuracy", calib.accuracy}}, "");
            return 0;
        }

        if (*cmd_bench) {
            const std::vector<ManifestRow> manifest = load_manifest(bench_manifest);
            json rows = json::array();
            std::cout << "Transform            Avg. wall-clock (s)\n";
            auto bench_one = [&](const std::string& label, const TransformConfig& g) {
                const double seconds = timing_bench(manifest, g);
                char line[96];
                std::snprintf(line, sizeof(line), "%-20s %.4f\n", label.c_str(), seconds);
                std::cout << line;
                rows.push_back({{"transform", label}, {"mean_seconds", seconds}});
            };
            if (bench_all) {
                for (const std::string name : {"quant6", "down6000", "filter", "mel80", "lpc20"}) {
                    TransformConfig g = transform_preset(name);
                    if (auto* lpc = std::get_if<LpcConfig>(&g)) lpc->excitation_seed = seed;
                    bench_one(name, g);
                }
            } else {
                const TransformConfig g = tf_bench.resolve(seed);
                bench_one(transform_name(g), g);
            }
            return 0;
        }

        if (*cmd_sweep) {
            std::optional<TransformConfig> g;
            if (!sweep_identity) g = tf_sweep.resolve(seed);
            const ToyAcousticModel model =
                ToyAcousticModel::make_random("abcd", 64, 64, seed, 8.0, 1.0);
            const std::vector<AttackFixture> fixtures =
                make_sweep_fixtures(model, sweep_fixtures, sweep_frames, seed);
            AttackConfig cfg;
            cfg.max_iters = sweep_iters;
            cfg.alpha = sweep_alpha;
            const std::vector<SweepRow> rows =
                robustness_sweep(g, sweep_epsilons, fixtures, model, cfg);
            emit(sweep_to_json(rows), sweep_out);
            std::cout << sweep_to_table(rows);
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) { return run(argc, argv); }
