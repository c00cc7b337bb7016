#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "waveguard/metrics.hpp"
#include "waveguard/rng.hpp"
#include "waveguard/transforms.hpp"

namespace waveguard {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// --- CTC loss -------------------------------------------------------------------

// Row-major logits [T x (A+1)]; the blank symbol is the last column.
struct CtcResult {
    double loss = 0.0;
    std::vector<double> grad_logits;  // same shape as the logits
    bool feasible = true;
};

namespace detail {

inline double log_add(double a, double b) {
    if (a == kNegInf) return b;
    if (b == kNegInf) return a;
    const double m = std::max(a, b);
    return m + std::log1p(std::exp(-(std::abs(a - b))));
}

}  // namespace detail

// Negative log probability of the target under all blank-augmented alignments,
// computed with the forward algorithm in log space; the gradient with respect
// to the logits comes from the forward-backward posteriors. A target too long
// to align returns +infinity loss with a zero gradient, flagged infeasible.
inline CtcResult ctc_loss(const std::vector<double>& logits, std::size_t n_frames,
                          std::size_t alphabet_size, const std::vector<int>& target) {
    const std::size_t n_labels = alphabet_size + 1;
    const int blank = static_cast<int>(alphabet_size);
    if (logits.size() != n_frames * n_labels) throw ConfigError("ctc_loss: logits shape mismatch");
    for (int label : target)
        if (label < 0 || label >= static_cast<int>(alphabet_size))
            throw ConfigError("ctc_loss: target symbol outside alphabet");

    CtcResult result;
    result.grad_logits.assign(logits.size(), 0.0);

    // Log-softmax per frame.
    std::vector<double> logp(logits.size());
    for (std::size_t t = 0; t < n_frames; ++t) {
        double mx = kNegInf;
        for (std::size_t k = 0; k < n_labels; ++k)
            mx = std::max(mx, logits[t * n_labels + k]);
        double z = 0.0;
        for (std::size_t k = 0; k < n_labels; ++k)
            z += std::exp(logits[t * n_labels + k] - mx);
        const double logz = mx + std::log(z);
        for (std::size_t k = 0; k < n_labels; ++k)
            logp[t * n_labels + k] = logits[t * n_labels + k] - logz;
    }

    const std::size_t L = target.size();
    std::size_t repeats = 0;
    for (std::size_t i = 1; i < L; ++i) repeats += target[i] == target[i - 1] ? 1 : 0;
    if (n_frames < L + repeats) {
        result.loss = std::numeric_limits<double>::infinity();
        result.feasible = false;
        return result;
    }

    const std::size_t S = 2 * L + 1;
    auto ext = [&](std::size_t s) -> int {
        return s % 2 == 0 ? blank : target[(s - 1) / 2];
    };

    std::vector<double> alpha(n_frames * S, kNegInf);
    alpha[0] = logp[static_cast<std::size_t>(blank)];
    if (S > 1) alpha[1] = logp[static_cast<std::size_t>(ext(1))];
    for (std::size_t t = 1; t < n_frames; ++t) {
        for (std::size_t s = 0; s < S; ++s) {
            double acc = alpha[(t - 1) * S + s];
            if (s >= 1) acc = detail::log_add(acc, alpha[(t - 1) * S + s - 1]);
            if (s >= 2 && ext(s) != blank && ext(s) != ext(s - 2))
                acc = detail::log_add(acc, alpha[(t - 1) * S + s - 2]);
            alpha[t * S + s] = acc + logp[t * n_labels + static_cast<std::size_t>(ext(s))];
        }
    }
    double log_total = alpha[(n_frames - 1) * S + S - 1];
    if (S > 1) log_total = detail::log_add(log_total, alpha[(n_frames - 1) * S + S - 2]);
    result.loss = -log_total;

    std::vector<double> beta(n_frames * S, kNegInf);
    beta[(n_frames - 1) * S + S - 1] =
        logp[(n_frames - 1) * n_labels + static_cast<std::size_t>(ext(S - 1))];
    if (S > 1)
        beta[(n_frames - 1) * S + S - 2] =
            logp[(n_frames - 1) * n_labels + static_cast<std::size_t>(ext(S - 2))];
    for (std::size_t t = n_frames - 1; t-- > 0;) {
        for (std::size_t s = 0; s < S; ++s) {
            double acc = beta[(t + 1) * S + s];
            if (s + 1 < S) acc = detail::log_add(acc, beta[(t + 1) * S + s + 1]);
            if (s + 2 < S && ext(s + 2) != blank && ext(s) != ext(s + 2))
                acc = detail::log_add(acc, beta[(t + 1) * S + s + 2]);
            beta[t * S + s] = acc + logp[t * n_labels + static_cast<std::size_t>(ext(s))];
        }
    }

    // grad = softmax - posterior; alpha and beta both carry the emission at t,
    // so one copy is divided back out.
    for (std::size_t t = 0; t < n_frames; ++t) {
        std::vector<double> log_post(n_labels, kNegInf);
        for (std::size_t s = 0; s < S; ++s) {
            const auto k = static_cast<std::size_t>(ext(s));
            const double gamma = alpha[t * S + s] + beta[t * S + s] - logp[t * n_labels + k];
            log_post[k] = detail::log_add(log_post[k], gamma);
        }
        for (std::size_t k = 0; k < n_labels; ++k) {
            const double soft = std::exp(logp[t * n_labels + k]);
            const double post =
                log_post[k] == kNegInf ? 0.0 : std::exp(log_post[k] - log_total);
            result.grad_logits[t * n_labels + k] = soft - post;
        }
    }
    return result;
}

// --- Toy acoustic model ------------------------------------------------------------

// Affine frame classifier: logits are linear in the raw waveform frame, so the
// sample gradient is closed-form and the adaptive attack needs no autodiff.
struct ToyAcousticModel {
    std::size_t frame_length = 64;
    std::size_t hop = 64;
    std::string alphabet = "abcd";  // blank is implicit at index alphabet.size()
    std::vector<double> weights;    // row-major [(A+1) x frame_length]
    std::vector<double> bias;       // [A+1]

    std::size_t alphabet_size() const { return alphabet.size(); }
    std::size_t n_labels() const { return alphabet.size() + 1; }

    std::size_t n_frames(std::size_t n_samples) const {
        if (n_samples < frame_length) return 0;
        return (n_samples - frame_length) / hop + 1;
    }

    static ToyAcousticModel make_random(const std::string& alphabet, std::size_t frame_length,
                                        std::size_t hop, std::uint64_t seed, double scale = 8.0,
                                        double blank_bias = 1.0) {
        ToyAcousticModel model;
        model.frame_length = frame_length;
        model.hop = hop;
        model.alphabet = alphabet;
        model.weights.resize(model.n_labels() * frame_length);
        model.bias.assign(model.n_labels(), 0.0);
        for (std::size_t i = 0; i < model.weights.size(); ++i)
            model.weights[i] = scale * rng::gaussian(seed, 10, i);
        model.bias[model.alphabet_size()] = blank_bias;  // favor blank on quiet input
        return model;
    }
};

struct ToyForwardResult {
    std::vector<double> logits;  // [T x (A+1)]
    std::size_t n_frames = 0;
    Transcript transcript;
};

inline std::vector<int> toy_argmax_path(const ToyAcousticModel& model,
                                        const std::vector<double>& logits, std::size_t n_frames) {
    const std::size_t n_labels = model.n_labels();
    std::vector<int> path(n_frames);
    for (std::size_t t = 0; t < n_frames; ++t) {
        std::size_t best = 0;
        for (std::size_t k = 1; k < n_labels; ++k)
            if (logits[t * n_labels + k] > logits[t * n_labels + best]) best = k;
        path[t] = static_cast<int>(best);
    }
    return path;
}

// Best-path decode: collapse repeats, then drop blanks.
inline Transcript toy_decode_path(const ToyAcousticModel& model, const std::vector<int>& path) {
    std::string text;
    int prev = -1;
    for (int label : path) {
        if (label != prev && label != static_cast<int>(model.alphabet_size()))
            text.push_back(model.alphabet[static_cast<std::size_t>(label)]);
        prev = label;
    }
    return Transcript(text);
}

inline ToyForwardResult toy_forward(const ToyAcousticModel& model, const AudioBuffer& x) {
    ToyForwardResult result;
    result.n_frames = model.n_frames(x.size());
    const std::size_t n_labels = model.n_labels();
    result.logits.assign(result.n_frames * n_labels, 0.0);
    for (std::size_t t = 0; t < result.n_frames; ++t) {
        const std::size_t base = t * model.hop;
        for (std::size_t k = 0; k < n_labels; ++k) {
            double acc = model.bias[k];
            const double* w = model.weights.data() + k * model.frame_length;
            for (std::size_t i = 0; i < model.frame_length; ++i)
                acc += w[i] * x.samples[base + i];
            result.logits[t * n_labels + k] = acc;
        }
    }
    result.transcript = toy_decode_path(model, toy_argmax_path(model, result.logits,
                                                               result.n_frames));
    return result;
}

inline Transcript toy_transcribe(const ToyAcousticModel& model, const AudioBuffer& x) {
    return toy_forward(model, x).transcript;
}

// Maps target text onto alphabet indices; rejects symbols the model cannot emit.
inline std::vector<int> toy_target_symbols(const ToyAcousticModel& model,
                                           const Transcript& target) {
    std::vector<int> symbols;
    symbols.reserve(target.text.size());
    for (char c : target.text) {
        const std::size_t pos = model.alphabet.find(c);
        if (pos == std::string::npos)
            throw ConfigError(std::string("toy model: target symbol '") + c +
                              "' not in alphabet");
        symbols.push_back(static_cast<int>(pos));
    }
    return symbols;
}

// CTC loss of the target under the toy model plus its exact gradient with
// respect to the waveform samples (chain rule through the affine frames).
inline CtcResult toy_ctc_loss(const ToyAcousticModel& model, const AudioBuffer& x,
                              const std::vector<int>& target,
                              std::vector<double>* grad_samples = nullptr) {
    const ToyForwardResult fwd = toy_forward(model, x);
    CtcResult ctc = ctc_loss(fwd.logits, fwd.n_frames, model.alphabet_size(), target);
    if (grad_samples) {
        grad_samples->assign(x.size(), 0.0);
        if (ctc.feasible) {
            const std::size_t n_labels = model.n_labels();
            for (std::size_t t = 0; t < fwd.n_frames; ++t) {
                const std::size_t base = t * model.hop;
                for (std::size_t k = 0; k < n_labels; ++k) {
                    const double gl = ctc.grad_logits[t * n_labels + k];
                    if (gl == 0.0) continue;
                    const double* w = model.weights.data() + k * model.frame_length;
                    for (std::size_t i = 0; i < model.frame_length; ++i)
                        (*grad_samples)[base + i] += gl * w[i];
                }
            }
        }
    }
    return ctc;
}

// --- Adaptive attack ----------------------------------------------------------------

// Bounds and step sizes are in 16-bit integer-domain units.
struct AttackConfig {
    double epsilon = 500.0;
    double alpha = 10.0;
    std::size_t max_iters = 500;
    double c = 0.0;   // L2 distortion weight; unpenalized by default
    double c1 = 1.0;
    double c2 = 1.0;
    double rescale_factor = 0.8;
};

struct AttackIterationLog {
    std::size_t iteration = 0;
    double loss = 0.0;
    double linf = 0.0;  // integer-domain, measured right after projection
    double rescale = 0.0;
    bool success = false;
};

struct AttackResult {
    AudioBuffer adversarial;
    std::vector<double> best_delta;  // empty when the attack never succeeded
    bool succeeded = false;
    double final_linf = 0.0;  // integer-domain L-inf of the returned delta
    std::vector<AttackIterationLog> trace;
};

// Sign-gradient attack on the joint objective
//   c*|d|_2^2 + c1*ctc(x+d, target) + c2*ctc(g(x+d), target),
// with the g-term differentiated by the straight-through estimator: forward
// through the exact transform, backward as identity. After each step the
// perturbation is clipped to epsilon and scaled by the current rescale factor,
// which shrinks by rescale_factor on every success.
inline AttackResult adaptive_attack(const AudioBuffer& x, const Transcript& target,
                                    const std::optional<TransformConfig>& g,
                                    const ToyAcousticModel& model, const AttackConfig& cfg) {
    if (cfg.epsilon <= 0.0) throw ConfigError("adaptive_attack: epsilon must be positive");
    if (cfg.rescale_factor <= 0.0 || cfg.rescale_factor >= 1.0)
        throw ConfigError("adaptive_attack: rescale factor must be in (0,1)");

    const std::vector<int> target_symbols = toy_target_symbols(model, target);
    const double eps = cfg.epsilon / 32768.0;
    const double step = cfg.alpha / 32768.0;

    std::vector<double> delta(x.size(), 0.0);
    std::optional<std::vector<double>> best_delta;
    double rescale = 1.0;

    AudioBuffer perturbed = x;
    std::vector<double> grad(x.size(), 0.0);
    std::vector<double> grad_clean, grad_transformed;

    AttackResult result;
    for (std::size_t iter = 1; iter <= cfg.max_iters; ++iter) {
        for (std::size_t i = 0; i < x.size(); ++i)
            perturbed.samples[i] = x.samples[i] + delta[i];

        const CtcResult clean = toy_ctc_loss(model, perturbed, target_symbols, &grad_clean);
        double loss = cfg.c1 * clean.loss;
        for (std::size_t i = 0; i < x.size(); ++i) grad[i] = cfg.c1 * grad_clean[i];

        if (g) {
            const AudioBuffer transformed = apply_transform(*g, perturbed);
            const CtcResult after =
                toy_ctc_loss(model, transformed, target_symbols, &grad_transformed);
            loss += cfg.c2 * after.loss;
            // Straight-through: the gradient at g(x+d) stands in for the
            // gradient at x+d.
            for (std::size_t i = 0; i < x.size(); ++i) grad[i] += cfg.c2 * grad_transformed[i];
        } else {
            loss += cfg.c2 * clean.loss;
            for (std::size_t i = 0; i < x.size(); ++i) grad[i] += cfg.c2 * grad_clean[i];
        }

        if (cfg.c != 0.0) {
            double l2 = 0.0;
            for (double d : delta) l2 += d * d;
            loss += cfg.c * l2;
            for (std::size_t i = 0; i < x.size(); ++i) grad[i] += cfg.c * 2.0 * delta[i];
        }

        for (std::size_t i = 0; i < x.size(); ++i) {
            const double s = grad[i] > 0.0 ? 1.0 : (grad[i] < 0.0 ? -1.0 : 0.0);
            double d = delta[i] - step * s;
            d = std::clamp(d, -eps, eps);
            delta[i] = rescale * d;
        }

        AttackIterationLog log;
        log.iteration = iter;
        log.loss = loss;
        double linf = 0.0;
        for (double d : delta) linf = std::max(linf, std::abs(d));
        log.linf = linf * 32768.0;
        log.rescale = rescale;

        for (std::size_t i = 0; i < x.size(); ++i)
            perturbed.samples[i] = x.samples[i] + delta[i];
        const Transcript decode_clean = toy_transcribe(model, perturbed);
        bool success = decode_clean == target;
        if (success && g) success = toy_transcribe(model, apply_transform(*g, perturbed)) == target;
        if (success) {
            best_delta = delta;
            rescale *= cfg.rescale_factor;
        }
        log.success = success;
        result.trace.push_back(log);
    }

    result.succeeded = best_delta.has_value();
    const std::vector<double>& chosen = best_delta ? *best_delta : delta;
    result.best_delta = chosen;
    result.adversarial = x;
    for (std::size_t i = 0; i < x.size(); ++i) result.adversarial.samples[i] += chosen[i];
    for (double d : chosen) result.final_linf = std::max(result.final_linf, std::abs(d) * 32768.0);
    return result;
}

// --- Robustness sweep -----------------------------------------------------------------

struct AttackFixture {
    AudioBuffer audio;
    Transcript target;
};

struct SweepRow {
    double epsilon = 0.0;
    double mean_linf = 0.0;
    std::optional<double> mean_db;  // absent when every perturbation is silent
    double sr_x_adv = 0.0;
    double sr_g_x_adv = 0.0;
    double auc = 0.0;
    double accuracy = 0.0;
};

// For each bound, attacks every fixture, then scores the detector with the toy
// model as the transcriber. Shaped like the published sweep: one row per
// epsilon with distortion, success-rate and detection columns.
inline std::vector<SweepRow> robustness_sweep(const std::optional<TransformConfig>& g,
                                              const std::vector<double>& epsilons,
                                              const std::vector<AttackFixture>& fixtures,
                                              const ToyAcousticModel& model,
                                              const AttackConfig& base_cfg) {
    if (epsilons.empty()) throw ConfigError("robustness_sweep: empty epsilon sweep");
    if (fixtures.empty()) throw ConfigError("robustness_sweep: no fixtures");

    std::vector<SweepRow> rows;
    for (double epsilon : epsilons) {
        SweepRow row;
        row.epsilon = epsilon;
        std::vector<double> benign_scores, adv_scores;
        double db_acc = 0.0;
        std::size_t db_count = 0;
        std::size_t success_clean = 0, success_transformed = 0;

        for (const auto& fixture : fixtures) {
            AttackConfig cfg = base_cfg;
            AudioBuffer x_adv = fixture.audio;
            AudioBuffer delta;
            delta.sample_rate = fixture.audio.sample_rate;
            delta.samples.assign(fixture.audio.size(), 0.0);
            if (epsilon > 0.0) {
                cfg.epsilon = epsilon;
                const AttackResult attack =
                    adaptive_attack(fixture.audio, fixture.target, g, model, cfg);
                x_adv = attack.adversarial;
                delta.samples = attack.best_delta;
                row.mean_linf += attack.final_linf;
            }

            const AudioBuffer g_x = g ? apply_transform(*g, fixture.audio) : fixture.audio;
            const AudioBuffer g_x_adv = g ? apply_transform(*g, x_adv) : x_adv;
            const Transcript c_x = toy_transcribe(model, fixture.audio);
            const Transcript c_gx = toy_transcribe(model, g_x);
            const Transcript c_adv = toy_transcribe(model, x_adv);
            const Transcript c_g_adv = toy_transcribe(model, g_x_adv);

            success_clean += c_adv == fixture.target ? 1 : 0;
            success_transformed += c_g_adv == fixture.target ? 1 : 0;
            benign_scores.push_back(cer(c_x, c_gx));
            adv_scores.push_back(cer(c_adv, c_g_adv));

            if (delta.peak() > 0.0 && fixture.audio.peak() > 0.0) {
                db_acc += db_relative(fixture.audio, delta);
                ++db_count;
            }
        }

        const double n = static_cast<double>(fixtures.size());
        row.mean_linf /= n;
        if (db_count > 0) row.mean_db = db_acc / static_cast<double>(db_count);
        row.sr_x_adv = static_cast<double>(success_clean) / n;
        row.sr_g_x_adv = static_cast<double>(success_transformed) / n;
        row.auc = roc_auc(benign_scores, adv_scores).auc;
        row.accuracy = calibrate_threshold(benign_scores, adv_scores).accuracy;
        rows.push_back(row);
    }
    return rows;
}

inline nlohmann::json sweep_to_json(const std::vector<SweepRow>& rows) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& r : rows) {
        nlohmann::json j{{"epsilon", r.epsilon},     {"mean_linf", r.mean_linf},
                         {"sr_x_adv", r.sr_x_adv},   {"sr_g_x_adv", r.sr_g_x_adv},
                         {"auc", r.auc},             {"accuracy", r.accuracy}};
        j["mean_db"] = r.mean_db ? nlohmann::json(*r.mean_db) : nlohmann::json(nullptr);
        out.push_back(j);
    }
    return out;
}

inline std::string sweep_to_table(const std::vector<SweepRow>& rows) {
    std::ostringstream out;
    char line[160];
    std::snprintf(line, sizeof(line), "%8s %10s %10s %12s %14s %8s %8s\n", "eps_inf", "|d|_inf",
                  "dB_x(d)", "SR(x_adv)", "SR(g(x_adv))", "AUC", "Acc");
    out << line;
    for (const auto& r : rows) {
        if (r.mean_db)
            std::snprintf(line, sizeof(line), "%8.0f %10.1f %10.1f %11.0f%% %13.0f%% %8.2f %7.1f%%\n",
                          r.epsilon, r.mean_linf, *r.mean_db, 100.0 * r.sr_x_adv,
                          100.0 * r.sr_g_x_adv, r.auc, 100.0 * r.accuracy);
        else
            std::snprintf(line, sizeof(line), "%8.0f %10.1f %10s %11.0f%% %13.0f%% %8.2f %7.1f%%\n",
                          r.epsilon, r.mean_linf, "-", 100.0 * r.sr_x_adv, 100.0 * r.sr_g_x_adv,
                          r.auc, 100.0 * r.accuracy);
        out << line;
    }
    return out.str();
}

}  // namespace waveguard
