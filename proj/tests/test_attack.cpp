#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "waveguard/attack.hpp"
#include "waveguard/rng.hpp"
#include "support/fixtures.hpp"

using namespace waveguard;

namespace {

// Brute-force CTC oracle: enumerate every label path, keep those whose
// collapse equals the target, and sum their probabilities.
double brute_force_ctc(const std::vector<double>& logits, std::size_t n_frames,
                       std::size_t alphabet_size, const std::vector<int>& target) {
    const std::size_t n_labels = alphabet_size + 1;
    const int blank = static_cast<int>(alphabet_size);

    std::vector<std::vector<double>> probs(n_frames, std::vector<double>(n_labels));
    for (std::size_t t = 0; t < n_frames; ++t) {
        double mx = logits[t * n_labels];
        for (std::size_t k = 1; k < n_labels; ++k)
            mx = std::max(mx, logits[t * n_labels + k]);
        double z = 0.0;
        for (std::size_t k = 0; k < n_labels; ++k) z += std::exp(logits[t * n_labels + k] - mx);
        for (std::size_t k = 0; k < n_labels; ++k)
            probs[t][k] = std::exp(logits[t * n_labels + k] - mx) / z;
    }

    double total = 0.0;
    std::vector<int> path(n_frames, 0);
    const std::size_t n_paths =
        static_cast<std::size_t>(std::pow(static_cast<double>(n_labels), n_frames));
    for (std::size_t code = 0; code < n_paths; ++code) {
        std::size_t rest = code;
        for (std::size_t t = 0; t < n_frames; ++t) {
            path[t] = static_cast<int>(rest % n_labels);
            rest /= n_labels;
        }
        std::vector<int> collapsed;
        int prev = -1;
        for (int label : path) {
            if (label != prev && label != blank) collapsed.push_back(label);
            prev = label;
        }
        if (collapsed != target) continue;
        double p = 1.0;
        for (std::size_t t = 0; t < n_frames; ++t) p *= probs[t][static_cast<std::size_t>(path[t])];
        total += p;
    }
    return total > 0.0 ? -std::log(total) : std::numeric_limits<double>::infinity();
}

std::vector<double> random_logits(std::size_t n_frames, std::size_t n_labels, std::uint64_t seed) {
    std::vector<double> logits(n_frames * n_labels);
    for (std::size_t i = 0; i < logits.size(); ++i) logits[i] = 2.0 * rng::gaussian(seed, 3, i);
    return logits;
}

AttackFixture make_fixture(const ToyAcousticModel& model, std::size_t n_frames,
                           std::uint64_t seed, const std::string& target) {
    AttackFixture fixture;
    fixture.audio.sample_rate = 16000;
    const std::size_t n = model.frame_length + (n_frames - 1) * model.hop;
    fixture.audio.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        fixture.audio.samples[i] = 0.25 * (2.0 * rng::uniform(seed, 50, i) - 1.0);
    fixture.target = Transcript(target);
    return fixture;
}

}  // namespace

TEST_CASE("ctc_loss: two frames, single symbol, hand-enumerated paths") {
    // T=2, alphabet {a}: P = p1(a)p2(-) + p1(-)p2(a) + p1(a)p2(a).
    const std::vector<double> logits = {0.3, -0.2, -0.7, 1.1};  // [t x {a, blank}]
    auto softmax = [&](std::size_t t, std::size_t k) {
        const double za = std::exp(logits[t * 2]), zb = std::exp(logits[t * 2 + 1]);
        return (k == 0 ? za : zb) / (za + zb);
    };
    const double expect = softmax(0, 0) * softmax(1, 1) + softmax(0, 1) * softmax(1, 0) +
                          softmax(0, 0) * softmax(1, 0);
    const CtcResult got = ctc_loss(logits, 2, 1, {0});
    CHECK(got.loss == Catch::Approx(-std::log(expect)).margin(1e-12));
    CHECK(got.feasible);
}

TEST_CASE("ctc_loss: empty target is the all-blank path") {
    const std::vector<double> logits = random_logits(4, 3, 5);
    const CtcResult got = ctc_loss(logits, 4, 2, {});
    double expect = 0.0;
    for (std::size_t t = 0; t < 4; ++t) {
        double mx = std::max({logits[t * 3], logits[t * 3 + 1], logits[t * 3 + 2]});
        double z = 0.0;
        for (std::size_t k = 0; k < 3; ++k) z += std::exp(logits[t * 3 + k] - mx);
        expect += -(logits[t * 3 + 2] - mx - std::log(z));
    }
    CHECK(got.loss == Catch::Approx(expect).margin(1e-12));
}

TEST_CASE("ctc_loss matches exhaustive path enumeration on the full small grid") {
    for (std::size_t n_frames = 1; n_frames <= 5; ++n_frames) {
        for (std::size_t alphabet = 1; alphabet <= 3; ++alphabet) {
            const std::vector<double> logits =
                random_logits(n_frames, alphabet + 1, 100 + n_frames * 10 + alphabet);
            // All targets of length 0..3 over the alphabet.
            std::vector<std::vector<int>> targets = {{}};
            for (std::size_t len = 1; len <= 3; ++len) {
                const std::size_t count =
                    static_cast<std::size_t>(std::pow(static_cast<double>(alphabet), len));
                for (std::size_t code = 0; code < count; ++code) {
                    std::vector<int> target(len);
                    std::size_t rest = code;
                    for (std::size_t i = 0; i < len; ++i) {
                        target[i] = static_cast<int>(rest % alphabet);
                        rest /= alphabet;
                    }
                    targets.push_back(std::move(target));
                }
            }
            for (const auto& target : targets) {
                const double oracle = brute_force_ctc(logits, n_frames, alphabet, target);
                const CtcResult got = ctc_loss(logits, n_frames, alphabet, target);
                if (std::isinf(oracle)) {
                    CHECK_FALSE(got.feasible);
                    CHECK(std::isinf(got.loss));
                } else {
                    CHECK(got.loss == Catch::Approx(oracle).margin(1e-6));
                }
            }
        }
    }
}

TEST_CASE("ctc_loss gradient matches central finite differences") {
    for (std::uint64_t trial = 0; trial < 50; ++trial) {
        const std::size_t n_frames = 5, alphabet = 3, n_labels = 4;
        std::vector<double> logits = random_logits(n_frames, n_labels, 700 + trial);
        const std::vector<int> target = {static_cast<int>(trial % 3),
                                         static_cast<int>((trial / 3) % 3)};
        const CtcResult base = ctc_loss(logits, n_frames, alphabet, target);
        REQUIRE(base.feasible);

        const double h = 1e-5;
        for (std::size_t i = 0; i < logits.size(); i += 3) {
            const double orig = logits[i];
            logits[i] = orig + h;
            const double up = ctc_loss(logits, n_frames, alphabet, target).loss;
            logits[i] = orig - h;
            const double down = ctc_loss(logits, n_frames, alphabet, target).loss;
            logits[i] = orig;
            const double fd = (up - down) / (2.0 * h);
            CHECK(base.grad_logits[i] ==
                  Catch::Approx(fd).epsilon(1e-4).margin(1e-7));
        }
    }
}

TEST_CASE("ctc_loss flags an infeasible target") {
    const std::vector<double> logits = random_logits(2, 3, 9);
    const CtcResult got = ctc_loss(logits, 2, 2, {0, 0, 1});
    CHECK_FALSE(got.feasible);
    CHECK(std::isinf(got.loss));
    for (double g : got.grad_logits) CHECK(g == 0.0);
    CHECK_THROWS_AS(ctc_loss(logits, 2, 2, {5}), ConfigError);
}

TEST_CASE("toy model: crafted weights produce a known transcript") {
    ToyAcousticModel model;
    model.frame_length = 4;
    model.hop = 4;
    model.alphabet = "ab";
    model.weights.assign(3 * 4, 0.0);
    model.bias = {0.0, 0.0, 0.5};
    // Row for 'a' fires on a positive first sample, 'b' on a positive last sample.
    model.weights[0 * 4 + 0] = 10.0;
    model.weights[1 * 4 + 3] = 10.0;

    AudioBuffer x;
    x.samples = {0.5, 0, 0, 0,  /* a */
                 0, 0, 0, 0.5,  /* b */
                 0, 0, 0, 0};   /* blank */
    const ToyForwardResult fwd = toy_forward(model, x);
    CHECK(fwd.n_frames == 3);
    CHECK(fwd.transcript.text == "ab");
}

TEST_CASE("toy model: zero input with blank bias decodes to empty") {
    const ToyAcousticModel model = ToyAcousticModel::make_random("abcd", 64, 64, 3, 8.0, 1.0);
    AudioBuffer x;
    x.samples.assign(64 * 10, 0.0);
    CHECK(toy_transcribe(model, x).text.empty());
}

TEST_CASE("toy decode collapses repeats then drops blanks") {
    ToyAcousticModel model;
    model.alphabet = "ab";
    CHECK(toy_decode_path(model, {0, 0, 2, 1}).text == "ab");
    CHECK(toy_decode_path(model, {0, 2, 0, 1, 1}).text == "aab");
    CHECK(toy_decode_path(model, {2, 2, 2}).text.empty());
}

TEST_CASE("end-to-end sample gradient matches finite differences") {
    const ToyAcousticModel model = ToyAcousticModel::make_random("abc", 8, 8, 21, 4.0, 0.5);
    AttackFixture fixture = make_fixture(model, 6, 77, "ab");
    const std::vector<int> target = toy_target_symbols(model, fixture.target);

    std::vector<double> grad;
    const CtcResult base = toy_ctc_loss(model, fixture.audio, target, &grad);
    REQUIRE(base.feasible);

    const double h = 1e-6;
    for (std::size_t i = 0; i < fixture.audio.size(); i += 7) {
        AudioBuffer bumped = fixture.audio;
        bumped.samples[i] += h;
        const double up = toy_ctc_loss(model, bumped, target).loss;
        bumped.samples[i] -= 2.0 * h;
        const double down = toy_ctc_loss(model, bumped, target).loss;
        const double fd = (up - down) / (2.0 * h);
        CHECK(grad[i] == Catch::Approx(fd).epsilon(1e-3).margin(1e-8));
    }
}

TEST_CASE("adaptive_attack with max_iters 0 returns the input unchanged") {
    const ToyAcousticModel model = ToyAcousticModel::make_random("abcd", 64, 64, 5, 8.0, 1.0);
    const AttackFixture fixture = make_fixture(model, 8, 11, "ab");
    AttackConfig cfg;
    cfg.max_iters = 0;
    const AttackResult result =
        adaptive_attack(fixture.audio, fixture.target, std::nullopt, model, cfg);
    CHECK(result.trace.empty());
    CHECK_FALSE(result.succeeded);
    CHECK(result.adversarial.samples == fixture.audio.samples);
}

TEST_CASE("adaptive_attack succeeds against the undefended toy model") {
    const ToyAcousticModel model = ToyAcousticModel::make_random("abcd", 64, 64, 5, 8.0, 1.0);
    const AttackFixture fixture = make_fixture(model, 16, 13, "ba");
    AttackConfig cfg;
    cfg.epsilon = 4000.0;
    cfg.max_iters = 500;
    const AttackResult result =
        adaptive_attack(fixture.audio, fixture.target, std::nullopt, model, cfg);
    REQUIRE(result.succeeded);
    CHECK(cer(toy_transcribe(model, result.adversarial), fixture.target) == 0.0);
    CHECK(result.final_linf < cfg.epsilon);
    CHECK(result.final_linf > 0.0);
}

TEST_CASE("adaptive_attack projection invariant holds at every logged iteration") {
    const ToyAcousticModel model = ToyAcousticModel::make_random("abcd", 64, 64, 5, 8.0, 1.0);
    const AttackFixture fixture = make_fixture(model, 12, 29, "ca");
    AttackConfig cfg;
    cfg.epsilon = 2000.0;
    cfg.max_iters = 200;
    const AttackResult result =
        adaptive_attack(fixture.audio, fixture.target, TransformConfig{QuantizeConfig{6}}, model,
                        cfg);
    REQUIRE_FALSE(result.trace.empty());
    for (const auto& log : result.trace)
        CHECK(log.linf <= log.rescale * cfg.epsilon * (1.0 + 1e-12));
}

TEST_CASE("adaptive_attack is deterministic") {
    const ToyAcousticModel model = ToyAcousticModel::make_random("abcd", 64, 64, 5, 8.0, 1.0);
    const AttackFixture fixture = make_fixture(model, 10, 31, "ab");
    AttackConfig cfg;
    cfg.epsilon = 1500.0;
    cfg.max_iters = 60;
    const AttackResult a =
        adaptive_attack(fixture.audio, fixture.target, TransformConfig{QuantizeConfig{4}}, model,
                        cfg);
    const AttackResult b =
        adaptive_attack(fixture.audio, fixture.target, TransformConfig{QuantizeConfig{4}}, model,
                        cfg);
    CHECK(a.adversarial.samples == b.adversarial.samples);
    REQUIRE(a.trace.size() == b.trace.size());
    for (std::size_t i = 0; i < a.trace.size(); ++i) CHECK(a.trace[i].loss == b.trace[i].loss);
}

TEST_CASE("straight-through attack breaks quantize and shelf defenses") {
    const ToyAcousticModel model = ToyAcousticModel::make_random("abcd", 64, 64, 5, 8.0, 1.0);
    const std::vector<TransformConfig> defenses = {QuantizeConfig{6}, ShelfFilterConfig{}};
    for (const auto& g : defenses) {
        const AttackFixture fixture = make_fixture(model, 14, 37, "ad");
        AttackConfig cfg;
        cfg.epsilon = 4000.0;
        cfg.max_iters = 300;
        const AttackResult result = adaptive_attack(fixture.audio, fixture.target, g, model, cfg);
        REQUIRE_FALSE(result.trace.empty());
        // The per-iteration rescale after a success shrinks delta again, so
        // the loss floor is the progress measure; the success flag certifies
        // both decodes hit the target.
        double floor = result.trace.front().loss;
        for (const auto& log : result.trace) floor = std::min(floor, log.loss);
        CHECK(floor <= 0.5 * result.trace.front().loss);
        CHECK(result.succeeded);
        CHECK(cer(toy_transcribe(model, apply_transform(g, result.adversarial)), fixture.target) ==
              0.0);
    }
}

TEST_CASE("robustness_sweep: epsilon 0 row is the benign baseline") {
    const ToyAcousticModel model = ToyAcousticModel::make_random("abcd", 64, 64, 5, 8.0, 1.0);
    std::vector<AttackFixture> fixtures;
    for (std::uint64_t f = 0; f < 4; ++f) fixtures.push_back(make_fixture(model, 10, 40 + f, "ab"));
    AttackConfig cfg;
    cfg.max_iters = 40;
    const std::vector<SweepRow> rows =
        robustness_sweep(TransformConfig{QuantizeConfig{6}}, {0.0}, fixtures, model, cfg);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].sr_x_adv == 0.0);
    CHECK(rows[0].sr_g_x_adv == 0.0);
    CHECK(rows[0].auc == Catch::Approx(0.5).margin(1e-9));
    CHECK_FALSE(rows[0].mean_db.has_value());
}

TEST_CASE("robustness_sweep: SR(g(x_adv)) trend over epsilon is reported, not enforced") {
    const ToyAcousticModel model = ToyAcousticModel::make_random("abcd", 64, 64, 5, 8.0, 1.0);
    std::vector<AttackFixture> fixtures;
    for (std::uint64_t f = 0; f < 3; ++f) fixtures.push_back(make_fixture(model, 10, 80 + f, "ab"));
    AttackConfig cfg;
    cfg.max_iters = 120;
    const std::vector<SweepRow> rows =
        robustness_sweep(TransformConfig{QuantizeConfig{6}}, {0.0, 1000.0, 4000.0}, fixtures,
                         model, cfg);
    REQUIRE(rows.size() == 3);
    // Stochastic optimization: monotonicity usually holds but is observed,
    // not asserted.
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (rows[i].sr_g_x_adv < rows[i - 1].sr_g_x_adv)
            WARN("SR(g(x_adv)) dipped between epsilon " << rows[i - 1].epsilon << " and "
                                                        << rows[i].epsilon);
    }
    CHECK(rows[0].sr_g_x_adv == 0.0);
}

TEST_CASE("robustness_sweep: identity transform with a large budget succeeds everywhere") {
    const ToyAcousticModel model = ToyAcousticModel::make_random("abcd", 64, 64, 5, 8.0, 1.0);
    std::vector<AttackFixture> fixtures;
    for (std::uint64_t f = 0; f < 4; ++f)
        fixtures.push_back(make_fixture(model, 12, 60 + f, f % 2 ? "ab" : "cd"));
    AttackConfig cfg;
    cfg.max_iters = 400;
    const std::vector<SweepRow> rows =
        robustness_sweep(std::nullopt, {4000.0}, fixtures, model, cfg);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].sr_x_adv == 1.0);
    CHECK(rows[0].mean_db.has_value());
    CHECK(*rows[0].mean_db < 0.0);

    const std::string table = sweep_to_table(rows);
    CHECK(table.find("SR(x_adv)") != std::string::npos);
    const nlohmann::json j = sweep_to_json(rows);
    CHECK(j.size() == 1);
    CHECK(j[0]["sr_x_adv"] == 1.0);
}
