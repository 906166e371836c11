#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "helpers.hpp"

#include "trajmatch/error.hpp"
#include "trajmatch/gru.hpp"
#include "trajmatch/random.hpp"
#include "trajmatch/synth.hpp"

using namespace trajmatch;

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Reference forward pass written straight from the gate equations, reading the
// documented flat layout (column-major matrices, gate rows r, z, n).
double reference_predict(std::span<const double> p, int in, int H, int layers, const SequenceInstance& s) {
    std::vector<std::vector<double>> xs;
    for (const auto& step : s.steps) xs.emplace_back(step.begin(), step.end());
    std::size_t off = 0;
    std::vector<double> h;
    for (int l = 0; l < layers; ++l) {
        const int n_in = l == 0 ? in : H;
        const std::size_t wi = off, wh = wi + 3 * H * n_in, bi = wh + 3 * H * H, bh = bi + 3 * H;
        off = bh + 3 * H;
        auto Wi = [&](int row, int col) { return p[wi + row + static_cast<std::size_t>(col) * 3 * H]; };
        auto Wh = [&](int row, int col) { return p[wh + row + static_cast<std::size_t>(col) * 3 * H]; };
        h.assign(static_cast<std::size_t>(H), 0.0);
        std::vector<std::vector<double>> outs;
        for (const auto& x : xs) {
            std::vector<double> gi(3 * H), gh(3 * H);
            for (int r = 0; r < 3 * H; ++r) {
                gi[r] = p[bi + r];
                gh[r] = p[bh + r];
                for (int c = 0; c < n_in; ++c) gi[r] += Wi(r, c) * x[c];
                for (int c = 0; c < H; ++c) gh[r] += Wh(r, c) * h[c];
            }
            std::vector<double> next(static_cast<std::size_t>(H));
            for (int k = 0; k < H; ++k) {
                const double rg = sigmoid(gi[k] + gh[k]);
                const double zg = sigmoid(gi[H + k] + gh[H + k]);
                const double ng = std::tanh(gi[2 * H + k] + rg * gh[2 * H + k]);
                next[k] = (1 - zg) * ng + zg * h[k];
            }
            h = next;
            outs.push_back(h);
        }
        xs = outs;
    }
    double logit = p[off + H];
    for (int k = 0; k < H; ++k) logit += p[off + k] * h[k];
    return sigmoid(logit);
}

SequenceInstance random_sequence(Rng& rng, int len, bool label) {
    SequenceInstance s;
    s.label = label;
    for (int t = 0; t < len; ++t) s.steps.push_back({rng.normal(), rng.normal(), rng.normal(), rng.normal()});
    return s;
}

// Positives hover around +1 in every feature, negatives around -1.
std::vector<SequenceInstance> separable(Rng& rng, int n) {
    std::vector<SequenceInstance> out;
    for (int i = 0; i < n; ++i) {
        const bool label = i % 2 == 0;
        SequenceInstance s;
        s.label = label;
        const int len = rng.uniform_int(5, 20);
        for (int t = 0; t < len; ++t) {
            std::array<double, kGruFeatures> f{};
            for (auto& v : f) v = (label ? 1.0 : -1.0) + 0.3 * rng.normal();
            s.steps.push_back(f);
        }
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace

TEST_CASE("zero weights predict one half") {
    GruModel m(4, 5, 2);
    Rng rng(1);
    CHECK(m.predict(random_sequence(rng, 7, true)) == 0.5);
    SequenceInstance empty;
    CHECK_THROWS_AS(m.predict(empty), DataError);
}

TEST_CASE("forward pass equals the gate-equation oracle") {
    for (int layers : {1, 2, 3}) {
        GruModel m(4, 3, layers);
        Rng rng(static_cast<std::uint64_t>(layers));
        m.init_uniform(rng);
        for (int i = 0; i < 5; ++i) {
            const auto s = random_sequence(rng, rng.uniform_int(1, 12), false);
            CHECK(m.predict(s) == doctest::Approx(reference_predict(m.parameters(), 4, 3, layers, s)).epsilon(1e-12));
        }
    }
}

TEST_CASE("single-unit straight-line example") {
    // One unit, only the candidate path active: r and z gates are sigmoid(0) = 0.5
    // and n = tanh(x). h1 = 0.5 tanh(1); h2 = 0.5 tanh(1 + 0.5 * 0) + 0.5 h1.
    GruModel m(4, 1, 1);
    auto p = m.parameters();
    std::fill(p.begin(), p.end(), 0.0);
    p[2] = 1.0;  // W_i row n, column 0
    p[p.size() - 2] = 1.0;  // head weight
    SequenceInstance s;
    s.steps = {{1, 0, 0, 0}, {1, 0, 0, 0}};
    const double h1 = 0.5 * std::tanh(1.0);
    const double h2 = 0.5 * std::tanh(1.0) + 0.5 * h1;
    CHECK(m.predict(s) == doctest::Approx(sigmoid(h2)).epsilon(1e-14));
}

TEST_CASE("backpropagation through time matches finite differences") {
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        GruModel m(4, 3, 2);
        Rng rng(seed);
        m.init_uniform(rng);
        std::vector<SequenceInstance> seqs;
        for (int i = 0; i < 3; ++i) seqs.push_back(random_sequence(rng, rng.uniform_int(3, 7), i % 2 == 0));
        std::vector<const SequenceInstance*> batch;
        for (const auto& s : seqs) batch.push_back(&s);
        const auto r = check_gru_gradients(m, batch);
        CHECK(r.parameters == m.parameter_count());
        CHECK(r.max_relative_error < 1e-4);
    }
}

TEST_CASE("early stopping patience arithmetic") {
    EarlyStopping es(2);
    CHECK_FALSE(es.update(5.0));
    CHECK(es.improved());
    CHECK_FALSE(es.update(4.0));
    CHECK_FALSE(es.update(4.5));
    CHECK_FALSE(es.improved());
    CHECK(es.update(4.2));
    CHECK(es.best_epoch() == 2);
    CHECK(es.best_loss() == 4.0);

    EarlyStopping reset(2);
    reset.update(3.0);
    reset.update(3.1);
    CHECK_FALSE(reset.update(2.0));  // improvement resets the count
    CHECK_FALSE(reset.update(2.5));
    CHECK(reset.update(2.5));
    CHECK(reset.best_epoch() == 3);
}

TEST_CASE("sequences pair traces by index") {
    const auto a = testutil::trace("a", "2024-03-04", {{1, 1.0, 2.0}, {2, 3.0, 4.0}, {3, 5.0, 6.0}});
    const auto b = testutil::trace("b", "2024-03-04", {{1, 7.0, 8.0}, {5, 9.0, 10.0}});
    const auto s = make_sequence(testutil::pair_day("P", a, b, true), 512);
    REQUIRE(s.length() == 2);
    CHECK(s.steps[1] == std::array<double, 4>{3, 4, 9, 10});
    CHECK(s.label);
    CHECK(make_sequence(testutil::pair_day("P", a, a, true), 2).length() == 2);
    const auto none = testutil::trace("b", "2024-03-04", {});
    CHECK_THROWS_AS(make_sequence(testutil::pair_day("P", a, none, true), 512), DataError);
}

TEST_CASE("standardizer") {
    SequenceInstance s1, s2;
    s1.steps = {{0, 10, 0, 0}, {2, 10, 0, 0}};
    s2.steps = {{4, 10, 0, 0}};
    std::vector<const SequenceInstance*> v{&s1, &s2};
    const auto st = Standardizer::fit(v);
    CHECK(st.mean[0] == doctest::Approx(2.0));
    CHECK(st.mean[1] == doctest::Approx(10.0));
    const auto z = st.apply(s2);
    CHECK(z.steps[0][0] == doctest::Approx(2.0 / st.scale[0]));
    CHECK(std::isfinite(z.steps[0][1]));  // constant feature does not divide by zero
}

TEST_CASE("training separates an easy corpus") {
    Rng rng(5);
    const auto train = separable(rng, 80);
    const auto test = separable(rng, 40);
    GruConfig c;
    c.hidden_size = 8;
    c.num_layers = 1;
    c.max_epochs = 30;
    c.learning_rate = 1e-2;
    GruTrainingReport rep;
    const auto m = train_gru(train, c, &rep);
    CHECK(rep.best_epoch >= 1);
    CHECK_FALSE(rep.train_losses.empty());
    ConfusionCounts cc;
    for (const auto& s : test) cc.add(m.predict(s) >= 0.5, s.label);
    CHECK(compute_metrics(cc).f1 >= 0.9);
}

TEST_CASE("model persistence") {
    GruModel m(4, 3, 2);
    Rng rng(2);
    m.init_uniform(rng);
    m.standardizer.mean = {1, 2, 3, 4};
    const auto path = std::filesystem::temp_directory_path() / "trajmatch_test_gru.json";
    save_gru_model(path, m);
    const auto back = load_gru_model(path);
    std::filesystem::remove(path);
    const auto s = random_sequence(rng, 6, true);
    CHECK(back.predict(s) == m.predict(s));
    CHECK(back.standardizer.mean == m.standardizer.mean);
}

TEST_CASE("config validation") {
    GruConfig c;
    c.patience = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = GruConfig{};
    c.dropout = 1.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("cross-validation on a small corpus") {
    ScenarioConfig sc;
    sc.num_pairs = 5;
    sc.days_per_pair = 6;
    sc.co_walk_probability = 0.5;
    const auto days = generate(sc).days;
    GruConfig c;
    c.max_epochs = 3;
    c.hidden_size = 4;
    const auto r = cross_validate_gru(days, c, 3, 7);
    CHECK(r.fold_counts.size() == 3);
    CHECK(r.pooled.total() == days.size());
    CHECK(r.seconds_per_instance > 0);
    const auto again = cross_validate_gru(days, c, 3, 7);
    CHECK(again.pooled == r.pooled);
}
