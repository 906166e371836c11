// End-to-end acceptance run: one PASS/FAIL line per criterion, nonzero exit if
// any fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "oracles.hpp"

#include "trajmatch/eval.hpp"
#include "trajmatch/gradcheck.hpp"
#include "trajmatch/gru.hpp"
#include "trajmatch/pipeline.hpp"
#include "trajmatch/quality.hpp"
#include "trajmatch/random.hpp"
#include "trajmatch/routine.hpp"
#include "trajmatch/synth.hpp"

using namespace trajmatch;

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

SiameseModel random_model(std::uint64_t seed, int input) {
    Architecture a;
    a.input_size = input;
    a.conv_channels = {4, 8};
    a.embedding_dim = 8;
    SiameseModel m(a);
    Rng rng(seed);
    m.network().init_uniform_fan_in(rng);
    return m;
}

// Shared between criteria 5, 6 and 9.
struct Benchmark {
    std::vector<PairDay> days;
    PipelineConfig config;
    CrossValidationConfig cv;
    CrossValidationResult result;
    double seconds = 0.0;
};

Outcome gradients() {
    const auto t0 = Clock::now();
    double cnn = 0, gru = 0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto r = run_toy_gradient_checks(seed, 1e-5);
        cnn = std::max(cnn, r.cnn.max_relative_error);
        gru = std::max(gru, r.gru.max_relative_error);
    }
    const double s = since(t0);
    return {cnn < 1e-4 && gru < 1e-4 && s < 30,
            fmt("toy CNN max rel err %.2e, toy GRU %.2e, %.2f s", cnn, gru, s)};
}

Outcome rasterization() {
    const auto t0 = Clock::now();
    ScenarioConfig sc;
    sc.num_pairs = 10;
    sc.days_per_pair = 5;
    sc.co_walk_probability = 0.5;
    sc.seed = 101;
    const auto days = generate(sc).days;
    const int layer_counts[] = {1, 5, 24, 48};
    const CanvasSpec canvas;
    std::size_t traces = 0, images = 0, mismatches = 0, bad_partition = 0, bad_extent = 0;
    for (std::size_t i = 0; i < days.size(); ++i) {
        LayerSpec spec;
        spec.num_layers = layer_counts[i % 4];
        RenderOptions opts;
        if (i % 2) opts.max_gap_ms = 5 * 60'000;
        const auto windows = spec.windows();
        std::int64_t cursor = 0;
        for (const auto& w : windows) {
            bad_partition += w.t0_ms != cursor || w.t1_ms <= w.t0_ms;
            cursor = w.t1_ms;
        }
        bad_partition += cursor != kMillisPerDay;
        const auto layers = render_pair_day(days[i], spec, canvas, opts);
        for (std::size_t k = 0; k < layers.size(); ++k) {
            const auto& lp = layers[k];
            bad_extent += !(lp.a.extent == lp.b.extent) || !(lp.a.extent == compute_pair_extent(days[i], windows[k]));
            mismatches += lp.a.colored_pixel_count !=
                          oracle::colored_count(days[i].trace_a, windows[k], lp.a.extent, canvas, opts.max_gap_ms);
            mismatches += lp.b.colored_pixel_count !=
                          oracle::colored_count(days[i].trace_b, windows[k], lp.b.extent, canvas, opts.max_gap_ms);
            images += 2;
        }
        traces += 2;
    }
    const double s = since(t0);
    return {mismatches == 0 && bad_partition == 0 && bad_extent == 0 && s < 60,
            fmt("%zu traces, %zu images, %zu count mismatches, %zu partition errors, %zu extent errors, %.1f s", traces,
                images, mismatches, bad_partition, bad_extent, s)};
}

Outcome overlap_soundness() {
    const auto t0 = Clock::now();
    ScenarioConfig sc;
    sc.co_walk_probability = 0.0;
    sc.disjoint_homes = true;
    sc.num_pairs = 20;
    const auto days = generate(sc).days;
    PipelineConfig pc;
    pc.variant = PipelineVariant::Overlap;
    pc.layers.num_layers = 24;
    auto model = random_model(1, 64);
    model.distance_threshold = 1e300;  // anything reaching the network would be positive
    StageCounters counters;
    std::size_t positives = 0;
    for (const auto& v : classify_days(days, pc, model, 1, &counters)) positives += v.decision;
    const double s = since(t0);
    return {positives == 0 && counters.network_invocations == 0 && counters.overlap_checks > 0 && s < 60,
            fmt("%zu days, %zu positive, %zu overlap checks, %zu network invocations, %.1f s", days.size(), positives,
                counters.overlap_checks, counters.network_invocations, s)};
}

Outcome short_circuit() {
    ScenarioConfig sc;
    sc.num_pairs = 20;
    sc.days_per_pair = 10;
    sc.co_walk_probability = 0.5;
    sc.seed = 33;
    const auto days = generate(sc).days;
    std::size_t mismatches = 0, positives = 0;
    for (std::size_t i = 0; i < days.size(); ++i) {
        PipelineConfig pc;
        pc.variant = kAllVariants[i % std::size(kAllVariants)];
        pc.layers.num_layers = i % 2 ? 24 : 5;
        pc.filter_threshold = 20;
        auto model = random_model(derive_seed(4, i), 32);
        const auto scores = score_all_layers(days[i], pc, model);
        std::vector<double> d;
        for (const auto& s : scores) {
            if (s.distance) d.push_back(*s.distance);
        }
        // Threshold at the median candidate distance so both outcomes occur.
        if (!d.empty()) {
            std::sort(d.begin(), d.end());
            model.distance_threshold = d[d.size() / 2];
        }
        bool want = false;
        std::optional<int> layer;
        for (const auto& s : scores) {
            if (s.distance && *s.distance < model.distance_threshold) {
                want = true;
                layer = s.layer_index;
                break;
            }
        }
        const auto v = classify_day(days[i], pc, model);
        mismatches += v.decision != want || v.matched_layer != layer;
        positives += v.decision;
    }
    return {mismatches == 0,
            fmt("%zu days over all variants, %zu positive, %zu mismatches", days.size(), positives, mismatches)};
}

Outcome end_to_end(Benchmark& b) {
    const auto t0 = Clock::now();
    ScenarioConfig sc;  // 50 pairs x 10 days, seed 7
    b.days = generate(sc).days;
    b.config.variant = PipelineVariant::EntireMethod;
    b.config.layers.num_layers = 24;
    b.config.filter_threshold = corpus_filter_threshold(b.days, b.config.layers, b.config.canvas,
                                                        default_filter_percentile(24));
    b.cv.folds = 5;
    b.cv.architecture.input_size = 64;
    const auto prepared = prepare_days(b.days, b.config, 64, 1);
    const ModelContext ctx{b.config.variant, 24, b.config.canvas, b.config.filter_threshold, b.config.crop_pad};
    b.result = cross_validate(prepared, b.cv, ctx);
    b.seconds = since(t0);
    const auto& m = b.result.metrics;
    return {m.f1 >= 0.80 && m.mcc >= 0.55 && b.seconds < 15 * 60,
            fmt("F1 %.3f, MCC %.3f (weighted F1 %.3f), %zu days, %.0f s", m.f1, m.mcc, b.result.weighted.f1,
                b.days.size(), b.seconds)};
}

Outcome ordering(const Benchmark& b) {
    GruConfig gc;
    const auto g = cross_validate_gru(b.days, gc, b.cv.folds, b.cv.seed);
    const double siamese_mcc = b.result.metrics.mcc;
    return {siamese_mcc > g.metrics.mcc && g.seconds_per_instance < b.result.seconds_per_day,
            fmt("MCC siamese %.3f vs GRU %.3f; seconds per instance GRU %.2e vs pipeline %.2e", siamese_mcc,
                g.metrics.mcc, g.seconds_per_instance, b.result.seconds_per_day)};
}

Outcome render_timing() {
    ScenarioConfig sc;
    sc.num_pairs = 20;
    sc.days_per_pair = 5;
    const auto days = generate(sc).days;
    const int counts[] = {1, 5, 24, 48};
    std::vector<double> total, per_image;
    for (int l : counts) {
        LayerSpec spec;
        spec.num_layers = l;
        double best = 1e300;
        for (int rep = 0; rep < 5; ++rep) {
            const auto t0 = Clock::now();
            std::size_t sink = 0;
            for (const auto& d : days) {
                for (const auto& lp : render_pair_day(d, spec, CanvasSpec{})) sink += lp.a.colored_pixel_count;
            }
            best = std::min(best, since(t0));
            if (sink == 0) best = 1e300;  // keeps the work observable
        }
        total.push_back(best);
        per_image.push_back(best / static_cast<double>(2 * l * days.size()));
    }
    bool ok = true;
    for (std::size_t i = 1; i < total.size(); ++i) ok = ok && per_image[i] < per_image[i - 1] && total[i] > total[i - 1];
    std::string d = "total/per-image (ms):";
    for (std::size_t i = 0; i < total.size(); ++i) d += fmt(" l=%d %.1f/%.3f", counts[i], total[i] * 1e3, per_image[i] * 1e3);
    return {ok, d};
}

Outcome dbscan_equivalence() {
    const std::pair<double, int> settings[] = {{0.01, 3}, {0.02, 5}, {0.05, 4}, {0.005, 1}, {0.1, 10}};
    Rng rng(88);
    std::size_t runs = 0, mismatches = 0;
    for (int inst = 0; inst < 50; ++inst) {
        const int n = rng.uniform_int(1, 200);
        const int blobs = rng.uniform_int(1, 5);
        std::vector<GeoPoint> centres, pts;
        for (int b = 0; b < blobs; ++b) centres.push_back({rng.uniform(40.0, 40.5), rng.uniform(-80.0, -79.5)});
        for (int i = 0; i < n; ++i) {
            if (rng.bernoulli(0.25)) {
                pts.push_back({rng.uniform(40.0, 40.5), rng.uniform(-80.0, -79.5)});
            } else {
                const auto& c = centres[static_cast<std::size_t>(rng.uniform_int(0, blobs - 1))];
                pts.push_back({c.lat + 0.02 * rng.normal(), c.lon + 0.02 * rng.normal()});
            }
        }
        for (const auto& [eps, min_pts] : settings) {
            mismatches += dbscan(pts, eps, min_pts) != oracle::dbscan(pts, eps, min_pts);
            ++runs;
        }
    }
    return {mismatches == 0, fmt("%zu runs, %zu mismatches", runs, mismatches)};
}

Outcome routine_ranking(const Benchmark& b) {
    // The fine-tuned model: the benchmark configuration trained once on every day.
    const auto prepared = prepare_days(b.days, b.config, 64, 1);
    std::vector<const PreparedDay*> ptrs;
    for (const auto& p : prepared) ptrs.push_back(&p);
    const auto pairs = training_pairs_from(ptrs);
    const auto model = train_siamese(b.cv.architecture, pairs, b.cv.contrastive, b.cv.optimizer);
    int hits = 0;
    std::string firsts;
    for (int rep = 0; rep < 20; ++rep) {
        RoutineScenarioConfig rc;
        rc.seed = derive_seed(11, static_cast<std::uint64_t>(rep));
        const auto s = generate_routine_pair(rc);
        const auto fa = routine_filter(s.days_a, 1e-4, 5);
        const auto fb = routine_filter(s.days_b, 1e-4, 5);
        LayerSpec spec;
        spec.num_layers = 5;
        RenderOptions ro;
        ro.max_gap_ms = 5 * 60'000;
        const auto layers = render_routine_layers(fa.days, fb.days, spec, CanvasSpec{}, ro, s.pair_id);
        const auto r = rank_layers(layers, model);
        const int first = r.ranking.empty() ? 0 : r.ranking.front();
        hits += first == s.co_walk_layer;
        firsts += std::to_string(first);
    }
    return {hits >= 19, fmt("planted layer ranked first in %d/20 replicates (top layers %s)", hits, firsts.c_str())};
}

Outcome metrics_oracle() {
    Rng rng(2024);
    std::vector<ConfusionCounts> cases;
    for (int i = 0; i < 25; ++i) {
        cases.push_back({rng.below(1000), rng.below(1000), rng.below(1000), rng.below(1000)});
    }
    // Zero denominators: no predicted positives, no actual positives, no
    // predicted negatives, no actual negatives, single-cell matrices.
    const ConfusionCounts zeros[] = {{0, 0, 5, 3}, {0, 4, 6, 0}, {3, 2, 0, 0}, {4, 0, 0, 2},
                                     {7, 0, 0, 0}, {0, 7, 0, 0}, {0, 0, 7, 0}, {0, 0, 0, 7}};
    cases.insert(cases.end(), std::begin(zeros), std::end(zeros));
    std::size_t failures = 0;
    double worst = 0;
    for (const auto& c : cases) {
        const auto m = compute_metrics(c);
        const auto o = oracle::exact_metrics(c);
        for (const auto [a, e] : {std::pair{m.precision, o.precision}, {m.recall, o.recall}, {m.accuracy, o.accuracy},
                                  {m.f1, o.f1}, {m.mcc, o.mcc}}) {
            worst = std::max(worst, std::fabs(a - e));
            failures += !(std::fabs(a - e) <= 1e-12);
        }
    }
    return {failures == 0, fmt("%zu matrices, %zu metric mismatches, max abs diff %.1e", cases.size(), failures, worst)};
}

}  // namespace

int main() {
    int failed = 0;
    auto report = [&](int n, const char* name, const Outcome& o) {
        std::printf("criterion %2d %-22s %s  %s\n", n, name, o.pass ? "PASS" : "FAIL", o.detail.c_str());
        std::fflush(stdout);
        failed += !o.pass;
    };
    auto guarded = [](const std::function<Outcome()>& f) {
        try {
            return f();
        } catch (const std::exception& e) {
            return Outcome{false, std::string("exception: ") + e.what()};
        }
    };
    Benchmark bench;
    report(1, "gradient-check", guarded(gradients));
    report(2, "rasterization-oracle", guarded(rasterization));
    report(3, "overlap-soundness", guarded(overlap_soundness));
    report(4, "short-circuit", guarded(short_circuit));
    report(5, "end-to-end", guarded([&] { return end_to_end(bench); }));
    const bool have_bench = !bench.result.folds.empty();
    report(6, "benchmark-ordering",
           have_bench ? guarded([&] { return ordering(bench); }) : Outcome{false, "benchmark did not run"});
    report(7, "render-timing", guarded(render_timing));
    report(8, "dbscan", guarded(dbscan_equivalence));
    report(9, "routine-ranking",
           have_bench ? guarded([&] { return routine_ranking(bench); }) : Outcome{false, "benchmark did not run"});
    report(10, "metrics-oracle", guarded(metrics_oracle));
    std::printf("%d of 10 criteria failed\n", failed);
    return failed == 0 ? 0 : 1;
}
