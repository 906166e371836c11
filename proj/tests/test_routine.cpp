#include <algorithm>

#include "doctest.h"
#include "helpers.hpp"
#include "oracles.hpp"

#include "trajmatch/error.hpp"
#include "trajmatch/random.hpp"
#include "trajmatch/routine.hpp"
#include "trajmatch/synth.hpp"

using namespace trajmatch;

namespace {

// Blobs plus scattered points; some coordinates repeat to exercise ties at eps.
std::vector<GeoPoint> random_points(Rng& rng, int n) {
    std::vector<GeoPoint> p;
    const int blobs = rng.uniform_int(1, 4);
    std::vector<GeoPoint> centres;
    for (int b = 0; b < blobs; ++b) centres.push_back({rng.uniform(0, 1), rng.uniform(0, 1)});
    for (int i = 0; i < n; ++i) {
        if (rng.bernoulli(0.2)) {
            p.push_back({rng.uniform(0, 1), rng.uniform(0, 1)});
        } else if (!p.empty() && rng.bernoulli(0.05)) {
            p.push_back(p[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(p.size()) - 1))]);
        } else {
            const auto& c = centres[static_cast<std::size_t>(rng.uniform_int(0, blobs - 1))];
            p.push_back({c.lat + 0.03 * rng.normal(), c.lon + 0.03 * rng.normal()});
        }
    }
    return p;
}

SiameseModel small_model(int input) {
    Architecture a;
    a.input_size = input;
    a.conv_channels = {4};
    a.embedding_dim = 4;
    SiameseModel m(a);
    Rng rng(3);
    m.network().init_uniform_fan_in(rng);
    return m;
}

LayerImage image_with(int layer, std::size_t colored, int size) {
    LayerImage img;
    img.layer_index = layer;
    img.pixels = RgbImage(size, size);
    for (std::size_t k = 0; k < colored; ++k) {
        img.pixels.set(static_cast<int>(k) % size, static_cast<int>(k) / size, colormap(0.5));
    }
    img.colored_pixel_count = colored;
    return img;
}

}  // namespace

TEST_CASE("dbscan equals the brute-force oracle") {
    Rng rng(21);
    for (int trial = 0; trial < 60; ++trial) {
        const auto pts = random_points(rng, rng.uniform_int(0, 150));
        const double eps = rng.uniform(0.005, 0.08);
        const int min_pts = rng.uniform_int(1, 8);
        CHECK(dbscan(pts, eps, min_pts) == oracle::dbscan(pts, eps, min_pts));
    }
}

TEST_CASE("dbscan small cases") {
    const std::vector<GeoPoint> pts{{0, 0}, {0, 1}, {0, 2}, {0, 10}};
    CHECK(dbscan(pts, 1.0, 2) == std::vector<int>{0, 0, 0, kNoise});
    CHECK(dbscan(pts, 1.0, 1) == std::vector<int>{0, 0, 0, 1});
    // The middle point is the only core; the ends are border points.
    CHECK(dbscan(pts, 1.0, 3) == std::vector<int>{0, 0, 0, kNoise});
    CHECK(dbscan(pts, 0.5, 2) == std::vector<int>{kNoise, kNoise, kNoise, kNoise});
    CHECK(dbscan(std::vector<GeoPoint>{}, 1.0, 2).empty());
    CHECK_THROWS_AS(dbscan(pts, 0.0, 2), ConfigError);
    CHECK_THROWS_AS(dbscan(pts, -1.0, 2), ConfigError);
    CHECK_THROWS_AS(dbscan(pts, 1.0, 0), ConfigError);
}

TEST_CASE("routine filter drops one-off places") {
    Rng rng(4);
    std::vector<DayTrace> days;
    for (int d = 0; d < 5; ++d) {
        std::vector<std::tuple<double, double, double>> fixes;
        for (int m = 0; m < 30; ++m) fixes.emplace_back(m, 40.0 + 1e-5 * rng.normal(), -80.0 + 1e-5 * rng.normal());
        fixes.emplace_back(100, 41.0 + d, -79.0);  // somewhere visited once
        days.push_back(testutil::trace("a", "2024-03-0" + std::to_string(d + 1), fixes));
    }
    const auto r = routine_filter(days, 1e-4, 5);
    CHECK(r.removed == 5);
    CHECK(r.retained == 150);
    CHECK(r.clusters == 1);
    CHECK(r.diagnostic.empty());
    REQUIRE(r.days.size() == 5);
    for (const auto& d : r.days) {
        CHECK(d.samples.size() == 30);
        for (const auto& s : d.samples) CHECK(s.lat < 40.5);
    }

    const auto all_noise = routine_filter(days, 1e-9, 100);
    CHECK(all_noise.retained == 0);
    CHECK_FALSE(all_noise.diagnostic.empty());
    CHECK_THROWS_AS(routine_filter(std::span<const DayTrace>(days.data(), 1), 1e-4, 5), DataError);
}

TEST_CASE("routine layers share an extent and cover every day") {
    const auto s = generate_routine_pair(RoutineScenarioConfig{});
    LayerSpec spec;
    spec.num_layers = 5;
    CanvasSpec canvas;
    canvas.width = canvas.height = 64;
    const auto layers = render_routine_layers(s.days_a, s.days_b, spec, canvas, {}, s.pair_id);
    REQUIRE(layers.size() == 5);
    for (int i = 0; i < 5; ++i) {
        const auto& lp = layers[static_cast<std::size_t>(i)];
        CHECK(lp.a.layer_index == i + 1);
        CHECK(lp.a.extent == lp.b.extent);
        CHECK(lp.a.window == spec.window(i + 1));
        CHECK(lp.a.pair_id == s.pair_id);
        CHECK(lp.a.colored_pixel_count == lp.a.pixels.count_colored());
    }
    // Layer 1 is night at home: tiny footprint. Layers 2-5 hold walks.
    CHECK(layers[3].a.colored_pixel_count > layers[0].a.colored_pixel_count);
}

TEST_CASE("ranking excludes thin layers and orders the rest") {
    const auto model = small_model(16);
    std::vector<LayerPair> layers;
    layers.push_back({image_with(1, 10, 16), image_with(1, 100, 16)});
    layers.push_back({image_with(2, 100, 16), image_with(2, 100, 16)});
    layers.push_back({image_with(3, 60, 16), image_with(3, 120, 16)});
    layers.push_back({image_with(4, 100, 16), image_with(4, 100, 16)});
    const auto r = rank_layers(layers, model, RankOptions{50.0, std::nullopt});
    CHECK(r.pixel_threshold == 50.0);
    REQUIRE(r.layers.size() == 4);
    CHECK(r.layers[0].excluded);
    CHECK(r.layers[0].reason == "insufficient data: 10 colored pixels < 50");
    CHECK_FALSE(r.layers[0].distance);
    // Layers 2 and 4 are identical pairs: distance 0, tie broken by index.
    CHECK(r.layers[1].distance == 0.0);
    REQUIRE(r.ranking.size() == 3);
    CHECK(r.ranking[0] == 2);
    CHECK(r.ranking[1] == 4);
    CHECK(r.ranking[2] == 3);

    const auto raised = rank_layers(layers, model, RankOptions{50.0, 100.0});
    CHECK(raised.pixel_threshold >= 100.0);
    CHECK(raised.layers[2].excluded);

    const auto j = to_json(r);
    CHECK(j["ranking"] == nlohmann::json({2, 4, 3}));
    CHECK(j["layers"][0]["reason"] == r.layers[0].reason);
    const auto svg = routine_svg(r);
    CHECK(svg.rfind("<svg", 0) == 0);
    CHECK(svg.find("insufficient data") != std::string::npos);
}
