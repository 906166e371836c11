#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "helpers.hpp"

#include "trajmatch/error.hpp"
#include "trajmatch/localize.hpp"
#include "trajmatch/quality.hpp"
#include "trajmatch/random.hpp"
#include "trajmatch/stages.hpp"

using namespace trajmatch;

namespace {

double sort_oracle(std::vector<double> v, double p) {
    std::sort(v.begin(), v.end());
    if (p <= 0) return v.front();
    const auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(v.size())));
    return v[std::max<std::size_t>(rank, 1) - 1];
}

LayerImage image_with(int w, int h, std::vector<std::pair<int, int>> px) {
    LayerImage img;
    img.pixels = RgbImage(w, h);
    for (auto [x, y] : px) img.pixels.set(x, y, Rgb{0, 0, 255});
    img.colored_pixel_count = img.pixels.count_colored();
    return img;
}

}  // namespace

TEST_CASE("nearest-rank percentiles") {
    const std::vector<double> v{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    CHECK(nearest_rank_percentile(v, 0) == 1);
    CHECK(nearest_rank_percentile(v, 25) == 3);
    CHECK(nearest_rank_percentile(v, 50) == 5);
    CHECK(nearest_rank_percentile(v, 75) == 8);
    CHECK(nearest_rank_percentile(v, 100) == 10);

    Rng rng(5);
    for (int i = 0; i < 300; ++i) {
        std::vector<double> xs(static_cast<std::size_t>(rng.uniform_int(1, 50)));
        for (auto& x : xs) x = static_cast<double>(rng.uniform_int(0, 400));
        const double p = rng.uniform(0, 100);
        auto sorted = xs;
        std::sort(sorted.begin(), sorted.end());
        CHECK(nearest_rank_percentile(sorted, p) == sort_oracle(xs, p));
    }
}

TEST_CASE("filter statistics") {
    const std::vector<double> counts{0, 10, 20, 30, 40};
    const auto s = compute_stats(counts);
    CHECK(s.min == 0);
    CHECK(s.max == 40);
    CHECK(s.mean == 20);
    CHECK(s.p25 == 10);
    CHECK(s.p50 == 20);
    CHECK(s.p75 == 30);
    CHECK(s.count == 5);
    CHECK(threshold_from_stats(s, 25) == 10);
    CHECK(threshold_from_stats(s, 50) == 20);
    CHECK(default_filter_percentile(1) == 25);
    CHECK(default_filter_percentile(5) == 50);
    CHECK(default_filter_percentile(48) == 50);
    CHECK_THROWS_AS(compute_stats(std::vector<double>{}), Error);

    const auto back = filter_stats_from_json(to_json(s));
    CHECK(back.p75 == s.p75);
    CHECK(back.count == s.count);
}

TEST_CASE("the filter drops a layer for both members") {
    LayerPair lp{image_with(8, 8, {{1, 1}, {2, 2}, {3, 3}}), image_with(8, 8, {{1, 1}})};
    CHECK(passes_filter(lp, 1));
    CHECK_FALSE(passes_filter(lp, 2));
    std::vector<LayerPair> v{lp, LayerPair{lp.a, lp.a}};
    const auto kept = filter_pairs(v, 2);
    REQUIRE(kept.size() == 1);
    CHECK(kept[0].b.colored_pixel_count == 3);
}

TEST_CASE("corpus threshold ignores blank images") {
    const auto a = testutil::trace("a", "2024-03-04", {{60, 40.0, -80.0}, {90, 40.01, -80.01}});
    const auto b = testutil::trace("b", "2024-03-04", {{61, 40.0, -80.0}, {91, 40.0, -80.01}});
    std::vector<PairDay> days{testutil::pair_day("P", a, b, true)};
    LayerSpec spec;
    spec.num_layers = 24;
    const CanvasSpec c{};
    const auto counts = corpus_pixel_counts(days, spec, c);
    CHECK(counts.size() == 2);
    CHECK(corpus_pixel_counts(days, spec, c, {}, true).size() == 48);
    CHECK(corpus_filter_threshold(days, spec, c, 50) == *std::min_element(counts.begin(), counts.end()));

    const auto empty_a = testutil::trace("a", "2024-03-04", {});
    std::vector<PairDay> blank{testutil::pair_day("P", empty_a, empty_a, true)};
    CHECK_THROWS_AS(corpus_filter_threshold(blank, spec, c, 50), Error);
}

TEST_CASE("locate and crop") {
    const auto img = image_with(20, 10, {{3, 2}, {7, 8}, {5, 5}});
    const auto box = locate(img);
    CHECK_FALSE(box.empty);
    CHECK(box == BoundingBox{3, 2, 7, 8, false});
    CHECK(box.width() == 5);
    CHECK(box.height() == 7);

    CHECK(locate(RgbImage(4, 4)).empty);

    const auto padded = padded_box(box, 2, 20, 10);
    CHECK(padded == BoundingBox{1, 0, 9, 9, false});
    CHECK_THROWS_AS(padded_box(BoundingBox{}, 2, 20, 10), Error);
    CHECK_THROWS_AS(padded_box(box, -1, 20, 10), Error);

    const auto cropped = crop(img, box, 2);
    CHECK(cropped.pixels.width() == 9);
    CHECK(cropped.pixels.height() == 10);
    CHECK(cropped.colored_pixel_count == 3);
    CHECK(cropped.pixels.at(2, 2) == Rgb{0, 0, 255});
}

TEST_CASE("locate and crop properties on random images") {
    Rng rng(9);
    for (int i = 0; i < 200; ++i) {
        const int w = rng.uniform_int(1, 40), h = rng.uniform_int(1, 40);
        std::vector<std::pair<int, int>> px;
        const int n = rng.uniform_int(1, 12);
        for (int k = 0; k < n; ++k) px.emplace_back(rng.uniform_int(0, w - 1), rng.uniform_int(0, h - 1));
        const auto img = image_with(w, h, px);
        const auto box = locate(img);
        REQUIRE_FALSE(box.empty);
        int x0 = w, y0 = h, x1 = -1, y1 = -1;
        for (auto [x, y] : px) {
            x0 = std::min(x0, x), y0 = std::min(y0, y), x1 = std::max(x1, x), y1 = std::max(y1, y);
        }
        CHECK(box == BoundingBox{x0, y0, x1, y1, false});
        const int pad = rng.uniform_int(0, 5);
        const auto c = crop(img, box, pad);
        CHECK(c.colored_pixel_count == img.colored_pixel_count);
        CHECK(c.pixels.width() == std::min(w - 1, x1 + pad) - std::max(0, x0 - pad) + 1);
        CHECK(c.pixels.height() == std::min(h - 1, y1 + pad) - std::max(0, y0 - pad) + 1);
    }
}

TEST_CASE("boxes overlap only with positive shared area") {
    const BoundingBox a{0, 0, 9, 9, false};
    CHECK(boxes_overlap(a, BoundingBox{5, 5, 15, 15, false}));
    CHECK(boxes_overlap(a, BoundingBox{2, 2, 3, 3, false}));
    CHECK_FALSE(boxes_overlap(a, BoundingBox{10, 0, 20, 9, false}));
    CHECK_FALSE(boxes_overlap(a, BoundingBox{20, 20, 30, 30, false}));
    CHECK_THROWS_AS(boxes_overlap(a, BoundingBox{}), Error);

    // Boxes are compared on pixel centres: sharing only an edge row or corner
    // pixel is zero area, as is a box one pixel wide.
    CHECK_FALSE(boxes_overlap(a, BoundingBox{9, 0, 20, 9, false}));
    CHECK_FALSE(boxes_overlap(a, BoundingBox{9, 9, 20, 20, false}));
    CHECK_FALSE(boxes_overlap(BoundingBox{3, 0, 3, 9, false}, a));
    CHECK(boxes_overlap(a, BoundingBox{8, 8, 20, 20, false}));

    Rng rng(4);
    for (int i = 0; i < 500; ++i) {
        auto rnd = [&] {
            int x0 = rng.uniform_int(0, 30), x1 = rng.uniform_int(0, 30), y0 = rng.uniform_int(0, 30),
                y1 = rng.uniform_int(0, 30);
            return BoundingBox{std::min(x0, x1), std::min(y0, y1), std::max(x0, x1), std::max(y0, y1), false};
        };
        const auto p = rnd(), q = rnd();
        CHECK(boxes_overlap(p, q) == boxes_overlap(q, p));
        const bool expected = std::min(p.x1, q.x1) > std::max(p.x0, q.x0) && std::min(p.y1, q.y1) > std::max(p.y0, q.y0);
        CHECK(boxes_overlap(p, q) == expected);
    }
}

TEST_CASE("variant names and stage wiring") {
    for (auto v : kAllVariants) CHECK(parse_variant(variant_name(v)) == v);
    CHECK_THROWS_AS(parse_variant("nope"), ConfigError);
    CHECK_FALSE(stages_of(PipelineVariant::Baseline).overlap);
    CHECK(stages_of(PipelineVariant::Overlap).overlap);
    CHECK(stages_of(PipelineVariant::OverlapCrop).crop);
    CHECK(stages_of(PipelineVariant::OverlapFilter).filter);
    const auto e = stages_of(PipelineVariant::EntireMethod);
    CHECK((e.filter && e.overlap && e.crop));

    PipelineConfig pc;
    pc.variant = PipelineVariant::EntireMethod;
    CHECK_THROWS_AS(pc.validate(), ConfigError);  // filtering needs a threshold
    pc.filter_threshold = 10;
    pc.validate();
}

TEST_CASE("assess_layers stage behaviour") {
    // Layer 1 of 2 (00:00-12:00): both walk the same path. Layer 2: far apart.
    const auto a = testutil::trace("a", "2024-03-04", {{60, 40.0, -80.0}, {90, 40.01, -80.01}, {800, 40.0, -80.0},
                                                       {830, 40.001, -80.001}});
    const auto b = testutil::trace("b", "2024-03-04", {{61, 40.0, -80.0}, {91, 40.01, -80.01}, {800, 40.5, -80.5},
                                                       {830, 40.501, -80.501}});
    const auto day = testutil::pair_day("P", a, b, true);
    PipelineConfig pc;
    pc.layers.num_layers = 2;
    pc.variant = PipelineVariant::Overlap;
    StageCounters counters;
    const auto as = assess_layers(day, pc, &counters);
    REQUIRE(as.size() == 2);
    CHECK(as[0].status == LayerStatus::Candidate);
    CHECK(as[1].status == LayerStatus::NoOverlap);
    CHECK(as[0].input_a.width() == 256);
    CHECK(as[1].input_a.empty());
    CHECK(counters.images_rendered == 4);
    CHECK(counters.localizations == 4);
    CHECK(counters.overlap_checks == 2);
    CHECK(counters.crops == 0);

    pc.variant = PipelineVariant::EntireMethod;
    pc.filter_threshold = 1e9;
    const auto filtered = assess_layers(day, pc);
    CHECK(filtered[0].status == LayerStatus::Filtered);
    CHECK(filtered[1].status == LayerStatus::Filtered);

    pc.filter_threshold = 1;
    const auto cropped = assess_layers(day, pc);
    REQUIRE(cropped[0].status == LayerStatus::Candidate);
    CHECK(cropped[0].input_a.width() < 256);
    CHECK(cropped[0].input_a.count_colored() == cropped[0].pixels_a);

    pc.variant = PipelineVariant::Baseline;
    const auto base = assess_layers(day, pc);
    CHECK(base[1].status == LayerStatus::Candidate);
}
