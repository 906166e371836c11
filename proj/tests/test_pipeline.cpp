#include <cmath>
#include <limits>

#include "doctest.h"
#include "helpers.hpp"

#include "trajmatch/error.hpp"
#include "trajmatch/pipeline.hpp"
#include "trajmatch/random.hpp"
#include "trajmatch/synth.hpp"

using namespace trajmatch;

namespace {

SiameseModel random_model(std::uint64_t seed, int input = 32) {
    Architecture a;
    a.input_size = input;
    a.conv_channels = {4, 8};
    a.embedding_dim = 8;
    SiameseModel m(a);
    Rng rng(seed);
    m.network().init_uniform_fan_in(rng);
    return m;
}

std::vector<PairDay> small_corpus(std::uint64_t seed) {
    ScenarioConfig c;
    c.num_pairs = 4;
    c.days_per_pair = 5;
    c.seed = seed;
    return generate(c).days;
}

struct OracleDecision {
    bool decision = false;
    std::optional<int> layer;
};

// Scores every candidate layer and takes the earliest one below the threshold.
OracleDecision exhaustive(const PairDay& day, const PipelineConfig& pc, const SiameseModel& m) {
    OracleDecision o;
    for (const auto& a : assess_layers(day, pc)) {
        if (a.status != LayerStatus::Candidate) continue;
        if (m.distance(a.input_a, a.input_b) < m.distance_threshold) {
            o.decision = true;
            o.layer = a.layer_index;
            return o;
        }
    }
    return o;
}

}  // namespace

TEST_CASE("short-circuit classification equals the exhaustive oracle") {
    const auto days = small_corpus(3);
    for (auto variant : kAllVariants) {
        PipelineConfig pc;
        pc.variant = variant;
        pc.layers.num_layers = 5;
        pc.filter_threshold = 20;
        auto model = random_model(static_cast<std::uint64_t>(variant) + 1);
        // Put the threshold at the median layer distance so both outcomes occur.
        std::vector<double> all;
        for (const auto& d : days) {
            for (const auto& s : score_all_layers(d, pc, model)) {
                if (s.distance) all.push_back(*s.distance);
            }
        }
        REQUIRE_FALSE(all.empty());
        std::nth_element(all.begin(), all.begin() + all.size() / 2, all.end());
        model.distance_threshold = all[all.size() / 2];
        for (const auto& d : days) {
            const auto v = classify_day(d, pc, model);
            const auto o = exhaustive(d, pc, model);
            CHECK(v.decision == o.decision);
            CHECK(v.matched_layer == o.layer);
        }
    }
}

TEST_CASE("verdict fields") {
    const auto days = small_corpus(5);
    PipelineConfig pc;
    pc.variant = PipelineVariant::Overlap;
    pc.layers.num_layers = 24;
    auto model = random_model(2);
    model.distance_threshold = 0.0;  // nothing can match
    for (const auto& d : days) {
        StageCounters c;
        const auto v = classify_day(d, pc, model, &c);
        CHECK_FALSE(v.decision);
        CHECK_FALSE(v.matched_layer);
        CHECK(v.layers_examined == 24);
        CHECK(c.images_rendered == 48);
        const auto scores = score_all_layers(d, pc, model);
        double min_d = std::numeric_limits<double>::infinity();
        std::size_t candidates = 0;
        for (const auto& s : scores) {
            if (s.distance) {
                min_d = std::min(min_d, *s.distance);
                ++candidates;
            }
        }
        CHECK(c.network_invocations == candidates);
        if (candidates == 0) {
            CHECK_FALSE(v.distance);
        } else {
            CHECK(*v.distance == min_d);
        }
    }
    const auto j = to_json(classify_day(days[0], pc, model));
    CHECK(j["pair_id"] == days[0].pair_id);
    CHECK(j["decision"] == false);
}

TEST_CASE("prepared days reproduce classify_day") {
    const auto days = small_corpus(8);
    PipelineConfig pc;
    pc.variant = PipelineVariant::EntireMethod;
    pc.layers.num_layers = 5;
    pc.filter_threshold = 10;
    auto model = random_model(4, 32);
    model.distance_threshold = 0.05;
    for (const auto& d : days) {
        const auto p = prepare_day(d, pc, 32);
        CHECK(p.statuses.size() == 5);
        const auto v1 = classify_day(d, pc, model);
        const auto v2 = classify_prepared(p, model);
        CHECK(v1.decision == v2.decision);
        CHECK(v1.matched_layer == v2.matched_layer);
        CHECK(v1.distance == v2.distance);
        CHECK(v1.layers_examined == v2.layers_examined);
        const double md = min_candidate_distance(p, model);
        CHECK((md < model.distance_threshold) == v2.decision);
    }
}

TEST_CASE("parallel classification is order independent") {
    const auto days = small_corpus(9);
    PipelineConfig pc;
    pc.variant = PipelineVariant::OverlapCrop;
    pc.layers.num_layers = 5;
    auto model = random_model(6);
    model.distance_threshold = 0.1;
    StageCounters c1, c4;
    const auto serial = classify_days(days, pc, model, 1, &c1);
    const auto parallel = classify_days(days, pc, model, 4, &c4);
    REQUIRE(serial.size() == parallel.size());
    for (std::size_t i = 0; i < serial.size(); ++i) {
        CHECK(serial[i].decision == parallel[i].decision);
        CHECK(serial[i].distance == parallel[i].distance);
    }
    CHECK(c1.network_invocations == c4.network_invocations);
    CHECK(c1.images_rendered == c4.images_rendered);
}

TEST_CASE("model context drives the pipeline configuration") {
    auto model = random_model(1);
    model.context.variant = PipelineVariant::OverlapFilter;
    model.context.num_layers = 48;
    model.context.filter_threshold = 7.0;
    model.context.crop_pad = 3;
    const auto pc = config_from_model(model);
    CHECK(pc.variant == PipelineVariant::OverlapFilter);
    CHECK(pc.layers.num_layers == 48);
    CHECK(pc.filter_threshold == std::optional<double>(7.0));
    CHECK(pc.crop_pad == 3);
}

TEST_CASE("disjoint corpus is negative without network calls") {
    ScenarioConfig c;
    c.num_pairs = 3;
    c.days_per_pair = 4;
    c.co_walk_probability = 0;
    c.disjoint_homes = true;
    const auto days = generate(c).days;
    PipelineConfig pc;
    pc.variant = PipelineVariant::Overlap;
    pc.layers.num_layers = 24;
    auto model = random_model(3);
    model.distance_threshold = 1e9;  // would accept anything that reached the network
    StageCounters counters;
    for (const auto& v : classify_days(days, pc, model, 1, &counters)) CHECK_FALSE(v.decision);
    CHECK(counters.network_invocations == 0);
    CHECK(counters.overlap_checks > 0);
}
