#include "trajmatch/pipeline.hpp"

#include <chrono>
#include <limits>

#include "trajmatch/error.hpp"
#include "trajmatch/parallel.hpp"
#include "trajmatch/timeutil.hpp"

namespace trajmatch {

nlohmann::json to_json(const Verdict& v) {
    nlohmann::json j;
    j["pair_id"] = v.pair_id;
    j["local_date"] = format_date(v.local_date);
    j["decision"] = v.decision;
    j["matched_layer"] = v.matched_layer ? nlohmann::json(*v.matched_layer) : nlohmann::json(nullptr);
    j["distance"] = v.distance ? nlohmann::json(*v.distance) : nlohmann::json(nullptr);
    j["layers_examined"] = v.layers_examined;
    return j;
}

PipelineConfig config_from_model(const SiameseModel& model) {
    PipelineConfig c;
    c.variant = model.context.variant;
    c.layers.num_layers = model.context.num_layers;
    c.canvas = model.context.canvas;
    c.filter_threshold = model.context.filter_threshold;
    c.crop_pad = model.context.crop_pad;
    return c;
}

Verdict classify_day(const PairDay& day, const PipelineConfig& config, const SiameseModel& model,
                     StageCounters* counters) {
    const auto assessed = assess_layers(day, config, counters);
    Verdict v;
    v.pair_id = day.pair_id;
    v.local_date = day.local_date;
    for (const auto& a : assessed) {
        if (a.status == LayerStatus::Filtered) continue;
        ++v.layers_examined;
        if (a.status != LayerStatus::Candidate) continue;
        if (counters) ++counters->network_invocations;
        const double d = model.distance(a.input_a, a.input_b);
        if (!v.distance || d < *v.distance) v.distance = d;
        if (model.similar(d)) {
            v.decision = true;
            v.matched_layer = a.layer_index;
            v.distance = d;
            break;
        }
    }
    return v;
}

std::vector<LayerScore> score_all_layers(const PairDay& day, const PipelineConfig& config, const SiameseModel& model,
                                         StageCounters* counters) {
    const auto assessed = assess_layers(day, config, counters);
    std::vector<LayerScore> out;
    out.reserve(assessed.size());
    for (const auto& a : assessed) {
        LayerScore s{a.layer_index, a.status, std::nullopt, a.pixels_a, a.pixels_b};
        if (a.status == LayerStatus::Candidate) {
            if (counters) ++counters->network_invocations;
            s.distance = model.distance(a.input_a, a.input_b);
        }
        out.push_back(s);
    }
    return out;
}

PreparedDay prepare_day(const PairDay& day, const PipelineConfig& config, int input_size) {
    const auto t0 = std::chrono::steady_clock::now();
    PreparedDay p;
    p.pair_id = day.pair_id;
    p.local_date = day.local_date;
    p.label = day.label;
    const auto assessed = assess_layers(day, config, &p.counters);
    for (const auto& a : assessed) {
        p.statuses.push_back(a.status);
        if (a.status != LayerStatus::Candidate) continue;
        p.candidates.push_back({a.layer_index, resample_nearest_colored(a.input_a, input_size, input_size),
                                resample_nearest_colored(a.input_b, input_size, input_size)});
    }
    p.prepare_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return p;
}

Verdict classify_prepared(const PreparedDay& day, const SiameseModel& model, StageCounters* counters) {
    Verdict v;
    v.pair_id = day.pair_id;
    v.local_date = day.local_date;
    std::size_t next = 0;
    for (std::size_t i = 0; i < day.statuses.size(); ++i) {
        const LayerStatus st = day.statuses[i];
        if (st == LayerStatus::Filtered) continue;
        ++v.layers_examined;
        if (st != LayerStatus::Candidate) continue;
        const auto& c = day.candidates[next++];
        if (counters) ++counters->network_invocations;
        const double d = model.distance(c.a, c.b);
        if (!v.distance || d < *v.distance) v.distance = d;
        if (model.similar(d)) {
            v.decision = true;
            v.matched_layer = c.layer_index;
            v.distance = d;
            break;
        }
    }
    return v;
}

double min_candidate_distance(const PreparedDay& day, const SiameseModel& model) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& c : day.candidates) best = std::min(best, model.distance(c.a, c.b));
    return best;
}

std::vector<TrainingPair> training_pairs_from(std::span<const PreparedDay* const> days) {
    std::vector<TrainingPair> out;
    for (const PreparedDay* d : days) {
        if (!d->label) throw TrainingError("training day " + d->pair_id + " is unlabeled");
        for (const auto& c : d->candidates) {
            TrainingPair tp;
            tp.image_a = c.a;
            tp.image_b = c.b;
            tp.y = *d->label ? 0 : 1;
            tp.pair_id = d->pair_id;
            tp.local_date = d->local_date;
            tp.layer_index = c.layer_index;
            out.push_back(std::move(tp));
        }
    }
    return out;
}

double calibrate_threshold(SiameseModel& model, std::span<const PreparedDay* const> days) {
    std::vector<double> scores;
    std::vector<bool> labels;
    for (const PreparedDay* d : days) {
        if (!d->label) continue;
        scores.push_back(min_candidate_distance(*d, model));
        labels.push_back(*d->label);
    }
    model.distance_threshold = select_threshold(scores, labels);
    model.calibrated = true;
    return model.distance_threshold;
}

std::vector<Verdict> classify_days(std::span<const PairDay> days, const PipelineConfig& config,
                                   const SiameseModel& model, int workers, StageCounters* counters) {
    std::vector<Verdict> out(days.size());
    std::vector<StageCounters> per_day(days.size());
    parallel_for(days.size(), workers, [&](std::size_t i) { out[i] = classify_day(days[i], config, model, &per_day[i]); });
    if (counters) {
        for (const auto& c : per_day) *counters += c;
    }
    return out;
}

}  // namespace trajmatch
