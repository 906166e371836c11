#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "trajmatch/siamese.hpp"
#include "trajmatch/stages.hpp"

namespace trajmatch {

/// Day-level decision. `matched_layer` is the first layer judged similar;
/// `distance` is that layer's distance, or the smallest distance seen when no
/// layer matched. `layers_examined` counts layers that survived filtering and
/// were visited before the decision.
struct Verdict {
    std::string pair_id;
    LocalDate local_date;
    bool decision = false;
    std::optional<int> matched_layer;
    std::optional<double> distance;
    int layers_examined = 0;
};

nlohmann::json to_json(const Verdict& v);

/// Pipeline settings implied by a model's training context.
PipelineConfig config_from_model(const SiameseModel& model);

/// Layers in ascending order; stops at the first candidate whose distance is
/// below the model threshold.
Verdict classify_day(const PairDay& day, const PipelineConfig& config, const SiameseModel& model,
                     StageCounters* counters = nullptr);

struct LayerScore {
    int layer_index = 0;
    LayerStatus status = LayerStatus::Candidate;
    std::optional<double> distance;  // candidates only
    std::size_t pixels_a = 0;
    std::size_t pixels_b = 0;
};

/// Exhaustive mode: scores every candidate layer without short-circuiting.
std::vector<LayerScore> score_all_layers(const PairDay& day, const PipelineConfig& config, const SiameseModel& model,
                                         StageCounters* counters = nullptr);

/// A day after the geometric stages, with candidate images already resampled
/// to the network input size. Lets cross-validation evaluate many models
/// without re-rendering.
struct PreparedDay {
    std::string pair_id;
    LocalDate local_date;
    std::optional<bool> label;
    std::vector<LayerStatus> statuses;  // one per layer, in order
    struct Candidate {
        int layer_index = 0;
        RgbImage a;
        RgbImage b;
    };
    std::vector<Candidate> candidates;  // in layer order
    StageCounters counters;
    double prepare_seconds = 0.0;
};

PreparedDay prepare_day(const PairDay& day, const PipelineConfig& config, int input_size);
Verdict classify_prepared(const PreparedDay& day, const SiameseModel& model, StageCounters* counters = nullptr);
/// Smallest candidate distance, +infinity without candidates. The day is
/// positive under threshold t iff this is < t.
double min_candidate_distance(const PreparedDay& day, const SiameseModel& model);

/// Training pairs from prepared days (same construction as build_training_pairs).
std::vector<TrainingPair> training_pairs_from(std::span<const PreparedDay* const> days);

/// Day-level threshold calibration: maximises F1 of the day decisions.
double calibrate_threshold(SiameseModel& model, std::span<const PreparedDay* const> days);

std::vector<Verdict> classify_days(std::span<const PairDay> days, const PipelineConfig& config,
                                   const SiameseModel& model, int workers, StageCounters* counters = nullptr);

}  // namespace trajmatch
