#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "trajmatch/pipeline.hpp"
#include "trajmatch/siamese.hpp"
#include "trajmatch/stages.hpp"

namespace trajmatch {

struct ConfusionCounts {
    std::uint64_t tp = 0;
    std::uint64_t fp = 0;
    std::uint64_t tn = 0;
    std::uint64_t fn = 0;

    std::uint64_t total() const { return tp + fp + tn + fn; }
    void add(bool predicted, bool actual);
    ConfusionCounts& operator+=(const ConfusionCounts& o);
    friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

ConfusionCounts confusion(const std::vector<bool>& predicted, const std::vector<bool>& actual);

/// Positive-class metrics. A zero denominator yields 0 (precision, recall,
/// F1 and MCC alike).
struct Metrics {
    double precision = 0.0;
    double recall = 0.0;
    double accuracy = 0.0;
    double f1 = 0.0;
    double mcc = 0.0;
    double exec_time_seconds = 0.0;
};

/// Throws Error when the counts are all zero.
Metrics compute_metrics(const ConfusionCounts& c);

/// Support-weighted average of the positive- and negative-class metrics.
/// Accuracy and MCC are class-symmetric and equal the positive-class values.
Metrics weighted_metrics(const ConfusionCounts& c);

/// Element-wise mean of metric rows.
Metrics mean_metrics(std::span<const Metrics> rows);

nlohmann::json to_json(const ConfusionCounts& c);
nlohmann::json to_json(const Metrics& m);

/// Stratified k-fold assignment: fold index in [0, k) per instance. Each class
/// is shuffled with `seed` and dealt round-robin, so fold sizes differ by at
/// most one per class. Throws ConfigError if k < 2 or k exceeds the count.
std::vector<int> make_folds(const std::vector<bool>& labels, int k, std::uint64_t seed);

/// Stratified holdout of roughly `fraction` of the given indices (at least one
/// per class present when possible). Returns {kept, held_out}.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> stratified_holdout(std::span<const std::size_t> indices,
                                                                                  const std::vector<bool>& labels,
                                                                                  double fraction,
                                                                                  std::uint64_t seed);

struct CrossValidationConfig {
    int folds = 5;
    std::uint64_t seed = 7;
    /// Share of each fold's training days kept aside to pick the threshold.
    double calibration_fraction = 0.15;
    Architecture architecture;
    ContrastiveParams contrastive;
    OptimizerConfig optimizer;
    int workers = 1;
};

struct FoldResult {
    int fold = 0;
    ConfusionCounts counts;
    Metrics metrics;
    Metrics weighted;
    double threshold = 0.0;
    std::size_t training_pairs = 0;
    std::size_t training_days = 0;
    std::size_t calibration_days = 0;
    std::size_t validation_days = 0;
    std::vector<double> epoch_losses;
    double train_seconds = 0.0;
    double classify_seconds = 0.0;
};

struct CrossValidationResult {
    std::vector<FoldResult> folds;
    /// Fold means.
    Metrics metrics;
    Metrics weighted;
    /// Sum over folds.
    ConfusionCounts pooled;
    /// One per input day, in input order.
    std::vector<Verdict> verdicts;
    StageCounters counters;
    /// Mean seconds per day: preparation plus classification.
    double seconds_per_day = 0.0;
};

/// Trains one model per fold on the other folds' days (minus a calibration
/// split used for the threshold) and classifies the held-out fold. Every day
/// must be labelled.
CrossValidationResult cross_validate(std::span<const PreparedDay> days, const CrossValidationConfig& config,
                                     const ModelContext& context);

nlohmann::json to_json(const CrossValidationResult& r);

/// Prepares every day (parallel over `workers`).
std::vector<PreparedDay> prepare_days(std::span<const PairDay> days, const PipelineConfig& config, int input_size,
                                      int workers);

struct AblationRow {
    PipelineVariant variant = PipelineVariant::Baseline;
    int num_layers = 1;
    bool skipped = false;
    std::string diagnostic;
    std::string source;  // "model" or "cross-validation"
    std::optional<double> filter_threshold;
    Metrics metrics;
    Metrics weighted;
    ConfusionCounts counts;
    StageCounters counters;
    /// Wall clock over rendering, stage steps and classification for all days.
    double exec_time_seconds = 0.0;
    /// Part of exec_time_seconds spent rendering and in the geometric stages.
    double prepare_seconds = 0.0;
};

struct AblationConfig {
    std::vector<int> layer_counts{1, 5, 24, 48};
    std::vector<PipelineVariant> variants{std::begin(kAllVariants), std::end(kAllVariants)};
    CanvasSpec canvas;
    RenderOptions render;
    /// Overrides the per-layer-count default filtering percentile.
    std::optional<double> filter_percentile;
    int crop_pad = 2;
    /// Train by cross-validation when no model is supplied for a row.
    bool train_missing = false;
    CrossValidationConfig cv;
    int workers = 1;
};

/// Supplies a trained model for (variant, layers), or nothing.
using ModelLookup = std::function<std::optional<SiameseModel>(PipelineVariant, int)>;

/// One row per (variant, layer count). Rows without a model are trained by
/// cross-validation when enabled, otherwise skipped with a diagnostic.
std::vector<AblationRow> run_ablation(std::span<const PairDay> days, const AblationConfig& config,
                                      const ModelLookup& lookup);

nlohmann::json to_json(const AblationRow& row);
/// Fixed-width text table of the rows.
std::string format_ablation_table(std::span<const AblationRow> rows);

}  // namespace trajmatch
