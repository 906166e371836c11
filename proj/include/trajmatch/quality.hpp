#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "trajmatch/raster.hpp"

namespace trajmatch {

/// Colored-pixel statistics over a set of layer images.
struct FilterStats {
    double min = 0;
    double mean = 0;
    double max = 0;
    double p25 = 0;
    double p50 = 0;
    double p75 = 0;
    std::size_t count = 0;
};

/// Nearest-rank percentile: the ceil(p/100 * n)-th smallest value (the
/// minimum for p = 0). `sorted` must be ascending and non-empty.
double nearest_rank_percentile(std::span<const double> sorted, double p);

/// Throws Error on an empty set.
FilterStats compute_stats(std::span<const double> counts);
FilterStats compute_stats(std::span<const LayerImage> images);
/// Statistics over every image of every pair (both members).
FilterStats compute_stats(std::span<const LayerPair> pairs);

/// Default filtering percentile for a layer count: 25 for one layer, 50 otherwise.
double default_filter_percentile(int num_layers);
double threshold_from_stats(const FilterStats& stats, double percentile);

/// True iff both members reach the threshold; a layer dropped for one member is
/// dropped for both.
bool passes_filter(const LayerPair& pair, double threshold);
std::vector<LayerPair> filter_pairs(std::vector<LayerPair> pairs, double threshold);

/// Colored-pixel counts of every layer image (both members) of a corpus.
/// Blank images are skipped unless `include_blank`.
std::vector<double> corpus_pixel_counts(std::span<const PairDay> days, const LayerSpec& spec,
                                        const CanvasSpec& canvas, const RenderOptions& options = {},
                                        bool include_blank = false);

/// Threshold at `percentile` of the corpus' non-blank image counts. Throws
/// Error when the corpus renders no colored pixel at all.
double corpus_filter_threshold(std::span<const PairDay> days, const LayerSpec& spec, const CanvasSpec& canvas,
                               double percentile, const RenderOptions& options = {});

nlohmann::json to_json(const FilterStats& stats);
FilterStats filter_stats_from_json(const nlohmann::json& j);

}  // namespace trajmatch
