#include "trajmatch/quality.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "trajmatch/error.hpp"

namespace trajmatch {

double nearest_rank_percentile(std::span<const double> sorted, double p) {
    if (sorted.empty()) throw Error("percentile of an empty set");
    if (p <= 0.0) return sorted.front();
    const double n = static_cast<double>(sorted.size());
    auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * n));
    rank = std::clamp<std::size_t>(rank, 1, sorted.size());
    return sorted[rank - 1];
}

FilterStats compute_stats(std::span<const double> counts) {
    if (counts.empty()) throw Error("compute_stats: empty image set");
    std::vector<double> v(counts.begin(), counts.end());
    std::sort(v.begin(), v.end());
    FilterStats s;
    s.count = v.size();
    s.min = v.front();
    s.max = v.back();
    s.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    s.p25 = nearest_rank_percentile(v, 25);
    s.p50 = nearest_rank_percentile(v, 50);
    s.p75 = nearest_rank_percentile(v, 75);
    return s;
}

FilterStats compute_stats(std::span<const LayerImage> images) {
    std::vector<double> counts;
    counts.reserve(images.size());
    for (const auto& img : images) counts.push_back(static_cast<double>(img.colored_pixel_count));
    return compute_stats(counts);
}

FilterStats compute_stats(std::span<const LayerPair> pairs) {
    std::vector<double> counts;
    counts.reserve(pairs.size() * 2);
    for (const auto& p : pairs) {
        counts.push_back(static_cast<double>(p.a.colored_pixel_count));
        counts.push_back(static_cast<double>(p.b.colored_pixel_count));
    }
    return compute_stats(counts);
}

double default_filter_percentile(int num_layers) { return num_layers == 1 ? 25.0 : 50.0; }

double threshold_from_stats(const FilterStats& stats, double percentile) {
    if (percentile == 25.0) return stats.p25;
    if (percentile == 50.0) return stats.p50;
    if (percentile == 75.0) return stats.p75;
    if (percentile == 0.0) return stats.min;
    if (percentile == 100.0) return stats.max;
    throw ConfigError("filter percentile must be one of 0, 25, 50, 75, 100");
}

bool passes_filter(const LayerPair& pair, double threshold) {
    return static_cast<double>(pair.a.colored_pixel_count) >= threshold &&
           static_cast<double>(pair.b.colored_pixel_count) >= threshold;
}

std::vector<LayerPair> filter_pairs(std::vector<LayerPair> pairs, double threshold) {
    if (threshold < 0) throw Error("filter threshold must be non-negative");
    std::erase_if(pairs, [&](const LayerPair& p) { return !passes_filter(p, threshold); });
    return pairs;
}

nlohmann::json to_json(const FilterStats& s) {
    return {{"count", s.count}, {"min", s.min}, {"mean", s.mean}, {"max", s.max},
            {"p25", s.p25},     {"p50", s.p50}, {"p75", s.p75}};
}

FilterStats filter_stats_from_json(const nlohmann::json& j) {
    FilterStats s;
    s.count = j.value("count", std::size_t{0});
    s.min = j.at("min").get<double>();
    s.mean = j.at("mean").get<double>();
    s.max = j.at("max").get<double>();
    s.p25 = j.at("p25").get<double>();
    s.p50 = j.at("p50").get<double>();
    s.p75 = j.at("p75").get<double>();
    return s;
}

std::vector<double> corpus_pixel_counts(std::span<const PairDay> days, const LayerSpec& spec,
                                        const CanvasSpec& canvas, const RenderOptions& options, bool include_blank) {
    std::vector<double> counts;
    for (const auto& day : days) {
        for (const auto& lp : render_pair_day(day, spec, canvas, options)) {
            for (const LayerImage* img : {&lp.a, &lp.b}) {
                if (include_blank || img->colored_pixel_count > 0) {
                    counts.push_back(static_cast<double>(img->colored_pixel_count));
                }
            }
        }
    }
    return counts;
}

double corpus_filter_threshold(std::span<const PairDay> days, const LayerSpec& spec, const CanvasSpec& canvas,
                               double percentile, const RenderOptions& options) {
    const auto counts = corpus_pixel_counts(days, spec, canvas, options);
    if (counts.empty()) throw Error("corpus has no colored layer images");
    return threshold_from_stats(compute_stats(counts), percentile);
}

}  // namespace trajmatch
