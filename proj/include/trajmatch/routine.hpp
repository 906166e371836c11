#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "trajmatch/raster.hpp"
#include "trajmatch/siamese.hpp"

namespace trajmatch {

struct GeoPoint {
    double lat = 0.0;
    double lon = 0.0;
};

inline constexpr int kNoise = -1;

/// Density clustering with the Euclidean metric on (lat, lon) degrees. A point
/// is core when at least `min_pts` points (itself included) lie within `eps`.
/// Clusters are numbered 0, 1, ... in order of discovery while scanning the
/// input; a border point reachable from several clusters joins the first one
/// discovered. Non-members get kNoise. Throws ConfigError for eps <= 0 or
/// min_pts < 1.
std::vector<int> dbscan(std::span<const GeoPoint> points, double eps, int min_pts);

struct RoutineFilterResult {
    /// Input days with noise samples removed (same order; days may be empty).
    std::vector<DayTrace> days;
    std::size_t retained = 0;
    std::size_t removed = 0;
    std::size_t clusters = 0;
    /// Set when every sample was noise.
    std::string diagnostic;
};

/// Clusters all of one person's samples across days and drops the noise.
/// Throws DataError with fewer than two days.
RoutineFilterResult routine_filter(std::span<const DayTrace> days, double eps, int min_pts);

/// Multi-day layer images for a pair: every day's in-window samples are drawn
/// as one polyline per day, coloured by time of day within the window, on an
/// extent shared by both members.
std::vector<LayerPair> render_routine_layers(std::span<const DayTrace> days_a, std::span<const DayTrace> days_b,
                                             const LayerSpec& spec, const CanvasSpec& canvas,
                                             const RenderOptions& options = {}, const std::string& pair_id = "");

struct RoutineLayer {
    int layer_index = 0;
    TimeWindow window;
    std::size_t pixels_a = 0;
    std::size_t pixels_b = 0;
    std::optional<double> distance;
    bool excluded = false;
    std::string reason;
};

struct RoutineReport {
    std::string pair_id;
    double pixel_threshold = 0.0;
    std::vector<RoutineLayer> layers;
    /// Layer indices of the included layers by ascending distance, ties by index.
    std::vector<int> ranking;
};

struct RankOptions {
    /// Absolute floor on colored pixels per member.
    double min_pixels = 50.0;
    /// If set, the threshold is raised to this percentile of the layer set's
    /// colored-pixel counts.
    std::optional<double> percentile;
};

RoutineReport rank_layers(std::span<const LayerPair> layers, const SiameseModel& model, const RankOptions& options = {});

nlohmann::json to_json(const RoutineReport& r);

/// Bar chart of per-layer distances; excluded layers are drawn as hatched stubs.
std::string routine_svg(const RoutineReport& r);

}  // namespace trajmatch
