#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "trajmatch/ingest.hpp"
#include "trajmatch/types.hpp"

namespace trajmatch {

/// Times are minutes after local midnight.
struct ScenarioConfig {
    int num_pairs = 50;
    int days_per_pair = 10;
    double co_walk_probability = 0.35;
    /// Co-walk start is uniform in [earliest, latest].
    int co_walk_earliest_start = 9 * 60;
    int co_walk_latest_start = 19 * 60;
    int co_walk_min_duration = 30;
    int co_walk_max_duration = 50;
    double walking_speed_mps = 1.4;
    double gps_noise_std_m = 5.0;
    int sample_period_s = 60;
    double dropout_probability = 0.1;
    /// Share of negative days on which both walk a shared route at shifted times.
    double hard_negative_probability = 0.5;
    int hard_negative_min_shift = 20;
    int hard_negative_max_shift = 180;
    int solo_walks_min = 1;
    int solo_walks_max = 2;
    int solo_min_duration = 20;
    int solo_max_duration = 40;
    int activity_start = 7 * 60;
    int activity_end = 23 * 60;
    int routes_per_person = 2;
    int shared_routes = 2;
    double home_separation_min_m = 400.0;
    double home_separation_max_m = 900.0;
    /// Homes far apart and no shared-route walks; no spatial contact at all.
    bool disjoint_homes = false;
    double disjoint_separation_m = 5000.0;
    /// Stationary fixes at home when not walking.
    bool home_fixes = true;
    int home_fix_period = 30;
    double center_lat = 40.4433;
    double center_lon = -79.9436;
    double region_radius_m = 3000.0;
    int tz_offset_minutes = -240;
    std::string start_date = "2024-03-04";
    std::uint64_t seed = 7;

    /// Throws ConfigError on out-of-range values or an infeasible window.
    void validate() const;
};

nlohmann::json to_json(const ScenarioConfig& c);
/// Missing keys keep their defaults; unknown keys are rejected.
ScenarioConfig scenario_config_from_json(const nlohmann::json& j);

/// Ground truth for one generated day. Times are local ms after midnight.
struct GroundTruth {
    std::string pair_id;
    LocalDate local_date;
    bool label = false;
    std::optional<std::int64_t> co_walk_start_ms;
    std::optional<std::int64_t> co_walk_end_ms;
    bool hard_negative = false;
};

nlohmann::json to_json(const GroundTruth& t);

struct Scenario {
    std::vector<PairDay> days;     // sorted by (pair, date)
    std::vector<GroundTruth> truth;  // aligned with days
    std::vector<RosterEntry> roster;
};

Scenario generate(const ScenarioConfig& config);

/// Writes pairdays.ndjson, truth.ndjson, locations.csv, roster.csv,
/// labels.csv and scenario.json into `dir` (created if needed).
void write_scenario(const std::filesystem::path& dir, const Scenario& scenario, const ScenarioConfig& config);

/// A single pair observed over many days for routine analysis: each person
/// repeats a personal walk in every active layer except one, where the two
/// walk a shared route together.
struct RoutineScenarioConfig {
    int days = 20;
    int num_layers = 5;
    /// 1-based layer holding the co-walk.
    int co_walk_layer = 4;
    /// Layers (1-based) with a personal routine walk; the co-walk layer is
    /// skipped if listed.
    std::vector<int> active_layers{2, 3, 4, 5};
    int walk_duration = 40;
    /// Daily start jitter (minutes, uniform +-).
    int start_jitter = 20;
    double walking_speed_mps = 1.4;
    double gps_noise_std_m = 4.0;
    int sample_period_s = 15;
    double dropout_probability = 0.1;
    /// Chance per person and day of one extra walk on a random one-off route.
    double anomaly_probability = 0.15;
    double home_separation_m = 700.0;
    double center_lat = 40.4433;
    double center_lon = -79.9436;
    int tz_offset_minutes = -240;
    std::string start_date = "2024-03-04";
    std::string pair_id = "R1";
    std::uint64_t seed = 7;

    void validate() const;
};

struct RoutineScenario {
    std::string pair_id;
    std::vector<DayTrace> days_a;
    std::vector<DayTrace> days_b;
    int co_walk_layer = 0;
};

RoutineScenario generate_routine_pair(const RoutineScenarioConfig& config);

}  // namespace trajmatch
