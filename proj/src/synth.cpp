#include "trajmatch/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "trajmatch/error.hpp"
#include "trajmatch/random.hpp"
#include "trajmatch/records.hpp"
#include "trajmatch/timeutil.hpp"

namespace trajmatch {

namespace {

constexpr double kEarthRadiusM = 6'371'000.0;
constexpr std::int64_t kMsPerMinute = kMillisPerMinute;

struct Vec2 {
    double x = 0.0;  // east, m
    double y = 0.0;  // north, m
};

Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
Vec2 operator*(Vec2 a, double s) { return {a.x * s, a.y * s}; }
double norm(Vec2 a) { return std::hypot(a.x, a.y); }

Vec2 polar(double r, double angle) { return {r * std::cos(angle), r * std::sin(angle)}; }

/// Local tangent plane around an origin.
struct Frame {
    double lat0 = 0.0;
    double lon0 = 0.0;

    double to_lat(double north) const { return lat0 + north / kEarthRadiusM * 180.0 / M_PI; }
    double to_lon(double east) const {
        return lon0 + east / (kEarthRadiusM * std::cos(lat0 * M_PI / 180.0)) * 180.0 / M_PI;
    }
};

struct Route {
    std::vector<Vec2> points;
    std::vector<double> cumulative;  // arc length at each point

    double length() const { return cumulative.empty() ? 0.0 : cumulative.back(); }

    /// Position at arc length s, walking back and forth along the polyline.
    Vec2 at(double s) const {
        const double len = length();
        if (len <= 0.0) return points.front();
        double u = std::fmod(s, 2.0 * len);
        if (u > len) u = 2.0 * len - u;
        const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
        const std::size_t i = std::min<std::size_t>(static_cast<std::size_t>(it - cumulative.begin()), points.size() - 1);
        if (i == 0) return points.front();
        const double seg = cumulative[i] - cumulative[i - 1];
        const double f = seg > 0 ? (u - cumulative[i - 1]) / seg : 0.0;
        return points[i - 1] + (points[i] - points[i - 1]) * f;
    }
};

Route make_route(Rng& rng, Vec2 start, int min_legs, int max_legs, double min_leg, double max_leg) {
    Route r;
    r.points.push_back(start);
    r.cumulative.push_back(0.0);
    double heading = rng.uniform(0.0, 2.0 * M_PI);
    const int legs = rng.uniform_int(min_legs, max_legs);
    for (int i = 0; i < legs; ++i) {
        heading += rng.uniform(-M_PI / 3.0, M_PI / 3.0);
        const Vec2 next = r.points.back() + polar(rng.uniform(min_leg, max_leg), heading);
        r.cumulative.push_back(r.cumulative.back() + norm(next - r.points.back()));
        r.points.push_back(next);
    }
    return r;
}

struct Interval {
    std::int64_t start_ms = 0;
    std::int64_t end_ms = 0;
};

bool overlaps_any(const std::vector<Interval>& busy, Interval iv, std::int64_t gap_ms) {
    for (const auto& b : busy) {
        if (iv.start_ms < b.end_ms + gap_ms && b.start_ms < iv.end_ms + gap_ms) return true;
    }
    return false;
}

/// Emits samples for a person; local time of day in ms.
class TraceWriter {
public:
    TraceWriter(const Frame& frame, LocalDate date, std::string device, int tz, double noise_m, double dropout)
        : frame_(frame), date_(date), device_(std::move(device)), tz_(tz), noise_m_(noise_m), dropout_(dropout) {}

    void fix(Rng& rng, std::int64_t tod_ms, Vec2 p) {
        // Both draws happen unconditionally so the stream does not depend on dropout.
        const double nx = rng.normal() * noise_m_;
        const double ny = rng.normal() * noise_m_;
        if (rng.bernoulli(dropout_)) return;
        LocationSample s;
        s.device_id = device_;
        s.tz_offset_minutes = tz_;
        s.timestamp_utc_ms = static_cast<std::int64_t>(date_.days_since_epoch) * kMillisPerDay + tod_ms -
                             static_cast<std::int64_t>(tz_) * kMsPerMinute;
        s.lat = frame_.to_lat(p.y + ny);
        s.lon = frame_.to_lon(p.x + nx);
        samples_.push_back(std::move(s));
    }

    void walk(Rng& rng, const Route& route, Interval iv, double speed, int period_s, double phase_m = 0.0) {
        const std::int64_t step = static_cast<std::int64_t>(period_s) * 1000;
        for (std::int64_t t = iv.start_ms; t <= iv.end_ms; t += step) {
            const double s = phase_m + speed * static_cast<double>(t - iv.start_ms) / 1000.0;
            fix(rng, t, route.at(s));
        }
    }

    DayTrace finish() {
        std::stable_sort(samples_.begin(), samples_.end(), [](const LocationSample& a, const LocationSample& b) {
            return a.timestamp_utc_ms < b.timestamp_utc_ms;
        });
        DayTrace d;
        d.device_id = device_;
        d.local_date = date_;
        d.samples = std::move(samples_);
        return d;
    }

private:
    Frame frame_;
    LocalDate date_;
    std::string device_;
    int tz_;
    double noise_m_;
    double dropout_;
    std::vector<LocationSample> samples_;
};

std::int64_t minutes(double m) { return static_cast<std::int64_t>(std::llround(m * 60.0)) * 1000; }

void check(bool ok, const char* what) {
    if (!ok) throw ConfigError(std::string("scenario: ") + what);
}

}  // namespace

void ScenarioConfig::validate() const {
    check(num_pairs > 0 && days_per_pair > 0, "pair and day counts must be positive");
    for (double p : {co_walk_probability, dropout_probability, hard_negative_probability}) {
        check(p >= 0.0 && p <= 1.0, "probabilities must lie in [0, 1]");
    }
    check(co_walk_min_duration > 0 && co_walk_min_duration <= co_walk_max_duration, "bad co-walk duration range");
    check(co_walk_earliest_start >= 0 && co_walk_earliest_start <= co_walk_latest_start, "bad co-walk start range");
    check(co_walk_latest_start + co_walk_max_duration < 24 * 60, "co-walk window does not fit within the day");
    check(walking_speed_mps > 0 && sample_period_s > 0 && gps_noise_std_m >= 0, "bad movement parameters");
    check(hard_negative_min_shift >= 0 && hard_negative_min_shift <= hard_negative_max_shift, "bad shift range");
    check(solo_walks_min >= 0 && solo_walks_min <= solo_walks_max, "bad solo walk count range");
    check(solo_min_duration > 0 && solo_min_duration <= solo_max_duration, "bad solo duration range");
    check(activity_start >= 0 && activity_start < activity_end && activity_end <= 24 * 60, "bad activity window");
    check(activity_end - activity_start > solo_max_duration, "activity window shorter than a solo walk");
    check(routes_per_person > 0 && shared_routes > 0, "route counts must be positive");
    check(home_separation_min_m >= 0 && home_separation_min_m <= home_separation_max_m, "bad home separation");
    check(home_fix_period > 0, "home fix period must be positive");
    check(valid_coordinate(center_lat, center_lon), "invalid region centre");
    check(parse_date(start_date).has_value(), "start_date must be YYYY-MM-DD");
}

#define TRAJMATCH_SCENARIO_FIELDS(X)                                                                         \
    X(num_pairs) X(days_per_pair) X(co_walk_probability) X(co_walk_earliest_start) X(co_walk_latest_start)    \
    X(co_walk_min_duration) X(co_walk_max_duration) X(walking_speed_mps) X(gps_noise_std_m) X(sample_period_s) \
    X(dropout_probability) X(hard_negative_probability) X(hard_negative_min_shift) X(hard_negative_max_shift) \
    X(solo_walks_min) X(solo_walks_max) X(solo_min_duration) X(solo_max_duration) X(activity_start)          \
    X(activity_end) X(routes_per_person) X(shared_routes) X(home_separation_min_m) X(home_separation_max_m)   \
    X(disjoint_homes) X(disjoint_separation_m) X(home_fixes) X(home_fix_period) X(center_lat) X(center_lon)    \
    X(region_radius_m) X(tz_offset_minutes) X(start_date) X(seed)

nlohmann::json to_json(const ScenarioConfig& c) {
    nlohmann::json j;
#define X(f) j[#f] = c.f;
    TRAJMATCH_SCENARIO_FIELDS(X)
#undef X
    return j;
}

ScenarioConfig scenario_config_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("scenario config must be a JSON object");
    ScenarioConfig c;
    for (const auto& [key, value] : j.items()) {
        bool known = false;
        try {
#define X(f)                      \
    if (key == #f) {              \
        value.get_to(c.f);        \
        known = true;             \
    }
            TRAJMATCH_SCENARIO_FIELDS(X)
#undef X
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("scenario config field '" + key + "': " + e.what());
        }
        if (!known) throw ConfigError("unknown scenario config field '" + key + "'");
    }
    return c;
}

nlohmann::json to_json(const GroundTruth& t) {
    nlohmann::json j;
    j["pair_id"] = t.pair_id;
    j["local_date"] = format_date(t.local_date);
    j["label"] = t.label;
    j["hard_negative"] = t.hard_negative;
    if (t.co_walk_start_ms) {
        j["co_walk"] = {{"start", format_time_of_day(*t.co_walk_start_ms)},
                        {"end", format_time_of_day(*t.co_walk_end_ms)},
                        {"start_ms", *t.co_walk_start_ms},
                        {"end_ms", *t.co_walk_end_ms}};
    } else {
        j["co_walk"] = nullptr;
    }
    return j;
}

Scenario generate(const ScenarioConfig& config) {
    config.validate();
    const LocalDate first = *parse_date(config.start_date);
    Scenario out;
    for (int p = 0; p < config.num_pairs; ++p) {
        Rng rng(derive_seed(config.seed, static_cast<std::uint64_t>(p)));
        const std::string pair_id = "P" + std::to_string(p + 1);
        const std::string dev_a = pair_id + "-a";
        const std::string dev_b = pair_id + "-b";
        out.roster.push_back({dev_a, pair_id});
        out.roster.push_back({dev_b, pair_id});

        const Vec2 centre_offset = polar(config.region_radius_m * std::sqrt(rng.uniform()), rng.uniform(0, 2 * M_PI));
        const Frame frame{Frame{config.center_lat, config.center_lon}.to_lat(centre_offset.y),
                          Frame{config.center_lat, config.center_lon}.to_lon(centre_offset.x)};
        const double separation = config.disjoint_homes
                                      ? config.disjoint_separation_m
                                      : rng.uniform(config.home_separation_min_m, config.home_separation_max_m);
        const double axis = rng.uniform(0, 2 * M_PI);
        const Vec2 home_a = polar(separation / 2, axis);
        const Vec2 home_b = polar(-separation / 2, axis);

        std::vector<Route> shared;
        for (int i = 0; i < config.shared_routes; ++i) {
            shared.push_back(make_route(rng, polar(rng.uniform(0, 100), rng.uniform(0, 2 * M_PI)), 4, 6, 150, 350));
        }
        std::vector<Route> routes_a, routes_b;
        for (int i = 0; i < config.routes_per_person; ++i) {
            routes_a.push_back(make_route(rng, home_a, 3, 5, 120, 300));
            routes_b.push_back(make_route(rng, home_b, 3, 5, 120, 300));
        }

        for (int d = 0; d < config.days_per_pair; ++d) {
            const LocalDate date{first.days_since_epoch + d};
            TraceWriter wa(frame, date, dev_a, config.tz_offset_minutes, config.gps_noise_std_m,
                           config.dropout_probability);
            TraceWriter wb(frame, date, dev_b, config.tz_offset_minutes, config.gps_noise_std_m,
                           config.dropout_probability);
            std::vector<Interval> busy_a, busy_b;
            GroundTruth truth;
            truth.pair_id = pair_id;
            truth.local_date = date;
            truth.label = rng.bernoulli(config.co_walk_probability);

            if (truth.label) {
                const double start = rng.uniform(config.co_walk_earliest_start, config.co_walk_latest_start);
                const double duration = rng.uniform(config.co_walk_min_duration, config.co_walk_max_duration);
                const Interval iv{minutes(start), minutes(start + duration)};
                const Route& route = shared[rng.below(shared.size())];
                const double phase = rng.uniform(0.0, route.length());
                wa.walk(rng, route, iv, config.walking_speed_mps, config.sample_period_s, phase);
                wb.walk(rng, route, iv, config.walking_speed_mps, config.sample_period_s, phase);
                busy_a.push_back(iv);
                busy_b.push_back(iv);
                truth.co_walk_start_ms = iv.start_ms;
                truth.co_walk_end_ms = iv.end_ms;
            } else if (!config.disjoint_homes && rng.bernoulli(config.hard_negative_probability)) {
                truth.hard_negative = true;
                const double duration = rng.uniform(config.co_walk_min_duration, config.co_walk_max_duration);
                const double shift = rng.uniform(config.hard_negative_min_shift, config.hard_negative_max_shift);
                const double lo = config.activity_start;
                const double hi = config.activity_end - duration - shift;
                const double start = hi > lo ? rng.uniform(lo, hi) : lo;
                const Route& route = shared[rng.below(shared.size())];
                const double phase = rng.uniform(0.0, route.length());
                Interval first_iv{minutes(start), minutes(start + duration)};
                Interval second_iv{minutes(start + shift), minutes(start + shift + duration)};
                if (rng.bernoulli(0.5)) std::swap(first_iv, second_iv);
                wa.walk(rng, route, first_iv, config.walking_speed_mps, config.sample_period_s, phase);
                wb.walk(rng, route, second_iv, config.walking_speed_mps, config.sample_period_s, phase);
                busy_a.push_back(first_iv);
                busy_b.push_back(second_iv);
            }

            auto solo = [&](TraceWriter& w, std::vector<Interval>& busy, const std::vector<Route>& routes) {
                const int count = rng.uniform_int(config.solo_walks_min, config.solo_walks_max);
                for (int k = 0; k < count; ++k) {
                    for (int attempt = 0; attempt < 20; ++attempt) {
                        const double duration = rng.uniform(config.solo_min_duration, config.solo_max_duration);
                        const double start = rng.uniform(config.activity_start, config.activity_end - duration);
                        const Interval iv{minutes(start), minutes(start + duration)};
                        if (overlaps_any(busy, iv, 10 * kMsPerMinute)) continue;
                        const Route& route = routes[rng.below(routes.size())];
                        w.walk(rng, route, iv, config.walking_speed_mps, config.sample_period_s);
                        busy.push_back(iv);
                        break;
                    }
                }
            };
            solo(wa, busy_a, routes_a);
            solo(wb, busy_b, routes_b);

            if (config.home_fixes) {
                const std::int64_t step = static_cast<std::int64_t>(config.home_fix_period) * kMsPerMinute;
                for (std::int64_t t = minutes(config.activity_start); t <= minutes(config.activity_end); t += step) {
                    if (!overlaps_any(busy_a, {t, t}, 0)) wa.fix(rng, t, home_a);
                    if (!overlaps_any(busy_b, {t, t}, 0)) wb.fix(rng, t, home_b);
                }
            }

            PairDay day;
            day.pair_id = pair_id;
            day.local_date = date;
            day.trace_a = wa.finish();
            day.trace_b = wb.finish();
            day.label = truth.label;
            out.days.push_back(std::move(day));
            out.truth.push_back(std::move(truth));
        }
    }
    return out;
}

void write_scenario(const std::filesystem::path& dir, const Scenario& scenario, const ScenarioConfig& config) {
    std::filesystem::create_directories(dir);
    auto open = [&](const char* name) {
        std::ofstream f(dir / name, std::ios::binary);
        if (!f) throw Error("cannot write " + (dir / name).string());
        return f;
    };
    {
        auto f = open("pairdays.ndjson");
        write_pair_days(f, scenario.days);
    }
    {
        auto f = open("truth.ndjson");
        for (const auto& t : scenario.truth) f << to_json(t).dump() << '\n';
    }
    {
        auto f = open("roster.csv");
        f << "device_id,pair_id\n";
        for (const auto& r : scenario.roster) f << r.device_id << ',' << r.pair_id << '\n';
    }
    {
        auto f = open("labels.csv");
        f << "pair_id,local_date,report_a,report_b\n";
        for (const auto& t : scenario.truth) {
            const char* v = t.label ? "yes" : "no";
            f << t.pair_id << ',' << format_date(t.local_date) << ',' << v << ',' << v << '\n';
        }
    }
    {
        auto f = open("locations.csv");
        f << "device_id,timestamp,lat,lon,tz_offset\n";
        char buf[128];
        for (const auto& day : scenario.days) {
            for (const DayTrace* tr : {&day.trace_a, &day.trace_b}) {
                for (const auto& s : tr->samples) {
                    std::snprintf(buf, sizeof buf, ",%lld,%.17g,%.17g,%d\n", static_cast<long long>(s.timestamp_utc_ms),
                                  s.lat, s.lon, s.tz_offset_minutes);
                    f << s.device_id << buf;
                }
            }
        }
    }
    {
        auto f = open("scenario.json");
        f << to_json(config).dump(2) << '\n';
    }
}

void RoutineScenarioConfig::validate() const {
    check(days >= 2, "a routine needs at least two days");
    check(num_layers > 0, "layer count must be positive");
    check(co_walk_layer >= 1 && co_walk_layer <= num_layers, "co-walk layer out of range");
    for (int l : active_layers) check(l >= 1 && l <= num_layers, "active layer out of range");
    check(walk_duration > 0 && start_jitter >= 0, "bad walk timing");
    check(walk_duration + 2 * start_jitter < 24 * 60 / num_layers, "walks do not fit inside a layer");
    check(walking_speed_mps > 0 && sample_period_s > 0 && gps_noise_std_m >= 0, "bad movement parameters");
    check(dropout_probability >= 0 && dropout_probability <= 1, "dropout must lie in [0, 1]");
    check(anomaly_probability >= 0 && anomaly_probability <= 1, "anomaly probability must lie in [0, 1]");
    check(parse_date(start_date).has_value(), "start_date must be YYYY-MM-DD");
}

RoutineScenario generate_routine_pair(const RoutineScenarioConfig& config) {
    config.validate();
    Rng rng(config.seed);
    const LocalDate first = *parse_date(config.start_date);
    const Frame frame{config.center_lat, config.center_lon};
    const double axis = rng.uniform(0, 2 * M_PI);
    const Vec2 home_a = polar(config.home_separation_m / 2, axis);
    const Vec2 home_b = polar(-config.home_separation_m / 2, axis);
    const Route shared = make_route(rng, {0.0, 0.0}, 4, 6, 150, 350);

    std::vector<int> solo_layers;
    for (int l : config.active_layers) {
        if (l != config.co_walk_layer) solo_layers.push_back(l);
    }
    // One fixed personal route and nominal start per person and layer.
    struct Habit {
        Route route;
        double start = 0.0;
    };
    const double layer_minutes = 24.0 * 60.0 / config.num_layers;
    auto nominal_start = [&](int layer) {
        const double lo = (layer - 1) * layer_minutes + config.start_jitter;
        const double hi = layer * layer_minutes - config.walk_duration - config.start_jitter;
        return rng.uniform(lo, hi);
    };
    std::vector<Habit> habits_a, habits_b;
    for (int l : solo_layers) {
        habits_a.push_back({make_route(rng, home_a, 3, 5, 120, 300), nominal_start(l)});
        habits_b.push_back({make_route(rng, home_b, 3, 5, 120, 300), nominal_start(l)});
    }
    const double co_start = nominal_start(config.co_walk_layer);
    const double co_phase = rng.uniform(0.0, shared.length());

    RoutineScenario out;
    out.pair_id = config.pair_id;
    out.co_walk_layer = config.co_walk_layer;
    const std::string dev_a = config.pair_id + "-a";
    const std::string dev_b = config.pair_id + "-b";
    for (int d = 0; d < config.days; ++d) {
        const LocalDate date{first.days_since_epoch + d};
        TraceWriter wa(frame, date, dev_a, config.tz_offset_minutes, config.gps_noise_std_m,
                       config.dropout_probability);
        TraceWriter wb(frame, date, dev_b, config.tz_offset_minutes, config.gps_noise_std_m,
                       config.dropout_probability);
        std::vector<Interval> busy_a, busy_b;
        auto jittered = [&](double start) {
            const double s = start + rng.uniform(-config.start_jitter, config.start_jitter);
            return Interval{minutes(s), minutes(s + config.walk_duration)};
        };
        for (std::size_t k = 0; k < solo_layers.size(); ++k) {
            const Interval ia = jittered(habits_a[k].start);
            const Interval ib = jittered(habits_b[k].start);
            wa.walk(rng, habits_a[k].route, ia, config.walking_speed_mps, config.sample_period_s);
            wb.walk(rng, habits_b[k].route, ib, config.walking_speed_mps, config.sample_period_s);
            busy_a.push_back(ia);
            busy_b.push_back(ib);
        }
        const Interval co = jittered(co_start);
        wa.walk(rng, shared, co, config.walking_speed_mps, config.sample_period_s, co_phase);
        wb.walk(rng, shared, co, config.walking_speed_mps, config.sample_period_s, co_phase);
        busy_a.push_back(co);
        busy_b.push_back(co);
        for (auto* w : {&wa, &wb}) {
            if (!rng.bernoulli(config.anomaly_probability)) continue;
            const bool is_a = w == &wa;
            const Route detour = make_route(rng, is_a ? home_a : home_b, 3, 5, 200, 400);
            for (int attempt = 0; attempt < 20; ++attempt) {
                const double start = rng.uniform(6 * 60.0, 22 * 60.0);
                const Interval iv{minutes(start), minutes(start + 20)};
                if (overlaps_any(is_a ? busy_a : busy_b, iv, 5 * kMsPerMinute)) continue;
                w->walk(rng, detour, iv, config.walking_speed_mps, config.sample_period_s);
                break;
            }
        }
        out.days_a.push_back(wa.finish());
        out.days_b.push_back(wb.finish());
    }
    return out;
}

}  // namespace trajmatch
