#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace trajmatch {

inline constexpr std::int64_t kMillisPerMinute = 60'000;
inline constexpr std::int64_t kMillisPerDay = 86'400'000;

/// Days since 1970-01-01 in local time.
struct LocalDate {
    std::int32_t days_since_epoch = 0;

    friend auto operator<=>(const LocalDate&, const LocalDate&) = default;
};

/// One location fix. Local time is timestamp_utc + tz_offset_minutes and is
/// the only clock used for day and layer bucketing.
struct LocationSample {
    std::string device_id;
    std::int64_t timestamp_utc_ms = 0;
    std::int32_t tz_offset_minutes = 0;
    double lat = 0.0;
    double lon = 0.0;

    std::int64_t local_ms() const {
        return timestamp_utc_ms + static_cast<std::int64_t>(tz_offset_minutes) * kMillisPerMinute;
    }
    LocalDate local_date() const;
    /// Milliseconds since local midnight, in [0, kMillisPerDay).
    std::int64_t local_time_of_day_ms() const;

    friend bool operator==(const LocationSample&, const LocationSample&) = default;
};

/// All samples of one device on one local calendar date, sorted by local time.
struct DayTrace {
    std::string device_id;
    LocalDate local_date;
    std::vector<LocationSample> samples;

    friend bool operator==(const DayTrace&, const DayTrace&) = default;
};

struct PairDay {
    std::string pair_id;
    LocalDate local_date;
    DayTrace trace_a;
    DayTrace trace_b;
    /// Co-behavior ground truth; absent for unlabeled inference inputs.
    std::optional<bool> label;

    friend bool operator==(const PairDay&, const PairDay&) = default;
};

bool valid_coordinate(double lat, double lon);

}  // namespace trajmatch
