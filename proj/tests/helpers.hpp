#pragma once

#include <cstdint>
#include <string>
#include <tuple>
#include <vector>

#include "trajmatch/timeutil.hpp"
#include "trajmatch/types.hpp"

namespace testutil {

/// (minute of local day, lat, lon) fixes on one date with tz offset 0.
inline trajmatch::DayTrace trace(const std::string& device, const std::string& date,
                                 const std::vector<std::tuple<double, double, double>>& fixes) {
    trajmatch::DayTrace t;
    t.device_id = device;
    t.local_date = *trajmatch::parse_date(date);
    const std::int64_t base = static_cast<std::int64_t>(t.local_date.days_since_epoch) * trajmatch::kMillisPerDay;
    for (const auto& [minute, lat, lon] : fixes) {
        trajmatch::LocationSample s;
        s.device_id = device;
        s.timestamp_utc_ms = base + static_cast<std::int64_t>(minute * 60'000.0);
        s.lat = lat;
        s.lon = lon;
        t.samples.push_back(s);
    }
    return t;
}

inline trajmatch::PairDay pair_day(const std::string& pair, trajmatch::DayTrace a, trajmatch::DayTrace b,
                                   std::optional<bool> label) {
    trajmatch::PairDay d;
    d.pair_id = pair;
    d.local_date = a.local_date;
    d.trace_a = std::move(a);
    d.trace_b = std::move(b);
    d.label = label;
    return d;
}

}  // namespace testutil
