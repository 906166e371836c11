#pragma once

#include <iosfwd>
#include <vector>

#include <nlohmann/json.hpp>

#include "trajmatch/types.hpp"

namespace trajmatch {

// Line-delimited PairDay records. One JSON object per line:
//   {"pair_id":"P1","local_date":"2020-03-01","label":true,
//    "trace_a":{"device_id":"u1","samples":[[utc_ms,tz_min,lat,lon],...]},
//    "trace_b":{...}}
// "label" is null for unlabeled days.

nlohmann::json to_json(const PairDay& day);
PairDay pair_day_from_json(const nlohmann::json& j);

void write_pair_days(std::ostream& out, const std::vector<PairDay>& days);
/// Throws DataError naming the offending line on malformed input.
std::vector<PairDay> read_pair_days(std::istream& in);

}  // namespace trajmatch
