#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "trajmatch/types.hpp"

namespace trajmatch {

/// Civil date <-> day count (proleptic Gregorian).
std::int32_t days_from_civil(int year, unsigned month, unsigned day);
void civil_from_days(std::int32_t days, int& year, unsigned& month, unsigned& day);

/// "YYYY-MM-DD".
std::string format_date(LocalDate date);
std::optional<LocalDate> parse_date(std::string_view text);

/// Parsed absolute timestamp. `offset_minutes` is set when the text carried an
/// explicit UTC offset (including "Z").
struct ParsedTimestamp {
    std::int64_t utc_ms = 0;
    std::optional<std::int32_t> offset_minutes;
};

/// Accepts epoch milliseconds (optionally signed integer) or ISO-8601
/// `YYYY-MM-DDThh:mm:ss[.fff][Z|+hh:mm|-hh:mm]`. A space may replace the `T`.
/// ISO strings without an offset are read as UTC.
std::optional<ParsedTimestamp> parse_timestamp(std::string_view text);

/// "hh:mm" for a time of day in milliseconds; 24:00 is rendered as such.
std::string format_time_of_day(std::int64_t ms);

std::int64_t floor_div(std::int64_t a, std::int64_t b);

}  // namespace trajmatch
