#include "trajmatch/timeutil.hpp"

#include <charconv>
#include <cstdio>

namespace trajmatch {

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
    std::int64_t q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
    return q;
}

// Howard Hinnant's civil calendar algorithms.
std::int32_t days_from_civil(int y, unsigned m, unsigned d) {
    y -= m <= 2;
    const int era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<int>(doe) - 719468;
}

void civil_from_days(std::int32_t z, int& year, unsigned& month, unsigned& day) {
    z += 719468;
    const int era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const int y = static_cast<int>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    day = doy - (153 * mp + 2) / 5 + 1;
    month = mp < 10 ? mp + 3 : mp - 9;
    year = y + (month <= 2);
}

std::string format_date(LocalDate date) {
    int y;
    unsigned m, d;
    civil_from_days(date.days_since_epoch, y, m, d);
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", y, m, d);
    return buf;
}

namespace {

bool read_int(std::string_view text, std::size_t pos, std::size_t len, int& out) {
    if (pos + len > text.size()) return false;
    for (std::size_t i = pos; i < pos + len; ++i) {
        if (text[i] < '0' || text[i] > '9') return false;
    }
    auto res = std::from_chars(text.data() + pos, text.data() + pos + len, out);
    return res.ec == std::errc{};
}

unsigned days_in_month(int y, unsigned m) {
    static constexpr unsigned kDays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    if (m == 2 && ((y % 4 == 0 && y % 100 != 0) || y % 400 == 0)) return 29;
    return kDays[m - 1];
}

}  // namespace

std::optional<LocalDate> parse_date(std::string_view text) {
    int y, m, d;
    if (text.size() != 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
    if (!read_int(text, 0, 4, y) || !read_int(text, 5, 2, m) || !read_int(text, 8, 2, d)) {
        return std::nullopt;
    }
    if (m < 1 || m > 12 || d < 1 || static_cast<unsigned>(d) > days_in_month(y, m)) return std::nullopt;
    return LocalDate{days_from_civil(y, static_cast<unsigned>(m), static_cast<unsigned>(d))};
}

std::optional<ParsedTimestamp> parse_timestamp(std::string_view text) {
    if (text.empty()) return std::nullopt;

    // Epoch milliseconds.
    bool all_digits = true;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (!(c >= '0' && c <= '9') && !(i == 0 && c == '-')) {
            all_digits = false;
            break;
        }
    }
    if (all_digits) {
        std::int64_t v = 0;
        auto res = std::from_chars(text.data(), text.data() + text.size(), v);
        if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) return std::nullopt;
        return ParsedTimestamp{v, std::nullopt};
    }

    auto date = parse_date(text.substr(0, 10));
    if (!date || text.size() < 19 || (text[10] != 'T' && text[10] != ' ')) return std::nullopt;
    int hh, mm, ss;
    if (!read_int(text, 11, 2, hh) || text[13] != ':' || !read_int(text, 14, 2, mm) || text[16] != ':' ||
        !read_int(text, 17, 2, ss)) {
        return std::nullopt;
    }
    if (hh > 23 || mm > 59 || ss > 60) return std::nullopt;

    std::size_t pos = 19;
    std::int64_t millis = 0;
    if (pos < text.size() && text[pos] == '.') {
        ++pos;
        std::size_t digits = 0;
        while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9') {
            if (digits < 3) millis = millis * 10 + (text[pos] - '0');
            ++digits;
            ++pos;
        }
        if (digits == 0) return std::nullopt;
        for (std::size_t k = digits; k < 3; ++k) millis *= 10;
    }

    std::optional<std::int32_t> offset;
    if (pos < text.size()) {
        if (text[pos] == 'Z' && pos + 1 == text.size()) {
            offset = 0;
        } else if ((text[pos] == '+' || text[pos] == '-') && pos + 6 == text.size() && text[pos + 3] == ':') {
            int oh, om;
            if (!read_int(text, pos + 1, 2, oh) || !read_int(text, pos + 4, 2, om)) return std::nullopt;
            if (oh > 14 || om > 59) return std::nullopt;
            offset = (text[pos] == '-' ? -1 : 1) * (oh * 60 + om);
        } else {
            return std::nullopt;
        }
    }

    std::int64_t wall_ms = static_cast<std::int64_t>(date->days_since_epoch) * kMillisPerDay +
                           (static_cast<std::int64_t>(hh) * 3600 + mm * 60 + ss) * 1000 + millis;
    // Wall clock minus offset gives UTC.
    if (offset) wall_ms -= static_cast<std::int64_t>(*offset) * kMillisPerMinute;
    return ParsedTimestamp{wall_ms, offset};
}

std::string format_time_of_day(std::int64_t ms) {
    const std::int64_t minutes = ms / kMillisPerMinute;
    char buf[48];
    std::snprintf(buf, sizeof buf, "%02lld:%02lld", static_cast<long long>(minutes / 60),
                  static_cast<long long>(minutes % 60));
    return buf;
}

LocalDate LocationSample::local_date() const {
    return LocalDate{static_cast<std::int32_t>(floor_div(local_ms(), kMillisPerDay))};
}

std::int64_t LocationSample::local_time_of_day_ms() const {
    return local_ms() - floor_div(local_ms(), kMillisPerDay) * kMillisPerDay;
}

bool valid_coordinate(double lat, double lon) {
    return lat >= -90.0 && lat <= 90.0 && lon >= -180.0 && lon <= 180.0;
}

}  // namespace trajmatch
