#include "trajmatch/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <map>
#include <set>
#include <utility>

#include "trajmatch/error.hpp"
#include "trajmatch/timeutil.hpp"

namespace trajmatch {

namespace {

std::string trim(std::string s) {
    auto not_space = [](unsigned char c) { return !(c == ' ' || c == '\t' || c == '\r' || c == '\n'); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
    s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
    return s;
}

std::string lower(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

std::optional<double> parse_double(const std::string& s) {
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

std::optional<std::int32_t> parse_int32(const std::string& s) {
    std::int32_t v = 0;
    const char* begin = s.data();
    if (!s.empty() && s[0] == '+') ++begin;
    auto res = std::from_chars(begin, s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

std::optional<std::size_t> find_column(const std::vector<std::string>& header, const std::string& name) {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == name) return i;
    }
    return std::nullopt;
}

bool read_line(std::istream& in, std::string& line) {
    if (!std::getline(in, line)) return false;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
}

std::vector<std::string> read_header(std::istream& in, char delimiter, const char* what) {
    std::string line;
    if (!read_line(in, line)) throw DataError(std::string(what) + ": missing header row");
    // Tolerate a UTF-8 byte order mark.
    if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    auto cells = split_delimited(line, delimiter);
    for (auto& c : cells) c = trim(c);
    return cells;
}

std::optional<bool> parse_report(const std::string& raw, bool& ok) {
    const std::string v = lower(trim(raw));
    ok = true;
    if (v.empty() || v == "na" || v == "null" || v == "none") return std::nullopt;
    if (v == "yes" || v == "y" || v == "true" || v == "1") return true;
    if (v == "no" || v == "n" || v == "false" || v == "0") return false;
    ok = false;
    return std::nullopt;
}

}  // namespace

std::vector<std::string> split_delimited(const std::string& line, char delimiter) {
    std::vector<std::string> cells;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == delimiter) {
            cells.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    cells.push_back(std::move(cur));
    return cells;
}

ParseResult parse_locations(std::istream& in, const ColumnMapping& mapping) {
    const auto header = read_header(in, mapping.delimiter, "location file");
    const auto dev_col = find_column(header, mapping.device);
    const auto ts_col = find_column(header, mapping.timestamp);
    const auto lat_col = find_column(header, mapping.lat);
    const auto lon_col = find_column(header, mapping.lon);
    if (!dev_col || !ts_col || !lat_col || !lon_col) {
        throw DataError("location file: header must contain columns '" + mapping.device + "', '" +
                        mapping.timestamp + "', '" + mapping.lat + "', '" + mapping.lon + "'");
    }
    const auto tz_col = find_column(header, mapping.tz_offset);

    ParseResult result;
    if (!tz_col) {
        result.warnings.push_back("no '" + mapping.tz_offset +
                                  "' column; local time taken as UTC (offset 0) unless the timestamp carries one");
    }

    std::string line;
    std::size_t line_no = 1;
    auto reject = [&](std::string reason) {
        ++result.rejected_rows;
        result.diagnostics.push_back({line_no, std::move(reason)});
    };

    while (read_line(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        auto cells = split_delimited(line, mapping.delimiter);
        for (auto& c : cells) c = trim(c);
        const std::size_t need = std::max({*dev_col, *ts_col, *lat_col, *lon_col, tz_col.value_or(0)});
        if (cells.size() <= need) {
            reject("too few columns");
            continue;
        }

        LocationSample s;
        s.device_id = cells[*dev_col];
        if (s.device_id.empty()) {
            reject("empty device id");
            continue;
        }
        auto ts = parse_timestamp(cells[*ts_col]);
        if (!ts) {
            reject("unparseable timestamp '" + cells[*ts_col] + "'");
            continue;
        }
        s.timestamp_utc_ms = ts->utc_ms;
        auto lat = parse_double(cells[*lat_col]);
        auto lon = parse_double(cells[*lon_col]);
        if (!lat || !lon) {
            reject("unparseable coordinate");
            continue;
        }
        if (!valid_coordinate(*lat, *lon)) {
            reject("coordinate out of range");
            continue;
        }
        s.lat = *lat;
        s.lon = *lon;
        if (tz_col) {
            auto off = parse_int32(cells[*tz_col]);
            if (!off || *off < -24 * 60 || *off > 24 * 60) {
                reject("bad tz offset '" + cells[*tz_col] + "'");
                continue;
            }
            s.tz_offset_minutes = *off;
        } else {
            s.tz_offset_minutes = ts->offset_minutes.value_or(0);
        }
        result.samples.push_back(std::move(s));
    }
    return result;
}

std::vector<RosterEntry> parse_roster(std::istream& in, char delimiter) {
    const auto header = read_header(in, delimiter, "roster");
    const auto dev_col = find_column(header, "device_id");
    const auto pair_col = find_column(header, "pair_id");
    if (!dev_col || !pair_col) throw DataError("roster: header must contain 'device_id' and 'pair_id'");

    std::vector<RosterEntry> roster;
    std::string line;
    std::size_t line_no = 1;
    while (read_line(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        auto cells = split_delimited(line, delimiter);
        if (cells.size() <= std::max(*dev_col, *pair_col)) {
            throw DataError("roster line " + std::to_string(line_no) + ": too few columns");
        }
        roster.push_back({trim(cells[*dev_col]), trim(cells[*pair_col])});
    }
    return roster;
}

std::vector<LabelRow> parse_labels(std::istream& in, char delimiter) {
    const auto header = read_header(in, delimiter, "label file");
    const auto pair_col = find_column(header, "pair_id");
    const auto date_col = find_column(header, "local_date");
    const auto a_col = find_column(header, "report_a");
    const auto b_col = find_column(header, "report_b");
    if (!pair_col || !date_col || !a_col || !b_col) {
        throw DataError("label file: header must contain 'pair_id', 'local_date', 'report_a', 'report_b'");
    }

    std::vector<LabelRow> rows;
    std::string line;
    std::size_t line_no = 1;
    while (read_line(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        auto cells = split_delimited(line, delimiter);
        const std::string where = "label file line " + std::to_string(line_no);
        if (cells.size() <= std::max({*pair_col, *date_col, *a_col, *b_col})) throw DataError(where + ": too few columns");
        LabelRow row;
        row.pair_id = trim(cells[*pair_col]);
        auto date = parse_date(trim(cells[*date_col]));
        if (!date) throw DataError(where + ": bad date '" + cells[*date_col] + "'");
        row.local_date = *date;
        bool ok_a, ok_b;
        row.report_a = parse_report(cells[*a_col], ok_a);
        row.report_b = parse_report(cells[*b_col], ok_b);
        if (!ok_a || !ok_b) throw DataError(where + ": unrecognized report value");
        rows.push_back(std::move(row));
    }
    return rows;
}

std::optional<bool> resolve_label(const LabelRow& row) {
    if (!row.report_a || !row.report_b) return std::nullopt;
    return *row.report_a && *row.report_b;
}

std::vector<PairDay> build_pair_days(std::span<const LocationSample> samples, std::span<const RosterEntry> roster,
                                     std::span<const LabelRow> labels) {
    // pair -> ordered member list
    std::map<std::string, std::vector<std::string>> members;
    std::map<std::string, std::string> device_pair;
    for (const auto& e : roster) {
        if (!device_pair.emplace(e.device_id, e.pair_id).second) {
            throw DataError("roster: device '" + e.device_id + "' listed more than once");
        }
        members[e.pair_id].push_back(e.device_id);
    }
    for (const auto& [pair, devs] : members) {
        if (devs.size() != 2) {
            throw DataError("roster: pair '" + pair + "' has " + std::to_string(devs.size()) + " devices, expected 2");
        }
    }

    std::map<std::pair<std::string, std::int32_t>, std::optional<bool>> label_of;
    for (const auto& row : labels) {
        auto key = std::make_pair(row.pair_id, row.local_date.days_since_epoch);
        if (!label_of.emplace(key, resolve_label(row)).second) {
            throw DataError("labels: duplicate row for pair '" + row.pair_id + "' on " + format_date(row.local_date));
        }
    }

    // (device, date) -> samples in input order
    std::map<std::pair<std::string, std::int32_t>, std::vector<LocationSample>> by_day;
    for (const auto& s : samples) {
        if (!device_pair.contains(s.device_id)) {
            throw DataError("device '" + s.device_id + "' is not in the roster");
        }
        by_day[{s.device_id, s.local_date().days_since_epoch}].push_back(s);
    }
    for (auto& [key, list] : by_day) {
        std::stable_sort(list.begin(), list.end(),
                         [](const LocationSample& a, const LocationSample& b) { return a.local_ms() < b.local_ms(); });
        // Keep the first occurrence of each timestamp.
        std::vector<LocationSample> unique;
        unique.reserve(list.size());
        std::set<std::int64_t> seen;
        for (auto& s : list) {
            if (seen.insert(s.timestamp_utc_ms).second) unique.push_back(std::move(s));
        }
        list = std::move(unique);
    }

    std::vector<PairDay> out;
    for (const auto& [pair, devs] : members) {
        std::set<std::int32_t> dates;
        for (const auto& dev : devs) {
            for (auto it = by_day.lower_bound({dev, INT32_MIN}); it != by_day.end() && it->first.first == dev; ++it) {
                dates.insert(it->first.second);
            }
        }
        for (std::int32_t date : dates) {
            auto ia = by_day.find({devs[0], date});
            auto ib = by_day.find({devs[1], date});
            if (ia == by_day.end() || ib == by_day.end()) continue;
            auto il = label_of.find({pair, date});
            if (il == label_of.end() || !il->second) continue;

            PairDay day;
            day.pair_id = pair;
            day.local_date = LocalDate{date};
            day.trace_a = DayTrace{devs[0], day.local_date, ia->second};
            day.trace_b = DayTrace{devs[1], day.local_date, ib->second};
            day.label = il->second;
            out.push_back(std::move(day));
        }
    }
    return out;
}

}  // namespace trajmatch
