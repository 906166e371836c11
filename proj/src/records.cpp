#include "trajmatch/records.hpp"

#include <istream>
#include <ostream>
#include <string>

#include "trajmatch/error.hpp"
#include "trajmatch/timeutil.hpp"

namespace trajmatch {

namespace {

nlohmann::json trace_to_json(const DayTrace& t) {
    nlohmann::json samples = nlohmann::json::array();
    for (const auto& s : t.samples) {
        samples.push_back({s.timestamp_utc_ms, s.tz_offset_minutes, s.lat, s.lon});
    }
    return {{"device_id", t.device_id}, {"samples", std::move(samples)}};
}

DayTrace trace_from_json(const nlohmann::json& j, LocalDate date) {
    DayTrace t;
    t.device_id = j.at("device_id").get<std::string>();
    t.local_date = date;
    for (const auto& row : j.at("samples")) {
        if (!row.is_array() || row.size() != 4) throw DataError("sample must be [utc_ms, tz_min, lat, lon]");
        LocationSample s;
        s.device_id = t.device_id;
        s.timestamp_utc_ms = row[0].get<std::int64_t>();
        s.tz_offset_minutes = row[1].get<std::int32_t>();
        s.lat = row[2].get<double>();
        s.lon = row[3].get<double>();
        if (!valid_coordinate(s.lat, s.lon)) throw DataError("sample coordinate out of range");
        t.samples.push_back(std::move(s));
    }
    return t;
}

}  // namespace

nlohmann::json to_json(const PairDay& day) {
    nlohmann::json j;
    j["pair_id"] = day.pair_id;
    j["local_date"] = format_date(day.local_date);
    j["label"] = day.label ? nlohmann::json(*day.label) : nlohmann::json(nullptr);
    j["trace_a"] = trace_to_json(day.trace_a);
    j["trace_b"] = trace_to_json(day.trace_b);
    return j;
}

PairDay pair_day_from_json(const nlohmann::json& j) {
    PairDay day;
    day.pair_id = j.at("pair_id").get<std::string>();
    auto date = parse_date(j.at("local_date").get<std::string>());
    if (!date) throw DataError("bad local_date");
    day.local_date = *date;
    if (j.contains("label") && !j["label"].is_null()) day.label = j["label"].get<bool>();
    day.trace_a = trace_from_json(j.at("trace_a"), day.local_date);
    day.trace_b = trace_from_json(j.at("trace_b"), day.local_date);
    return day;
}

void write_pair_days(std::ostream& out, const std::vector<PairDay>& days) {
    for (const auto& d : days) out << to_json(d).dump() << '\n';
}

std::vector<PairDay> read_pair_days(std::istream& in) {
    std::vector<PairDay> days;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        try {
            days.push_back(pair_day_from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception& e) {
            throw DataError("pair-day record line " + std::to_string(line_no) + ": " + e.what());
        } catch (const DataError& e) {
            throw DataError("pair-day record line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return days;
}

}  // namespace trajmatch
