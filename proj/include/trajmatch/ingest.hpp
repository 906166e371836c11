#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "trajmatch/types.hpp"

namespace trajmatch {

/// Column names expected in the header row of a location file.
struct ColumnMapping {
    std::string device = "device_id";
    std::string timestamp = "timestamp";
    std::string lat = "lat";
    std::string lon = "lon";
    std::string tz_offset = "tz_offset";  // optional column
    char delimiter = ',';
};

struct ParseDiagnostic {
    std::size_t line = 0;  // 1-based, header is line 1
    std::string reason;
};

struct ParseResult {
    std::vector<LocationSample> samples;  // input order
    std::size_t rejected_rows = 0;
    std::vector<ParseDiagnostic> diagnostics;
    std::vector<std::string> warnings;
};

/// Reads delimiter-separated location rows. A malformed header throws
/// DataError; bad rows are skipped and reported in the result.
ParseResult parse_locations(std::istream& in, const ColumnMapping& mapping = {});

struct RosterEntry {
    std::string device_id;
    std::string pair_id;
};

/// device_id,pair_id rows with a header. Within a pair, the first listed
/// device becomes trace_a.
std::vector<RosterEntry> parse_roster(std::istream& in, char delimiter = ',');

struct LabelRow {
    std::string pair_id;
    LocalDate local_date;
    std::optional<bool> report_a;
    std::optional<bool> report_b;
};

/// pair_id,local_date,report_a,report_b rows. Reports accept yes/no,
/// true/false, 1/0; an empty or NA cell is a missing report.
std::vector<LabelRow> parse_labels(std::istream& in, char delimiter = ',');

/// Disagreeing reports resolve to false; any missing report leaves the day
/// unlabeled.
std::optional<bool> resolve_label(const LabelRow& row);

/// Groups samples into per-pair, per-local-day traces. Days where either member
/// has no samples are dropped for both, as are unlabeled days. Output is sorted
/// by (pair_id, date); within a trace samples are sorted by local time and
/// duplicate timestamps keep their first occurrence.
std::vector<PairDay> build_pair_days(std::span<const LocationSample> samples, std::span<const RosterEntry> roster,
                                     std::span<const LabelRow> labels);

/// Splits one delimited line; double-quoted cells may contain the delimiter.
std::vector<std::string> split_delimited(const std::string& line, char delimiter);

}  // namespace trajmatch
