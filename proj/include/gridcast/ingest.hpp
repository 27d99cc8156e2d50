#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace gridcast {

// One ride request row: anonymized id, start/end as unix seconds, pick-up and
// drop-off coordinates in degrees (GCJ-02, taken as given).
struct TripRecord {
    std::string order_id;
    std::int64_t start_ts = 0;
    std::int64_t end_ts = 0;
    double pickup_lon = 0;
    double pickup_lat = 0;
    double dropoff_lon = 0;
    double dropoff_lat = 0;

    bool operator==(const TripRecord&) const = default;
};

// Hourly weather observation. `condition` is the integer encoding produced by
// encode_condition().
struct WeatherRecord {
    std::int64_t ts = 0;
    double temp_f = 0;
    double humidity = 0;
    int condition = 0;

    bool operator==(const WeatherRecord&) const = default;
};

// A rejected input row. Malformed rows are collected, never silently dropped;
// callers decide whether the error count is acceptable.
struct RowError {
    std::size_t line = 0; // 1-based line number in the input
    std::string reason;
};

struct ParseOptions {
    bool skip_header = false;
};

struct TripParseResult {
    std::vector<TripRecord> records;
    std::vector<RowError> errors;
};

struct WeatherParseResult {
    std::vector<WeatherRecord> records; // sorted ascending by ts
    std::vector<RowError> errors;
};

/// Parses trip CSV rows `order_id,start_ts,end_ts,pickup_lon,pickup_lat,dropoff_lon,dropoff_lat`.
/// Every well-formed row yields a TripRecord; everything else becomes a RowError.
TripParseResult parse_trips(std::istream& source, const ParseOptions& options = {});

/// Parses weather CSV rows `ts,temp_f,humidity_pct,condition_name`.
/// Condition names are encoded via encode_condition(); output is sorted by ts.
WeatherParseResult parse_weather(std::istream& source, const ParseOptions& options = {});

/// Maps a weather condition name to its integer code. Matching is
/// case-insensitive and whitespace-trimmed; any unlisted name maps to 0.
int encode_condition(std::string_view name);

/// Canonical display name for a condition code (inverse of encode_condition
/// on the known codes). Out-of-range codes map to the code-0 name.
std::string_view condition_name(int code);

void write_trips_csv(std::ostream& out, const std::vector<TripRecord>& trips, bool header = false);
void write_weather_csv(std::ostream& out, const std::vector<WeatherRecord>& weather, bool header = false);

} // namespace gridcast
