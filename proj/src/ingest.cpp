#include "gridcast/ingest.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <istream>
#include <ostream>

#include "gridcast/csv.hpp"

namespace gridcast {

namespace {

// Condition code table. Index = code.
constexpr std::array<std::string_view, 11> kConditionNames = {
    "Unknown",            // 0
    "Clear",              // 1
    "Fog",                // 2
    "Haze",               // 3
    "Light Rain",         // 4
    "Light Rain Showers", // 5
    "Mist",               // 6
    "Mostly Cloudy",      // 7
    "Partly Cloudy",      // 8
    "Patches of Fog",     // 9
    "Scattered Clouds",   // 10
};

bool iequals(std::string_view a, std::string_view b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (std::tolower(static_cast<unsigned char>(a[i])) !=
            std::tolower(static_cast<unsigned char>(b[i])))
            return false;
    }
    return true;
}

bool read_line(std::istream& in, std::string& line) {
    return static_cast<bool>(std::getline(in, line));
}

} // namespace

int encode_condition(std::string_view name) {
    std::string_view trimmed = csv::trim(name);
    for (std::size_t code = 0; code < kConditionNames.size(); ++code) {
        if (iequals(trimmed, kConditionNames[code])) return static_cast<int>(code);
    }
    return 0;
}

std::string_view condition_name(int code) {
    if (code < 0 || code >= static_cast<int>(kConditionNames.size())) return kConditionNames[0];
    return kConditionNames[static_cast<std::size_t>(code)];
}

TripParseResult parse_trips(std::istream& source, const ParseOptions& options) {
    TripParseResult result;
    std::string line;
    std::size_t line_no = 0;
    bool header_pending = options.skip_header;
    while (read_line(source, line)) {
        ++line_no;
        if (header_pending) {
            header_pending = false;
            continue;
        }
        auto fields = csv::split_fields(line);
        if (fields.size() != 7) {
            result.errors.push_back({line_no, "expected 7 columns, got " + std::to_string(fields.size())});
            continue;
        }
        TripRecord rec;
        rec.order_id = std::string(csv::trim(fields[0]));
        auto start_ts = csv::parse_i64(fields[1]);
        auto end_ts = csv::parse_i64(fields[2]);
        if (!start_ts || !end_ts) {
            result.errors.push_back({line_no, "non-numeric timestamp"});
            continue;
        }
        auto plon = csv::parse_f64(fields[3]);
        auto plat = csv::parse_f64(fields[4]);
        auto dlon = csv::parse_f64(fields[5]);
        auto dlat = csv::parse_f64(fields[6]);
        if (!plon || !plat || !dlon || !dlat) {
            result.errors.push_back({line_no, "non-numeric coordinate"});
            continue;
        }
        if (*start_ts > *end_ts) {
            result.errors.push_back({line_no, "start after end"});
            continue;
        }
        if (*plon < -180 || *plon > 180 || *dlon < -180 || *dlon > 180) {
            result.errors.push_back({line_no, "longitude outside [-180,180]"});
            continue;
        }
        if (*plat < -90 || *plat > 90 || *dlat < -90 || *dlat > 90) {
            result.errors.push_back({line_no, "latitude outside [-90,90]"});
            continue;
        }
        rec.start_ts = *start_ts;
        rec.end_ts = *end_ts;
        rec.pickup_lon = *plon;
        rec.pickup_lat = *plat;
        rec.dropoff_lon = *dlon;
        rec.dropoff_lat = *dlat;
        result.records.push_back(std::move(rec));
    }
    return result;
}

WeatherParseResult parse_weather(std::istream& source, const ParseOptions& options) {
    WeatherParseResult result;
    std::string line;
    std::size_t line_no = 0;
    bool header_pending = options.skip_header;
    while (read_line(source, line)) {
        ++line_no;
        if (header_pending) {
            header_pending = false;
            continue;
        }
        auto fields = csv::split_fields(line);
        if (fields.size() != 4) {
            result.errors.push_back({line_no, "expected 4 columns, got " + std::to_string(fields.size())});
            continue;
        }
        auto ts = csv::parse_i64(fields[0]);
        if (!ts) {
            result.errors.push_back({line_no, "non-numeric timestamp"});
            continue;
        }
        auto temp = csv::parse_f64(fields[1]);
        auto humidity = csv::parse_f64(fields[2]);
        if (!temp || !humidity) {
            result.errors.push_back({line_no, "non-numeric temperature or humidity"});
            continue;
        }
        if (*humidity < 0 || *humidity > 100) {
            result.errors.push_back({line_no, "humidity outside [0,100]"});
            continue;
        }
        WeatherRecord rec;
        rec.ts = *ts;
        rec.temp_f = *temp;
        rec.humidity = *humidity;
        rec.condition = encode_condition(fields[3]);
        result.records.push_back(rec);
    }
    std::stable_sort(result.records.begin(), result.records.end(),
                     [](const WeatherRecord& a, const WeatherRecord& b) { return a.ts < b.ts; });
    return result;
}

void write_trips_csv(std::ostream& out, const std::vector<TripRecord>& trips, bool header) {
    if (header) out << "order_id,start_ts,end_ts,pickup_lon,pickup_lat,dropoff_lon,dropoff_lat\n";
    for (const auto& t : trips) {
        out << t.order_id << ',' << t.start_ts << ',' << t.end_ts << ','
            << csv::format_f64(t.pickup_lon) << ',' << csv::format_f64(t.pickup_lat) << ','
            << csv::format_f64(t.dropoff_lon) << ',' << csv::format_f64(t.dropoff_lat) << '\n';
    }
}

void write_weather_csv(std::ostream& out, const std::vector<WeatherRecord>& weather, bool header) {
    if (header) out << "ts,temp_f,humidity_pct,condition_name\n";
    for (const auto& w : weather) {
        out << w.ts << ',' << csv::format_f64(w.temp_f) << ',' << csv::format_f64(w.humidity)
            << ',' << condition_name(w.condition) << '\n';
    }
}

} // namespace gridcast
