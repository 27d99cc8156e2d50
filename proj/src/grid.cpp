#include "gridcast/grid.hpp"

#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "gridcast/csv.hpp"
#include "gridcast/timeutil.hpp"

namespace gridcast {

void GridSpec::validate() const {
    if (!(lon_min < lon_max)) throw std::invalid_argument("GridSpec: lon_min must be < lon_max");
    if (!(lat_min < lat_max)) throw std::invalid_argument("GridSpec: lat_min must be < lat_max");
    if (rows < 1 || cols < 1) throw std::invalid_argument("GridSpec: rows and cols must be >= 1");
}

double GridSpec::lon_edge(std::size_t j) const {
    if (j == 0) return lon_min;
    if (j == cols) return lon_max;
    return lon_min + (lon_max - lon_min) * static_cast<double>(j) / static_cast<double>(cols);
}

double GridSpec::lat_edge(std::size_t i) const {
    if (i == 0) return lat_max;
    if (i == rows) return lat_min;
    return lat_max - (lat_max - lat_min) * static_cast<double>(i) / static_cast<double>(rows);
}

void TimeSpec::validate() const {
    if (slot_seconds <= 0) throw std::invalid_argument("TimeSpec: slot_seconds must be > 0");
    if (num_slots < 1) throw std::invalid_argument("TimeSpec: num_slots must be >= 1");
}

std::optional<Cell> locate_cell(double lon, double lat, const GridSpec& spec) {
    if (!(lon >= spec.lon_min && lon <= spec.lon_max)) return std::nullopt;
    if (!(lat >= spec.lat_min && lat <= spec.lat_max)) return std::nullopt;

    // Initial guess by linear scaling, then fixed up against the exact edge
    // values so the half-open rule holds under floating-point rounding.
    double lon_span = spec.lon_max - spec.lon_min;
    std::size_t col = static_cast<std::size_t>(std::min(
        static_cast<double>(spec.cols - 1),
        std::max(0.0, std::floor((lon - spec.lon_min) / lon_span * static_cast<double>(spec.cols)))));
    while (col > 0 && lon < spec.lon_edge(col)) --col;
    while (col + 1 < spec.cols && lon >= spec.lon_edge(col + 1)) ++col;

    double lat_span = spec.lat_max - spec.lat_min;
    std::size_t row = static_cast<std::size_t>(std::min(
        static_cast<double>(spec.rows - 1),
        std::max(0.0, std::floor((spec.lat_max - lat) / lat_span * static_cast<double>(spec.rows)))));
    // Row k (0-based) spans (lat_edge(k+1), lat_edge(k)]: cells own their
    // north edge, and the southernmost row also owns lat_min.
    while (row > 0 && lat > spec.lat_edge(row)) --row;
    while (row + 1 < spec.rows && lat <= spec.lat_edge(row + 1)) ++row;

    return Cell{row + 1, col + 1};
}

std::size_t zone_number(std::size_t row, std::size_t col, std::size_t rows, std::size_t cols) {
    if (row < 1 || row > rows || col < 1 || col > cols)
        throw std::out_of_range("zone_number: cell index outside grid");
    return (row - 1) * cols + col;
}

DemandSeries::DemandSeries(GridSpec spec, TimeSpec time) : spec_(spec), time_(time) {
    spec_.validate();
    time_.validate();
    counts_.assign(time_.num_slots * spec_.rows * spec_.cols, 0);
}

std::int64_t DemandSeries::at(std::size_t slot, std::size_t row, std::size_t col) const {
    return counts_[(slot * spec_.rows + (row - 1)) * spec_.cols + (col - 1)];
}

std::int64_t& DemandSeries::at(std::size_t slot, std::size_t row, std::size_t col) {
    return counts_[(slot * spec_.rows + (row - 1)) * spec_.cols + (col - 1)];
}

std::vector<double> DemandSeries::slot_demand(std::size_t slot) const {
    std::vector<double> out(spec_.rows * spec_.cols);
    const std::int64_t* base = counts_.data() + slot * spec_.rows * spec_.cols;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<double>(base[i]);
    return out;
}

std::int64_t DemandSeries::total() const {
    return std::accumulate(counts_.begin(), counts_.end(), std::int64_t{0});
}

DemandSeries DemandSeries::head(std::size_t n) const {
    if (n > time_.num_slots) throw std::invalid_argument("DemandSeries::head: n exceeds num_slots");
    TimeSpec t = time_;
    t.num_slots = n;
    DemandSeries out(spec_, t);
    std::copy(counts_.begin(), counts_.begin() + static_cast<std::ptrdiff_t>(n * spec_.rows * spec_.cols),
              out.counts_.begin());
    return out;
}

BinResult build_demand_series(const std::vector<TripRecord>& trips, const GridSpec& spec,
                              const TimeSpec& time) {
    spec.validate();
    time.validate();
    BinResult result{DemandSeries(spec, time), {}};
    for (const auto& trip : trips) {
        std::int64_t offset = trip.start_ts - time.start_epoch;
        std::int64_t slot = floor_div(offset, time.slot_seconds);
        if (slot < 0 || slot >= static_cast<std::int64_t>(time.num_slots)) {
            ++result.drops.out_of_time;
            continue;
        }
        auto cell = locate_cell(trip.pickup_lon, trip.pickup_lat, spec);
        if (!cell) {
            ++result.drops.out_of_area;
            continue;
        }
        ++result.series.at(static_cast<std::size_t>(slot), cell->row, cell->col);
    }
    return result;
}

void save_demand_series(std::ostream& out, const DemandSeries& series) {
    const GridSpec& g = series.grid();
    const TimeSpec& t = series.time();
    out << "# gridcast-demand v1"
        << " lon_min=" << csv::format_f64(g.lon_min) << " lon_max=" << csv::format_f64(g.lon_max)
        << " lat_min=" << csv::format_f64(g.lat_min) << " lat_max=" << csv::format_f64(g.lat_max)
        << " rows=" << g.rows << " cols=" << g.cols
        << " start_epoch=" << t.start_epoch << " slot_seconds=" << t.slot_seconds
        << " num_slots=" << t.num_slots << '\n';
    out << "slot_index,row,col,count\n";
    for (std::size_t slot = 0; slot < t.num_slots; ++slot) {
        for (std::size_t row = 1; row <= g.rows; ++row) {
            for (std::size_t col = 1; col <= g.cols; ++col) {
                std::int64_t c = series.at(slot, row, col);
                if (c != 0) out << slot << ',' << row << ',' << col << ',' << c << '\n';
            }
        }
    }
}

namespace {

// Reads "key=value" tokens from the sidecar header line.
double header_f64(const std::string& token, std::string_view key) {
    auto pos = token.find('=');
    if (pos == std::string::npos || std::string_view(token).substr(0, pos) != key)
        throw std::runtime_error("demand series header: expected key '" + std::string(key) + "'");
    auto value = csv::parse_f64(std::string_view(token).substr(pos + 1));
    if (!value) throw std::runtime_error("demand series header: bad value for '" + std::string(key) + "'");
    return *value;
}

std::int64_t header_i64(const std::string& token, std::string_view key) {
    auto pos = token.find('=');
    if (pos == std::string::npos || std::string_view(token).substr(0, pos) != key)
        throw std::runtime_error("demand series header: expected key '" + std::string(key) + "'");
    auto value = csv::parse_i64(std::string_view(token).substr(pos + 1));
    if (!value) throw std::runtime_error("demand series header: bad value for '" + std::string(key) + "'");
    return *value;
}

} // namespace

DemandSeries load_demand_series(std::istream& in) {
    std::string header;
    if (!std::getline(in, header)) throw std::runtime_error("demand series: empty input");
    std::istringstream hs(header);
    std::string hash, magic, version, token;
    hs >> hash >> magic >> version;
    if (hash != "#" || magic != "gridcast-demand" || version != "v1")
        throw std::runtime_error("demand series: unrecognized header '" + header + "'");

    GridSpec g;
    TimeSpec t;
    hs >> token; g.lon_min = header_f64(token, "lon_min");
    hs >> token; g.lon_max = header_f64(token, "lon_max");
    hs >> token; g.lat_min = header_f64(token, "lat_min");
    hs >> token; g.lat_max = header_f64(token, "lat_max");
    hs >> token; g.rows = static_cast<std::size_t>(header_i64(token, "rows"));
    hs >> token; g.cols = static_cast<std::size_t>(header_i64(token, "cols"));
    hs >> token; t.start_epoch = header_i64(token, "start_epoch");
    hs >> token; t.slot_seconds = header_i64(token, "slot_seconds");
    hs >> token; t.num_slots = static_cast<std::size_t>(header_i64(token, "num_slots"));
    if (!hs) throw std::runtime_error("demand series: truncated header");

    DemandSeries series(g, t);
    std::string line;
    std::size_t line_no = 1;
    bool column_header_seen = false;
    while (std::getline(in, line)) {
        ++line_no;
        auto fields = csv::split_fields(line);
        if (!column_header_seen) {
            column_header_seen = true;
            if (!fields.empty() && fields[0] == "slot_index") continue;
        }
        if (fields.size() == 1 && fields[0].empty()) continue;
        if (fields.size() != 4)
            throw std::runtime_error("demand series line " + std::to_string(line_no) + ": expected 4 columns");
        auto slot = csv::parse_i64(fields[0]);
        auto row = csv::parse_i64(fields[1]);
        auto col = csv::parse_i64(fields[2]);
        auto count = csv::parse_i64(fields[3]);
        if (!slot || !row || !col || !count)
            throw std::runtime_error("demand series line " + std::to_string(line_no) + ": non-numeric field");
        if (*slot < 0 || *slot >= static_cast<std::int64_t>(t.num_slots) ||
            *row < 1 || *row > static_cast<std::int64_t>(g.rows) ||
            *col < 1 || *col > static_cast<std::int64_t>(g.cols) || *count < 0)
            throw std::runtime_error("demand series line " + std::to_string(line_no) + ": index out of range");
        series.at(static_cast<std::size_t>(*slot), static_cast<std::size_t>(*row),
                  static_cast<std::size_t>(*col)) = *count;
    }
    return series;
}

} // namespace gridcast
