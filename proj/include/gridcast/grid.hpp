#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "gridcast/ingest.hpp"

namespace gridcast {

// Rectangular study area divided into rows x cols equal cells.
//
// Cell edges are the equal-division points: the j-th longitude edge is
// lon_min + (lon_max - lon_min) * j / cols (and analogously for latitude),
// with the outer edges pinned to the bounds themselves. Cells are half-open:
// a point belongs to the cell whose start edge it sits on, where columns
// start at the west edge and rows start at the NORTH edge; the final
// interval on each axis is closed so the bounds themselves are in-grid.
struct GridSpec {
    double lon_min = 0;
    double lon_max = 0;
    double lat_min = 0;
    double lat_max = 0;
    std::size_t rows = 10;
    std::size_t cols = 10;

    void validate() const; // throws std::invalid_argument

    // Longitude of column edge j in [0, cols]; latitude of row edge i in
    // [0, rows], counted from the north (edge 0 = lat_max).
    double lon_edge(std::size_t j) const;
    double lat_edge(std::size_t i) const;

    bool operator==(const GridSpec&) const = default;
};

struct TimeSpec {
    std::int64_t start_epoch = 0;
    std::int64_t slot_seconds = 600;
    std::size_t num_slots = 0;

    void validate() const; // throws std::invalid_argument
    std::int64_t slot_start(std::size_t slot) const { return start_epoch + slot_seconds * static_cast<std::int64_t>(slot); }

    bool operator==(const TimeSpec&) const = default;
};

// 1-based cell reference; row 1 is the northernmost row, col 1 the westernmost column.
struct Cell {
    std::size_t row = 0;
    std::size_t col = 0;
    bool operator==(const Cell&) const = default;
};

/// Maps a point to its grid cell, or nullopt when outside the bounding box.
std::optional<Cell> locate_cell(double lon, double lat, const GridSpec& spec);

/// Zone id in [1, rows*cols]: zone = (row-1)*cols + col. Row/col are 1-based.
/// Throws std::out_of_range for indices outside the grid.
std::size_t zone_number(std::size_t row, std::size_t col, std::size_t rows = 10, std::size_t cols = 10);

struct DropStats {
    std::size_t out_of_area = 0;
    std::size_t out_of_time = 0;
    std::size_t total() const { return out_of_area + out_of_time; }
};

// Pick-up counts per (slot, cell): the demand sequence D_t.
class DemandSeries {
public:
    DemandSeries() = default;
    DemandSeries(GridSpec spec, TimeSpec time);

    const GridSpec& grid() const { return spec_; }
    const TimeSpec& time() const { return time_; }
    std::size_t num_slots() const { return time_.num_slots; }

    // row/col are 1-based, slot 0-based.
    std::int64_t at(std::size_t slot, std::size_t row, std::size_t col) const;
    std::int64_t& at(std::size_t slot, std::size_t row, std::size_t col);

    // Demand of one slot flattened in zone_number order (row-major).
    std::vector<double> slot_demand(std::size_t slot) const;

    std::int64_t total() const;

    // First `n` slots as an independent series (used to fit scalers on the
    // training portion only).
    DemandSeries head(std::size_t n) const;

    bool operator==(const DemandSeries&) const = default;

private:
    GridSpec spec_;
    TimeSpec time_;
    std::vector<std::int64_t> counts_; // slot-major, then row, then col
};

struct BinResult {
    DemandSeries series;
    DropStats drops;
};

/// Bins trips by pick-up location and start time. Trips outside the spatial
/// bounds or the time range are tallied in DropStats, never lost:
/// sum(counts) + drops.total() == trips.size().
BinResult build_demand_series(const std::vector<TripRecord>& trips, const GridSpec& spec,
                              const TimeSpec& time);

/// Persists a series as `slot_index,row,col,count` rows (zero cells omitted)
/// behind a header line that encodes GridSpec/TimeSpec. Round-trip is
/// bit-exact.
void save_demand_series(std::ostream& out, const DemandSeries& series);
DemandSeries load_demand_series(std::istream& in); // throws std::runtime_error on malformed input

} // namespace gridcast
