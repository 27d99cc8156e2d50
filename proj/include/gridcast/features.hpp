#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string_view>
#include <vector>

#include "gridcast/grid.hpp"
#include "gridcast/nn.hpp"

namespace gridcast {

// Context-aware information for one time slot: minutes of the day, day of
// week (0 = Monday), global slot index, temperature, humidity, and the
// weather condition code.
struct ContextVector {
    int minutes_of_day = 0;  // [0, 1439]
    int day_of_week = 0;     // [0, 6], 0 = Monday
    std::size_t slot = 0;    // global slot index
    double temp_f = 0;
    double humidity = 0;
    int condition = 0;       // [0, 10]

    bool operator==(const ContextVector&) const = default;
};

/// Derives the context vector for a slot. Weather fields come from the
/// latest record with ts <= slot start (nearest-previous fill; records must
/// be sorted ascending by ts). Throws std::runtime_error when no record
/// covers the slot ("weather coverage gap").
ContextVector build_context(std::size_t slot, const TimeSpec& time, std::int64_t utc_offset_seconds,
                            const std::vector<WeatherRecord>& weather);

std::vector<ContextVector> build_contexts(const TimeSpec& time, std::int64_t utc_offset_seconds,
                                          const std::vector<WeatherRecord>& weather);

// The seven scaled features: six context entries plus the global demand
// channel.
enum class Feature : std::size_t {
    MinutesOfDay = 0,
    DayOfWeek = 1,
    SlotIndex = 2,
    Temperature = 3,
    Humidity = 4,
    Condition = 5,
    Demand = 6,
};
constexpr std::size_t kFeatureCount = 7;
std::string_view feature_name(Feature f);

/**
 * @brief Per-feature min-max scaler fitted on the training portion only.
 *
 * transform maps the observed [min, max] onto [0, 1]; a constant feature
 * (max == min) maps to 0. Values outside the fitted range (e.g. the global
 * slot index at inference time) extrapolate outside [0, 1].
 */
class Scaler {
public:
    Scaler() = default;

    bool fitted() const { return fitted_; }
    double transform(Feature f, double x) const;
    double inverse(Feature f, double y) const;
    double min(Feature f) const { return ranges_[static_cast<std::size_t>(f)].min; }
    double max(Feature f) const { return ranges_[static_cast<std::size_t>(f)].max; }

    void save(std::ostream& out) const;
    static Scaler load(std::istream& in); // throws std::runtime_error on malformed input

    friend Scaler fit_scaler(const DemandSeries& train_series,
                             const std::vector<ContextVector>& train_contexts);

    bool operator==(const Scaler&) const = default;

private:
    struct Range {
        double min = 0;
        double max = 0;
        bool operator==(const Range&) const = default;
    };
    std::array<Range, kFeatureCount> ranges_{};
    bool fitted_ = false;
};

/// Records per-feature min/max over the training contexts and a single
/// global (min, max) over every cell and slot of the training demand.
Scaler fit_scaler(const DemandSeries& train_series, const std::vector<ContextVector>& train_contexts);

// One image frame: rows 1..grid_rows hold scaled demand, the extra bottom
// row holds the six scaled context values in pixels 1..6 and zeros after.
struct Frame {
    std::size_t height = 0; // grid rows + 1
    std::size_t width = 0;
    std::vector<double> values;

    double at(std::size_t row, std::size_t col) const { return values[(row - 1) * width + (col - 1)]; } // 1-based
};

Frame compose_frame(const std::vector<double>& demand_counts, std::size_t grid_rows,
                    std::size_t grid_cols, const ContextVector& ctx, const Scaler& scaler);

// One supervised instance. input stacks the m frames before the anchor slot;
// target concatenates the unscaled demand of the k_max slots from the anchor
// on, horizon-major, zones flattened in zone_number order.
struct Sample {
    nn::Tensor input;                 // m x (rows+1) x cols
    std::vector<double> target;       // zones * k_max
    std::size_t anchor = 0;           // slot index t of the first predicted slot
    std::vector<double> last_demand;  // unscaled demand of slot t-1, zone order
};

/// Windows the series into samples for anchors t in [m, T - k_max].
/// Throws std::invalid_argument when T < m + k_max ("series too short").
std::vector<Sample> build_dataset(const DemandSeries& series,
                                  const std::vector<ContextVector>& contexts, const Scaler& scaler,
                                  std::size_t m, std::size_t k_max);

struct DatasetSplit {
    std::vector<Sample> train;
    std::vector<Sample> test;
};

/// Earliest ceil(fraction * N) samples become the training side; order is
/// preserved and nothing crosses the boundary. Throws when either side would
/// be empty.
DatasetSplit split_chronological(std::vector<Sample> dataset, double train_fraction);

} // namespace gridcast
