#include "gridcast/features.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "gridcast/csv.hpp"
#include "gridcast/timeutil.hpp"

namespace gridcast {

ContextVector build_context(std::size_t slot, const TimeSpec& time, std::int64_t utc_offset_seconds,
                            const std::vector<WeatherRecord>& weather) {
    const std::int64_t slot_start = time.slot_start(slot);

    // Latest record with ts <= slot_start.
    auto it = std::upper_bound(weather.begin(), weather.end(), slot_start,
                               [](std::int64_t ts, const WeatherRecord& w) { return ts < w.ts; });
    if (it == weather.begin())
        throw std::runtime_error("weather coverage gap: no record at or before slot " + std::to_string(slot));
    const WeatherRecord& w = *(it - 1);

    ContextVector ctx;
    ctx.minutes_of_day = local_minutes_of_day(slot_start, utc_offset_seconds);
    ctx.day_of_week = local_day_of_week(slot_start, utc_offset_seconds);
    ctx.slot = slot;
    ctx.temp_f = w.temp_f;
    ctx.humidity = w.humidity;
    ctx.condition = w.condition;
    return ctx;
}

std::vector<ContextVector> build_contexts(const TimeSpec& time, std::int64_t utc_offset_seconds,
                                          const std::vector<WeatherRecord>& weather) {
    std::vector<ContextVector> out;
    out.reserve(time.num_slots);
    for (std::size_t slot = 0; slot < time.num_slots; ++slot)
        out.push_back(build_context(slot, time, utc_offset_seconds, weather));
    return out;
}

std::string_view feature_name(Feature f) {
    switch (f) {
        case Feature::MinutesOfDay: return "minutes_of_day";
        case Feature::DayOfWeek: return "day_of_week";
        case Feature::SlotIndex: return "slot_index";
        case Feature::Temperature: return "temp_f";
        case Feature::Humidity: return "humidity";
        case Feature::Condition: return "condition";
        case Feature::Demand: return "demand";
    }
    return "unknown";
}

double Scaler::transform(Feature f, double x) const {
    if (!fitted_) throw std::logic_error("Scaler: transform before fit");
    const Range& r = ranges_[static_cast<std::size_t>(f)];
    if (r.max == r.min) return 0.0; // constant feature
    return (x - r.min) / (r.max - r.min);
}

double Scaler::inverse(Feature f, double y) const {
    if (!fitted_) throw std::logic_error("Scaler: inverse before fit");
    const Range& r = ranges_[static_cast<std::size_t>(f)];
    return r.min + y * (r.max - r.min);
}

Scaler fit_scaler(const DemandSeries& train_series, const std::vector<ContextVector>& train_contexts) {
    if (train_contexts.empty() || train_series.num_slots() == 0)
        throw std::invalid_argument("fit_scaler: empty training portion");

    Scaler scaler;
    auto& r = scaler.ranges_;
    auto update = [&](Feature f, double x) {
        auto& range = r[static_cast<std::size_t>(f)];
        range.min = std::min(range.min, x);
        range.max = std::max(range.max, x);
    };
    // Seed every range from the first observation.
    const ContextVector& first = train_contexts.front();
    r[0] = {static_cast<double>(first.minutes_of_day), static_cast<double>(first.minutes_of_day)};
    r[1] = {static_cast<double>(first.day_of_week), static_cast<double>(first.day_of_week)};
    r[2] = {static_cast<double>(first.slot), static_cast<double>(first.slot)};
    r[3] = {first.temp_f, first.temp_f};
    r[4] = {first.humidity, first.humidity};
    r[5] = {static_cast<double>(first.condition), static_cast<double>(first.condition)};

    for (const auto& ctx : train_contexts) {
        update(Feature::MinutesOfDay, static_cast<double>(ctx.minutes_of_day));
        update(Feature::DayOfWeek, static_cast<double>(ctx.day_of_week));
        update(Feature::SlotIndex, static_cast<double>(ctx.slot));
        update(Feature::Temperature, ctx.temp_f);
        update(Feature::Humidity, ctx.humidity);
        update(Feature::Condition, static_cast<double>(ctx.condition));
    }

    // One global range over all cells and slots keeps relative hotspot
    // intensity intact across the image.
    double first_count = static_cast<double>(train_series.at(0, 1, 1));
    r[static_cast<std::size_t>(Feature::Demand)] = {first_count, first_count};
    const GridSpec& g = train_series.grid();
    for (std::size_t slot = 0; slot < train_series.num_slots(); ++slot)
        for (std::size_t row = 1; row <= g.rows; ++row)
            for (std::size_t col = 1; col <= g.cols; ++col)
                update(Feature::Demand, static_cast<double>(train_series.at(slot, row, col)));

    scaler.fitted_ = true;
    return scaler;
}

void Scaler::save(std::ostream& out) const {
    if (!fitted_) throw std::logic_error("Scaler: save before fit");
    out << "# gridcast-scaler v1\n";
    for (std::size_t i = 0; i < kFeatureCount; ++i) {
        out << feature_name(static_cast<Feature>(i)) << ',' << csv::format_f64(ranges_[i].min) << ','
            << csv::format_f64(ranges_[i].max) << '\n';
    }
}

Scaler Scaler::load(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || csv::trim(line) != "# gridcast-scaler v1")
        throw std::runtime_error("scaler manifest: unrecognized header");
    Scaler scaler;
    for (std::size_t i = 0; i < kFeatureCount; ++i) {
        if (!std::getline(in, line)) throw std::runtime_error("scaler manifest: truncated");
        auto fields = csv::split_fields(line);
        if (fields.size() != 3 || fields[0] != feature_name(static_cast<Feature>(i)))
            throw std::runtime_error("scaler manifest: bad line '" + line + "'");
        auto lo = csv::parse_f64(fields[1]);
        auto hi = csv::parse_f64(fields[2]);
        if (!lo || !hi || *hi < *lo)
            throw std::runtime_error("scaler manifest: bad range on line '" + line + "'");
        scaler.ranges_[i] = {*lo, *hi};
    }
    scaler.fitted_ = true;
    return scaler;
}

Frame compose_frame(const std::vector<double>& demand_counts, std::size_t grid_rows,
                    std::size_t grid_cols, const ContextVector& ctx, const Scaler& scaler) {
    if (demand_counts.size() != grid_rows * grid_cols)
        throw std::invalid_argument("compose_frame: demand size does not match grid");
    Frame frame;
    frame.height = grid_rows + 1;
    frame.width = grid_cols;
    frame.values.assign(frame.height * frame.width, 0.0);
    for (std::size_t i = 0; i < demand_counts.size(); ++i)
        frame.values[i] = scaler.transform(Feature::Demand, demand_counts[i]);

    double* context_row = frame.values.data() + grid_rows * grid_cols;
    context_row[0] = scaler.transform(Feature::MinutesOfDay, static_cast<double>(ctx.minutes_of_day));
    context_row[1] = scaler.transform(Feature::DayOfWeek, static_cast<double>(ctx.day_of_week));
    context_row[2] = scaler.transform(Feature::SlotIndex, static_cast<double>(ctx.slot));
    context_row[3] = scaler.transform(Feature::Temperature, ctx.temp_f);
    context_row[4] = scaler.transform(Feature::Humidity, ctx.humidity);
    context_row[5] = scaler.transform(Feature::Condition, static_cast<double>(ctx.condition));
    // pixels 7..width stay exactly 0
    return frame;
}

std::vector<Sample> build_dataset(const DemandSeries& series,
                                  const std::vector<ContextVector>& contexts, const Scaler& scaler,
                                  std::size_t m, std::size_t k_max) {
    const std::size_t T = series.num_slots();
    if (m < 1 || k_max < 1) throw std::invalid_argument("build_dataset: m and k_max must be >= 1");
    if (T < m + k_max) throw std::invalid_argument("build_dataset: series too short (T < m + k_max)");
    if (contexts.size() < T) throw std::invalid_argument("build_dataset: contexts do not cover series");

    const GridSpec& g = series.grid();
    const std::size_t zones = g.rows * g.cols;
    const std::size_t frame_h = g.rows + 1;

    // Compose each slot's frame once; windows share them.
    std::vector<Frame> frames;
    frames.reserve(T);
    for (std::size_t slot = 0; slot < T; ++slot)
        frames.push_back(compose_frame(series.slot_demand(slot), g.rows, g.cols, contexts[slot], scaler));

    std::vector<Sample> samples;
    samples.reserve(T - m - k_max + 1);
    for (std::size_t anchor = m; anchor + k_max <= T; ++anchor) {
        Sample s;
        s.anchor = anchor;
        s.input = nn::Tensor({m, frame_h, g.cols});
        for (std::size_t f = 0; f < m; ++f) {
            const Frame& frame = frames[anchor - m + f];
            std::copy(frame.values.begin(), frame.values.end(),
                      s.input.data.begin() + static_cast<std::ptrdiff_t>(f * frame_h * g.cols));
        }
        s.target.reserve(zones * k_max);
        for (std::size_t h = 0; h < k_max; ++h) {
            std::vector<double> demand = series.slot_demand(anchor + h);
            s.target.insert(s.target.end(), demand.begin(), demand.end());
        }
        s.last_demand = series.slot_demand(anchor - 1);
        samples.push_back(std::move(s));
    }
    return samples;
}

DatasetSplit split_chronological(std::vector<Sample> dataset, double train_fraction) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw std::invalid_argument("split_chronological: train_fraction must be in (0,1)");
    const std::size_t n = dataset.size();
    const std::size_t n_train =
        static_cast<std::size_t>(std::ceil(train_fraction * static_cast<double>(n)));
    if (n_train == 0 || n_train >= n)
        throw std::invalid_argument("split_chronological: a split side would be empty");

    DatasetSplit split;
    split.train.assign(std::make_move_iterator(dataset.begin()),
                       std::make_move_iterator(dataset.begin() + static_cast<std::ptrdiff_t>(n_train)));
    split.test.assign(std::make_move_iterator(dataset.begin() + static_cast<std::ptrdiff_t>(n_train)),
                      std::make_move_iterator(dataset.end()));
    return split;
}

} // namespace gridcast
