#pragma once

#include <cstdint>

namespace gridcast {

// Floor division/modulo for epoch arithmetic (C++ integer division truncates
// toward zero, which is wrong for pre-1970 local times).
constexpr std::int64_t floor_div(std::int64_t a, std::int64_t b) {
    std::int64_t q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
    return q;
}

constexpr std::int64_t floor_mod(std::int64_t a, std::int64_t b) {
    return a - floor_div(a, b) * b;
}

constexpr std::int64_t kSecondsPerDay = 86400;

// Minutes since local midnight, in [0, 1439].
constexpr int local_minutes_of_day(std::int64_t epoch_seconds, std::int64_t utc_offset_seconds) {
    return static_cast<int>(floor_mod(epoch_seconds + utc_offset_seconds, kSecondsPerDay) / 60);
}

// Day of week with 0 = Monday. 1970-01-01 was a Thursday.
constexpr int local_day_of_week(std::int64_t epoch_seconds, std::int64_t utc_offset_seconds) {
    std::int64_t days = floor_div(epoch_seconds + utc_offset_seconds, kSecondsPerDay);
    return static_cast<int>(floor_mod(days + 3, 7));
}

} // namespace gridcast
