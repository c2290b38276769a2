#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <string_view>

namespace tfcast {

/// Calendar datetime at minute resolution (UTC-agnostic wall clock).
using Timestamp = std::chrono::sys_time<std::chrono::minutes>;

/// Parses exactly `YYYY-MM-DD HH:MM`; rejects impossible dates and times.
std::optional<Timestamp> parse_timestamp(std::string_view text);
std::string format_timestamp(Timestamp t);

/// Start of the `bin_minutes`-long bin containing t (bins aligned to midnight).
Timestamp floor_to_bin(Timestamp t, int bin_minutes);

}  // namespace tfcast
