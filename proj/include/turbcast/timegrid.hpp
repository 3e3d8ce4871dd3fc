#pragma once

#include <cstdint>
#include <string>

namespace turbcast {

// UTC timestamps are carried as epoch seconds, minute-aligned. No timezone
// arithmetic anywhere; inputs and outputs are ISO-8601 UTC.

// Accepts "YYYY-MM-DDTHH:MM", "YYYY-MM-DD HH:MM", optional ":SS" and "Z".
// Throws io_error on malformed input or non-zero seconds.
std::int64_t parse_utc(const std::string& text);

// "YYYY-MM-DDTHH:MM:SSZ"
std::string format_utc(std::int64_t epoch_seconds);

// Calendar month of a timestamp as "YYYY-MM".
std::string utc_month(std::int64_t epoch_seconds);

// Seconds since UTC midnight.
int seconds_of_day(std::int64_t epoch_seconds);

}  // namespace turbcast
