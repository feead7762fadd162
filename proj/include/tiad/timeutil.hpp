#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace tiad {

/// Seconds since 1970-01-01T00:00:00Z.
using UtcSeconds = std::int64_t;

/// Accepts "YYYY-MM-DD", "YYYY-MM-DDTHH:MM:SS[.fff][Z|+00:00]". Throws FormatError.
UtcSeconds parse_utc(std::string_view text);
std::string format_utc(UtcSeconds t);
std::string format_date(UtcSeconds t);

std::int64_t days_from_civil(int y, unsigned m, unsigned d);

}  // namespace tiad
