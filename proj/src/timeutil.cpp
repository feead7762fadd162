#include "tiad/timeutil.hpp"

#include <charconv>
#include <cstdio>

#include "tiad/error.hpp"

namespace tiad {

// Howard Hinnant's civil-calendar conversion.
std::int64_t days_from_civil(int y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const auto yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

namespace {

void civil_from_days(std::int64_t z, int& y, unsigned& m, unsigned& d) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const auto doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = doy - (153 * mp + 2) / 5 + 1;
  m = mp < 10 ? mp + 3 : mp - 9;
  y = static_cast<int>(yoe + era * 400) + (m <= 2);
}

int read_int(std::string_view text, std::size_t pos, std::size_t len) {
  if (pos + len > text.size()) throw FormatError("truncated timestamp '" + std::string(text) + "'");
  int value = 0;
  const auto* first = text.data() + pos;
  const auto [ptr, ec] = std::from_chars(first, first + len, value);
  if (ec != std::errc{} || ptr != first + len) throw FormatError("bad timestamp '" + std::string(text) + "'");
  return value;
}

}  // namespace

UtcSeconds parse_utc(std::string_view text) {
  if (text.size() < 10 || text[4] != '-' || text[7] != '-') {
    throw FormatError("bad timestamp '" + std::string(text) + "'");
  }
  const int y = read_int(text, 0, 4);
  const int mo = read_int(text, 5, 2);
  const int d = read_int(text, 8, 2);
  int hh = 0, mm = 0, ss = 0;
  std::size_t pos = 10;
  if (pos < text.size() && (text[pos] == 'T' || text[pos] == ' ')) {
    hh = read_int(text, 11, 2);
    if (text.size() < 19 || text[13] != ':' || text[16] != ':') {
      throw FormatError("bad timestamp '" + std::string(text) + "'");
    }
    mm = read_int(text, 14, 2);
    ss = read_int(text, 17, 2);
    pos = 19;
    if (pos < text.size() && text[pos] == '.') {
      ++pos;
      while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9') ++pos;
    }
    const auto rest = text.substr(pos);
    if (!(rest.empty() || rest == "Z" || rest == "+00:00")) {
      throw FormatError("unsupported timezone in '" + std::string(text) + "'");
    }
  } else if (pos != text.size()) {
    throw FormatError("bad timestamp '" + std::string(text) + "'");
  }
  if (mo < 1 || mo > 12 || d < 1 || d > 31 || hh > 23 || mm > 59 || ss > 60) {
    throw FormatError("timestamp out of range '" + std::string(text) + "'");
  }
  return days_from_civil(y, static_cast<unsigned>(mo), static_cast<unsigned>(d)) * 86400 + hh * 3600 + mm * 60 + ss;
}

std::string format_utc(UtcSeconds t) {
  std::int64_t days = t / 86400;
  std::int64_t secs = t % 86400;
  if (secs < 0) {
    secs += 86400;
    --days;
  }
  int y;
  unsigned m, d;
  civil_from_days(days, y, m, d);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", y, m, d, static_cast<int>(secs / 3600),
                static_cast<int>(secs / 60 % 60), static_cast<int>(secs % 60));
  return buf;
}

std::string format_date(UtcSeconds t) { return format_utc(t).substr(0, 10); }

}  // namespace tiad
