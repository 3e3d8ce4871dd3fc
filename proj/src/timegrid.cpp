#include "turbcast/timegrid.hpp"

#include <cstdio>

#include "turbcast/common.hpp"

namespace turbcast {

namespace {

// Howard Hinnant's civil-date algorithms.
std::int64_t days_from_civil(int y, int m, int d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153u * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, int& y, int& m, int& d) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const std::int64_t yr = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
  m = static_cast<int>(mp + (mp < 10 ? 3 : -9));
  y = static_cast<int>(yr + (m <= 2));
}

bool parse_int(const std::string& s, std::size_t pos, std::size_t len, int& out) {
  if (pos + len > s.size()) return false;
  int v = 0;
  for (std::size_t i = pos; i < pos + len; ++i) {
    if (s[i] < '0' || s[i] > '9') return false;
    v = v * 10 + (s[i] - '0');
  }
  out = v;
  return true;
}

}  // namespace

std::int64_t parse_utc(const std::string& text) {
  // YYYY-MM-DD[T ]HH:MM[:SS][Z]
  int y, mo, d, h, mi, se = 0;
  const bool shape_ok =
      text.size() >= 16 && text[4] == '-' && text[7] == '-' &&
      (text[10] == 'T' || text[10] == ' ') && text[13] == ':' &&
      parse_int(text, 0, 4, y) && parse_int(text, 5, 2, mo) &&
      parse_int(text, 8, 2, d) && parse_int(text, 11, 2, h) &&
      parse_int(text, 14, 2, mi);
  if (!shape_ok) throw io_error("bad timestamp: '" + text + "'");
  std::size_t pos = 16;
  if (pos < text.size() && text[pos] == ':') {
    if (!parse_int(text, pos + 1, 2, se)) throw io_error("bad timestamp: '" + text + "'");
    pos += 3;
  }
  if (pos < text.size() && text[pos] == 'Z') ++pos;
  if (pos != text.size()) throw io_error("bad timestamp: '" + text + "'");
  if (mo < 1 || mo > 12 || d < 1 || d > 31 || h > 23 || mi > 59 || se > 59)
    throw io_error("bad timestamp: '" + text + "'");
  if (se != 0) throw io_error("timestamp not minute-aligned: '" + text + "'");
  return days_from_civil(y, mo, d) * 86400 + h * 3600 + mi * 60;
}

std::string format_utc(std::int64_t t) {
  std::int64_t days = t / 86400;
  std::int64_t sod = t % 86400;
  if (sod < 0) {
    sod += 86400;
    --days;
  }
  int y, m, d;
  civil_from_days(days, y, m, d);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02dZ", y, m, d,
                static_cast<int>(sod / 3600), static_cast<int>((sod / 60) % 60),
                static_cast<int>(sod % 60));
  return buf;
}

std::string utc_month(std::int64_t t) {
  std::int64_t days = t / 86400;
  if (t % 86400 < 0) --days;
  int y, m, d;
  civil_from_days(days, y, m, d);
  char buf[8];
  std::snprintf(buf, sizeof(buf), "%04d-%02d", y, m);
  return buf;
}

int seconds_of_day(std::int64_t t) {
  std::int64_t sod = t % 86400;
  if (sod < 0) sod += 86400;
  return static_cast<int>(sod);
}

std::string hex_u64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace turbcast
