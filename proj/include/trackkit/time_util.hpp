#pragma once

// UTC timestamp helpers. Timestamps are Unix seconds (int64); the NMEA data
// model works at 1 s resolution so no sub-second bookkeeping is kept.

#include <cstdint>
#include <cstdio>
#include <string>

namespace trackkit {

using UnixTime = std::int64_t;

// Howard Hinnant's civil date algorithms (public domain).
constexpr std::int64_t days_from_civil(int y, unsigned m, unsigned d) noexcept {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

struct CivilDate {
    int year;
    unsigned month;
    unsigned day;
};

constexpr CivilDate civil_from_days(std::int64_t z) noexcept {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    const unsigned d = doy - (153 * mp + 2) / 5 + 1;
    const unsigned m = mp + (mp < 10 ? 3 : -9);
    return {static_cast<int>(y + (m <= 2)), m, d};
}

constexpr UnixTime make_utc(int y, unsigned mo, unsigned d, unsigned h, unsigned mi,
                            unsigned s) noexcept {
    return days_from_civil(y, mo, d) * 86400 + h * 3600 + mi * 60 + s;
}

inline std::string format_iso8601(UnixTime t) {
    std::int64_t days = t / 86400;
    std::int64_t sod = t % 86400;
    if (sod < 0) {
        sod += 86400;
        --days;
    }
    const CivilDate cd = civil_from_days(days);
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%04d-%02u-%02uT%02lld:%02lld:%02lldZ", cd.year, cd.month,
                  cd.day, static_cast<long long>(sod / 3600),
                  static_cast<long long>((sod / 60) % 60), static_cast<long long>(sod % 60));
    return buf;
}

// Parses "YYYY-MM-DDTHH:MM:SS[Z]" (also accepts a space separator). Returns
// false on anything else.
inline bool parse_iso8601(const std::string& s, UnixTime& out) {
    int y = 0;
    unsigned mo = 0, d = 0, h = 0, mi = 0, sec = 0;
    char sep = 0;
    if (std::sscanf(s.c_str(), "%d-%u-%u%c%u:%u:%u", &y, &mo, &d, &sep, &h, &mi, &sec) != 7)
        return false;
    if ((sep != 'T' && sep != ' ') || mo < 1 || mo > 12 || d < 1 || d > 31 || h > 23 ||
        mi > 59 || sec > 60)
        return false;
    out = make_utc(y, mo, d, h, mi, sec);
    return true;
}

}  // namespace trackkit
