#pragma once

// NMEA 0183 sentence/stream parsing and the quantization analysis of the
// ddmm.mmmm coordinate encoding. Tolerant by contract: malformed input is
// counted, never fatal (the only terminal error is a stream with zero fixes).

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "trackkit/errors.hpp"
#include "trackkit/time_util.hpp"

namespace trackkit::nmea {

struct RawSentence {
    std::string talker;                        // "GP", "GN", ... ("P" for proprietary)
    std::string type_code;                     // "GGA", "RMC", ...
    std::vector<std::string> fields;           // data fields, address field excluded
    std::optional<std::uint8_t> checksum_declared;
    std::size_t line_number = 0;
};

enum class FixQuality { no_fix, sps, differential, other };

struct GnssFix {
    UnixTime timestamp = 0;
    double latitude = 0.0;    // decimal degrees, signed
    double longitude = 0.0;   // decimal degrees, signed
    FixQuality fix_quality = FixQuality::no_fix;
    int quality_code = 0;     // raw GGA quality indicator
    int satellites_used = 0;
    std::optional<double> hdop;
    std::optional<double> altitude_m;

    bool usable() const { return fix_quality != FixQuality::no_fix; }
};

struct ParseReport {
    std::size_t total_lines = 0;
    std::size_t accepted = 0;            // sentences that fed the fix stream (GGA, RMC)
    std::size_t rejected_checksum = 0;
    std::size_t rejected_malformed = 0;
    std::size_t unsupported = 0;
    std::optional<UnixTime> first_timestamp;
    std::optional<UnixTime> last_timestamp;

    bool counts_consistent() const {
        return total_lines == accepted + rejected_checksum + rejected_malformed + unsupported;
    }
};

inline std::uint8_t checksum(std::string_view body) {
    std::uint8_t x = 0;
    for (char c : body) x ^= static_cast<std::uint8_t>(c);
    return x;
}

namespace detail {

inline bool is_ascii(std::string_view s) {
    for (char c : s)
        if (static_cast<unsigned char>(c) > 0x7F) return false;
    return true;
}

inline std::string_view strip_crlf(std::string_view line) {
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.remove_suffix(1);
    return line;
}

inline int hex_digit(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    return -1;
}

inline bool parse_double(const std::string& s, double& out) {
    if (s.empty()) return false;
    char* end = nullptr;
    out = std::strtod(s.c_str(), &end);
    return end == s.c_str() + s.size();
}

}  // namespace detail

inline RawSentence parse_sentence(std::string_view line, std::size_t line_number = 0) {
    line = detail::strip_crlf(line);
    if (line.empty() || line.front() != '$')
        throw MalformedSentence("sentence does not start with '$': " + std::string(line));
    if (!detail::is_ascii(line))
        throw MalformedSentence("non-ASCII byte in sentence");

    std::string_view body = line.substr(1);
    std::optional<std::uint8_t> declared;
    if (auto star = body.rfind('*'); star != std::string_view::npos) {
        std::string_view cs = body.substr(star + 1);
        if (cs.size() != 2)
            throw MalformedSentence("checksum field is not two hex digits: " + std::string(line));
        const int hi = detail::hex_digit(cs[0]);
        const int lo = detail::hex_digit(cs[1]);
        if (hi < 0 || lo < 0)
            throw MalformedSentence("checksum field is not hex: " + std::string(line));
        declared = static_cast<std::uint8_t>(hi * 16 + lo);
        body = body.substr(0, star);
    }
    if (declared && checksum(body) != *declared)
        throw ChecksumMismatch(checksum(body), *declared, std::string(line));

    RawSentence s;
    s.line_number = line_number;
    s.checksum_declared = declared;

    std::size_t pos = 0;
    std::vector<std::string> parts;
    while (true) {
        const auto comma = body.find(',', pos);
        parts.emplace_back(body.substr(pos, comma == std::string_view::npos ? comma : comma - pos));
        if (comma == std::string_view::npos) break;
        pos = comma + 1;
    }
    const std::string& address = parts.front();
    if (address.empty()) throw MalformedSentence("empty address field");
    if (address.front() == 'P') {
        s.talker = "P";
        s.type_code = address.substr(1);
    } else if (address.size() >= 5) {
        s.talker = address.substr(0, 2);
        s.type_code = address.substr(2);
    } else {
        throw MalformedSentence("address field too short: " + address);
    }
    s.fields.assign(parts.begin() + 1, parts.end());
    return s;
}

// "4807.038",'N' -> 48.1173.  Degree digits: everything before the last two
// integer digits (2 for latitude, 3 for longitude by construction).
inline double ddmm_to_degrees(std::string_view field, char hemisphere) {
    if (hemisphere != 'N' && hemisphere != 'S' && hemisphere != 'E' && hemisphere != 'W')
        throw MalformedCoordinate("bad hemisphere char");
    const auto dot = field.find('.');
    const std::size_t int_len = (dot == std::string_view::npos) ? field.size() : dot;
    if (int_len < 3 || int_len > 5)
        throw MalformedCoordinate("coordinate field has wrong digit count: " + std::string(field));
    for (std::size_t i = 0; i < field.size(); ++i) {
        if (i == dot) continue;
        if (!std::isdigit(static_cast<unsigned char>(field[i])))
            throw MalformedCoordinate("non-numeric coordinate: " + std::string(field));
    }
    const std::size_t deg_digits = int_len - 2;
    int degrees = 0;
    for (std::size_t i = 0; i < deg_digits; ++i) degrees = degrees * 10 + (field[i] - '0');
    double minutes = 0.0;
    if (!detail::parse_double(std::string(field.substr(deg_digits)), minutes))
        throw MalformedCoordinate("unparseable minutes: " + std::string(field));
    if (minutes >= 60.0)
        throw MalformedCoordinate("minutes >= 60: " + std::string(field));
    double value = degrees + minutes / 60.0;
    if (hemisphere == 'S' || hemisphere == 'W') value = -value;
    const double limit = (hemisphere == 'N' || hemisphere == 'S') ? 90.0 : 180.0;
    if (std::fabs(value) > limit)
        throw MalformedCoordinate("coordinate out of range: " + std::string(field));
    return value;
}

// Inverse of ddmm_to_degrees at the format's intrinsic resolution.
inline std::pair<std::string, char> degrees_to_ddmm(double value, bool is_latitude,
                                                    int frac_digits = 4) {
    const char hemi = is_latitude ? (value < 0 ? 'S' : 'N') : (value < 0 ? 'W' : 'E');
    double v = std::fabs(value);
    int degrees = static_cast<int>(v);
    double minutes = (v - degrees) * 60.0;
    // carry after rounding (59.99995 -> 60.0000)
    const double scale = std::pow(10.0, frac_digits);
    minutes = std::round(minutes * scale) / scale;
    if (minutes >= 60.0) {
        minutes -= 60.0;
        ++degrees;
    }
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%0*.*f", 3 + frac_digits, frac_digits, minutes);
    char out[64];
    std::snprintf(out, sizeof(out), "%0*d%s", is_latitude ? 2 : 3, degrees, buf);
    return {out, hemi};
}

// Snaps a signed decimal-degree value to the ddmm.mmmm grid.
inline double quantize_degrees(double value, int frac_digits = 4) {
    const double step = std::pow(10.0, -frac_digits) / 60.0;
    return std::round(value / step) * step;
}

struct QuantizationStep {
    double lat_step_m;  // ground distance of one LSB in the latitude field
    double lon_step_m;
};

// Ellipsoidal arc length of the 1e-4 arcminute LSB (WGS84).
inline QuantizationStep quantization_step(double latitude_deg) {
    constexpr double a = 6378137.0;
    constexpr double inv_f = 298.257223563;
    constexpr double f = 1.0 / inv_f;
    constexpr double e2 = f * (2.0 - f);
    const double phi = latitude_deg * M_PI / 180.0;
    const double s2 = std::sin(phi) * std::sin(phi);
    const double w = std::sqrt(1.0 - e2 * s2);
    const double meridian_radius = a * (1.0 - e2) / (w * w * w);
    const double parallel_radius = (a / w) * std::cos(phi);
    const double lsb_rad = (1e-4 / 60.0) * M_PI / 180.0;
    return {meridian_radius * lsb_rad, std::fabs(parallel_radius) * lsb_rad};
}

namespace detail {

// "123519" or "123519.00" -> seconds of day; -1 on failure.
inline std::int64_t parse_time_of_day(const std::string& f) {
    if (f.size() < 6) return -1;
    for (int i = 0; i < 6; ++i)
        if (!std::isdigit(static_cast<unsigned char>(f[i]))) return -1;
    const int h = (f[0] - '0') * 10 + (f[1] - '0');
    const int m = (f[2] - '0') * 10 + (f[3] - '0');
    const int s = (f[4] - '0') * 10 + (f[5] - '0');
    if (h > 23 || m > 59 || s > 60) return -1;
    return h * 3600 + m * 60 + s;
}

// RMC date field "ddmmyy" -> days since epoch; INT64_MIN on failure.
inline std::int64_t parse_rmc_date(const std::string& f) {
    if (f.size() != 6) return INT64_MIN;
    for (char c : f)
        if (!std::isdigit(static_cast<unsigned char>(c))) return INT64_MIN;
    const int d = (f[0] - '0') * 10 + (f[1] - '0');
    const int m = (f[2] - '0') * 10 + (f[3] - '0');
    const int y = (f[4] - '0') * 10 + (f[5] - '0');
    if (d < 1 || d > 31 || m < 1 || m > 12) return INT64_MIN;
    return days_from_civil(y + 2000, static_cast<unsigned>(m), static_cast<unsigned>(d));
}

}  // namespace detail

// Assembles fixes from GGA epochs; RMC supplies the date (GGA carries
// time-of-day only). Midnight rollover: a time-of-day drop of more than 12 h
// between consecutive epochs advances the date by one day.
inline std::pair<std::vector<GnssFix>, ParseReport> parse_stream(
    const std::vector<std::string>& lines) {
    std::vector<GnssFix> fixes;
    ParseReport report;

    std::int64_t date_days = 0;          // 1970-01-01 until an RMC says otherwise
    std::int64_t last_tod = -1;
    std::int64_t last_timestamp = INT64_MIN;

    for (std::size_t i = 0; i < lines.size(); ++i) {
        const std::string_view line = detail::strip_crlf(lines[i]);
        if (line.empty()) continue;
        ++report.total_lines;
        if (line.front() != '$') {
            ++report.unsupported;  // header/comment line, handled by ingest metadata
            continue;
        }
        RawSentence s;
        try {
            s = parse_sentence(line, i + 1);
        } catch (const ChecksumMismatch&) {
            ++report.rejected_checksum;
            continue;
        } catch (const MalformedSentence&) {
            ++report.rejected_malformed;
            continue;
        }

        if (s.type_code == "RMC") {
            if (s.fields.size() >= 9) {
                const std::int64_t d = detail::parse_rmc_date(s.fields[8]);
                if (d != INT64_MIN) {
                    date_days = d;
                    ++report.accepted;
                    continue;
                }
            }
            ++report.rejected_malformed;
            continue;
        }
        if (s.type_code != "GGA") {
            ++report.unsupported;
            continue;
        }
        if (s.fields.size() < 7) {
            ++report.rejected_malformed;
            continue;
        }

        const std::int64_t tod = detail::parse_time_of_day(s.fields[0]);
        if (tod < 0) {
            ++report.rejected_malformed;
            continue;
        }
        if (last_tod >= 0 && tod < last_tod - 12 * 3600) ++date_days;  // midnight rollover

        GnssFix fix;
        fix.timestamp = date_days * 86400 + tod;
        if (fix.timestamp <= last_timestamp) {
            // duplicate second (or out-of-order epoch): keep the first
            ++report.unsupported;
            continue;
        }

        int quality = 0;
        if (!s.fields[5].empty()) {
            try {
                quality = std::stoi(s.fields[5]);
            } catch (...) {
                ++report.rejected_malformed;
                continue;
            }
        }
        fix.quality_code = quality;
        fix.fix_quality = quality == 0   ? FixQuality::no_fix
                          : quality == 1 ? FixQuality::sps
                          : quality == 2 ? FixQuality::differential
                                         : FixQuality::other;
        if (!s.fields[1].empty() && !s.fields[2].empty() && !s.fields[3].empty() &&
            !s.fields[4].empty()) {
            try {
                fix.latitude = ddmm_to_degrees(s.fields[1], s.fields[2][0]);
                fix.longitude = ddmm_to_degrees(s.fields[3], s.fields[4][0]);
            } catch (const MalformedCoordinate&) {
                ++report.rejected_malformed;
                continue;
            }
        } else if (fix.fix_quality != FixQuality::no_fix) {
            ++report.rejected_malformed;  // claims a fix but carries no position
            continue;
        }
        if (!s.fields[6].empty()) {
            try {
                fix.satellites_used = std::stoi(s.fields[6]);
            } catch (...) {
                fix.satellites_used = 0;
            }
        }
        double v = 0.0;
        if (s.fields.size() > 7 && detail::parse_double(s.fields[7], v)) fix.hdop = v;
        if (s.fields.size() > 8 && detail::parse_double(s.fields[8], v)) fix.altitude_m = v;

        last_tod = tod;
        last_timestamp = fix.timestamp;
        if (!report.first_timestamp) report.first_timestamp = fix.timestamp;
        report.last_timestamp = fix.timestamp;
        ++report.accepted;
        fixes.push_back(fix);
    }

    if (fixes.empty()) throw EmptyStream("no fixes in stream");
    return {std::move(fixes), report};
}

inline std::vector<std::string> read_lines(std::istream& in) {
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    return lines;
}

inline std::pair<std::vector<GnssFix>, ParseReport> parse_stream(std::istream& in) {
    return parse_stream(read_lines(in));
}

}  // namespace trackkit::nmea
