#pragma once

// Synthetic survey generator: constant-speed walk along a reference polyline
// with configurable mid-track stops and static lead/tail windows, plus a
// first-order Gauss-Markov (AR(1)) positioning error per axis and optional
// NMEA-grid quantization. Doubles as the oracle for the end-to-end tests.
//
// RNG: std::mt19937_64 (bit-specified by the standard) with Marsaglia polar
// normals, so a (scenario, model, seed) triple reproduces exactly.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "trackkit/errors.hpp"
#include "trackkit/geodesy.hpp"
#include "trackkit/nmea.hpp"
#include "trackkit/track.hpp"

namespace trackkit::simulate {

using geodesy::ProjectedPoint;
using track::ProjectedFix;
using track::ReferencePolyline;

struct ErrorModel {
    double sigma = 1.2;             // m, stationary per-axis std
    double correlation_time = 30.0; // s
    std::uint64_t seed = 1;
    bool quantize = true;           // snap emitted coordinates to the ddmm.mmmm grid
};

struct Stop {
    double along_track = 0.0;  // m from polyline start
    double duration = 10.0;    // s
};

struct Scenario {
    ReferencePolyline polyline;
    double walk_speed = 1.4;      // m/s
    std::vector<Stop> stops;
    double static_lead = 180.0;   // s
    double static_tail = 180.0;
    double sample_rate = 1.0;     // Hz; the whole toolkit assumes 1 Hz
};

// Point at arc length s, wrapping on closed polylines.
inline ProjectedPoint point_along(const ReferencePolyline& poly, double s) {
    const double total = poly.length();
    if (poly.closed) {
        s = std::fmod(s, total);
        if (s < 0) s += total;
    } else {
        s = std::clamp(s, 0.0, total);
    }
    for (std::size_t i = 0; i < poly.segment_count(); ++i) {
        const double seg_start = poly.cumulative_length[i];
        const ProjectedPoint& a = poly.segment_start(i);
        const ProjectedPoint& b = poly.segment_end(i);
        const double seg_len = geodesy::planar_distance(a, b);
        if (s <= seg_start + seg_len + 1e-12) {
            const double t = seg_len > 0 ? (s - seg_start) / seg_len : 0.0;
            return {a.easting + t * (b.easting - a.easting),
                    a.northing + t * (b.northing - a.northing)};
        }
    }
    return poly.closed ? poly.vertices.front() : poly.vertices.back();
}

class NormalSampler {
  public:
    explicit NormalSampler(std::uint64_t seed) : rng_(seed) {}
    double operator()() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double m = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * m;
        has_spare_ = true;
        return u * m;
    }

  private:
    double uniform() {
        // 53-bit mantissa from the top bits
        return double(rng_() >> 11) * 0x1.0p-53;
    }
    std::mt19937_64 rng_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

struct SimulatedSurvey {
    std::vector<ProjectedFix> true_path;
    std::vector<ProjectedFix> noisy_path;      // before quantization
    std::vector<nmea::GnssFix> fixes;          // geodetic, quantized if enabled
};

inline std::vector<ProjectedPoint> true_positions(const Scenario& sc) {
    if (sc.walk_speed <= 0) throw InvalidScenario("walk_speed must be positive");
    if (sc.sample_rate != 1.0) throw InvalidScenario("only 1 Hz sampling is supported");
    const double total = sc.polyline.length();
    for (const auto& st : sc.stops) {
        if (st.along_track < 0 || st.along_track > total)
            throw InvalidScenario("stop position outside polyline length");
        if (st.duration <= 0) throw InvalidScenario("stop duration must be positive");
    }

    std::vector<ProjectedPoint> path;
    auto hold = [&](double s, double seconds) {
        for (int k = 0; k < static_cast<int>(std::llround(seconds)); ++k)
            path.push_back(point_along(sc.polyline, s));
    };
    hold(0.0, sc.static_lead);
    double s = 0.0;
    std::size_t next_stop = 0;
    while (s < total) {
        path.push_back(point_along(sc.polyline, s));
        if (next_stop < sc.stops.size() && s >= sc.stops[next_stop].along_track) {
            hold(s, sc.stops[next_stop].duration);
            ++next_stop;
        }
        s += sc.walk_speed;
    }
    hold(sc.polyline.closed ? 0.0 : total, sc.static_tail);
    if (path.size() < 2) throw InvalidScenario("scenario produces fewer than 2 epochs");
    return path;
}

inline SimulatedSurvey simulate_survey(const Scenario& sc, const ErrorModel& em,
                                       const geodesy::Projector& proj,
                                       UnixTime start_time = make_utc(2021, 2, 3, 11, 31, 0)) {
    if (em.sigma < 0) throw InvalidScenario("sigma must be >= 0");
    if (em.correlation_time <= 0) throw InvalidScenario("correlation_time must be positive");

    const std::vector<ProjectedPoint> truth = true_positions(sc);
    const double phi = std::exp(-1.0 / em.correlation_time);
    const double innov = em.sigma * std::sqrt(1.0 - phi * phi);

    NormalSampler normal(em.seed);
    SimulatedSurvey out;
    double ee = em.sigma * normal();  // stationary start
    double en = em.sigma * normal();
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (i > 0) {
            ee = phi * ee + innov * normal();
            en = phi * en + innov * normal();
        }
        const UnixTime t = start_time + static_cast<UnixTime>(i);
        out.true_path.push_back({t, truth[i]});
        const ProjectedPoint noisy{truth[i].easting + ee, truth[i].northing + en};
        out.noisy_path.push_back({t, noisy});

        auto [lat, lon] = proj.inverse(noisy);
        if (em.quantize) {
            lat = nmea::quantize_degrees(lat);
            lon = nmea::quantize_degrees(lon);
        }
        nmea::GnssFix fix;
        fix.timestamp = t;
        fix.latitude = lat;
        fix.longitude = lon;
        fix.fix_quality = nmea::FixQuality::sps;
        fix.quality_code = 1;
        fix.satellites_used = 8;
        fix.hdop = 0.9;
        fix.altitude_m = 0.0;
        out.fixes.push_back(fix);
    }
    return out;
}

namespace detail {

inline std::string with_checksum(const std::string& body) {
    return "$" + body + "*" + [&] {
        static const char* d = "0123456789ABCDEF";
        const std::uint8_t c = nmea::checksum(body);
        return std::string{d[c >> 4], d[c & 0xF]};
    }();
}

inline std::string tod_field(UnixTime t) {
    const std::int64_t sod = ((t % 86400) + 86400) % 86400;
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%02lld%02lld%02lld", static_cast<long long>(sod / 3600),
                  static_cast<long long>((sod / 60) % 60), static_cast<long long>(sod % 60));
    return buf;
}

inline std::string date_field(UnixTime t) {
    const CivilDate cd = civil_from_days(t >= 0 ? t / 86400 : (t - 86399) / 86400);
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%02u%02u%02d", cd.day, cd.month, cd.year % 100);
    return buf;
}

}  // namespace detail

// RMC + GGA per epoch, coordinates at the format's ddmm.mmmm resolution.
// The two header comment lines carry the metadata the ingest service extracts
// by default ("# device:" / "# start:").
inline std::string emit_nmea(const std::vector<nmea::GnssFix>& fixes,
                             const std::string& device_name, UnixTime start_time) {
    std::ostringstream out;
    out << "# device: " << device_name << "\n";
    out << "# start: " << format_iso8601(start_time) << "\n";
    char buf[64];
    for (const auto& f : fixes) {
        const auto [lat_f, lat_h] = nmea::degrees_to_ddmm(f.latitude, true);
        const auto [lon_f, lon_h] = nmea::degrees_to_ddmm(f.longitude, false);
        const std::string tod = detail::tod_field(f.timestamp);

        std::string rmc = "GPRMC," + tod + ",A," + lat_f + "," + lat_h + "," + lon_f + "," +
                          lon_h + ",0.0,," + detail::date_field(f.timestamp) + ",,,A";
        out << detail::with_checksum(rmc) << "\r\n";

        std::snprintf(buf, sizeof(buf), "%d,%02d,%.1f,%.1f", f.quality_code,
                      f.satellites_used, f.hdop.value_or(0.0), f.altitude_m.value_or(0.0));
        std::string gga = "GPGGA," + tod + "," + lat_f + "," + lat_h + "," + lon_f + "," +
                          lon_h + "," + buf + ",M,0.0,M,,";
        out << detail::with_checksum(gga) << "\r\n";
    }
    return out.str();
}

}  // namespace trackkit::simulate
