#pragma once

// GeoJSON / CSV / JSON writers for pipeline outputs, plus atomic file writes
// (temp + rename on the same filesystem).

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "trackkit/behaviour.hpp"
#include "trackkit/errors.hpp"
#include "trackkit/geodesy.hpp"
#include "trackkit/nmea.hpp"
#include "trackkit/quality.hpp"
#include "trackkit/track.hpp"

#include <nlohmann/json.hpp>

namespace trackkit::report {

using nlohmann::json;

inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write " + tmp.string());
        out << content;
        if (!out.flush()) throw Error("short write to " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

inline json point_feature(const geodesy::Projector& proj, const geodesy::ProjectedPoint& pt,
                          json properties) {
    auto [lat, lon] = proj.inverse(pt);
    return {{"type", "Feature"},
            {"geometry", {{"type", "Point"}, {"coordinates", {lon, lat}}}},
            {"properties", std::move(properties)}};
}

inline json stops_geojson(const std::vector<behaviour::StopEvent>& events,
                          const geodesy::Projector& proj) {
    json features = json::array();
    for (const auto& ev : events)
        features.push_back(point_feature(proj, ev.centroid,
                                         {{"duration_s", ev.duration},
                                          {"dispersion_m", ev.dispersion},
                                          {"survey_id", ev.survey_id},
                                          {"start", format_iso8601(ev.start)},
                                          {"end", format_iso8601(ev.end)}}));
    return {{"type", "FeatureCollection"}, {"features", features}};
}

inline json hotspots_geojson(const std::vector<behaviour::Hotspot>& hotspots,
                             const geodesy::Projector& proj) {
    json features = json::array();
    for (const auto& h : hotspots)
        features.push_back(point_feature(proj, h.centroid,
                                         {{"total_dwell_s", h.total_dwell},
                                          {"survey_count", h.survey_count},
                                          {"radius_m", h.radius},
                                          {"member_count", h.members.size()}}));
    return {{"type", "FeatureCollection"}, {"features", features}};
}

inline std::string stops_csv(const std::vector<behaviour::StopEvent>& events) {
    std::ostringstream out;
    out << "survey_id,start,end,duration_s,easting,northing,dispersion_m\n";
    out.precision(3);
    out << std::fixed;
    for (const auto& ev : events)
        out << ev.survey_id << ',' << format_iso8601(ev.start) << ',' << format_iso8601(ev.end)
            << ',' << ev.duration << ',' << ev.centroid.easting << ',' << ev.centroid.northing
            << ',' << ev.dispersion << '\n';
    return out.str();
}

inline std::string acf_csv(const quality::AcfSeries& s) {
    std::ostringstream out;
    out << "lag_s,r,significance_bound\n";
    for (std::size_t i = 0; i < s.lags.size(); ++i)
        out << s.lags[i] << ',' << s.values[i] << ',' << s.significance_bound << '\n';
    return out.str();
}

inline std::string precision_csv(const std::vector<quality::PrecisionReport>& reports) {
    std::ostringstream out;
    out << "window,n,sigma_east_m,sigma_north_m,mean_easting,mean_northing\n";
    out.precision(3);
    out << std::fixed;
    for (const auto& r : reports)
        out << quality::to_string(r.label) << ',' << r.n << ',' << r.sigma_east << ','
            << r.sigma_north << ',' << r.mean.easting << ',' << r.mean.northing << '\n';
    return out.str();
}

inline std::string fixes_csv(const std::vector<nmea::GnssFix>& fixes) {
    std::ostringstream out;
    out << "timestamp,latitude,longitude,quality,satellites,hdop,altitude_m\n";
    char buf[160];
    for (const auto& f : fixes) {
        std::snprintf(buf, sizeof(buf), "%s,%.9f,%.9f,%d,%d,%.2f,%.1f\n",
                      format_iso8601(f.timestamp).c_str(), f.latitude, f.longitude,
                      f.quality_code, f.satellites_used, f.hdop.value_or(0.0),
                      f.altitude_m.value_or(0.0));
        out << buf;
    }
    return out.str();
}

inline json parse_report_json(const nmea::ParseReport& r) {
    json j = {{"total_lines", r.total_lines},
              {"accepted", r.accepted},
              {"rejected_checksum", r.rejected_checksum},
              {"rejected_malformed", r.rejected_malformed},
              {"unsupported", r.unsupported}};
    if (r.first_timestamp) j["first_timestamp"] = format_iso8601(*r.first_timestamp);
    if (r.last_timestamp) j["last_timestamp"] = format_iso8601(*r.last_timestamp);
    return j;
}

inline json ellipse_json(const track::Ellipse& e) {
    return {{"level", e.level},
            {"semi_major_m", e.semi_major},
            {"semi_minor_m", e.semi_minor},
            {"orientation_deg", e.orientation_deg}};
}

inline json accuracy_json(const track::AccuracyStats& st) {
    json ellipses = json::array();
    for (const auto& e : st.ellipses) ellipses.push_back(ellipse_json(e));
    return {{"n", st.n},
            {"mean_east_m", st.mean_east},
            {"mean_north_m", st.mean_north},
            {"rmse_m", st.rmse},
            {"covariance", {{"ee", st.cov_ee}, {"nn", st.cov_nn}, {"en", st.cov_en}}},
            {"percentile_95_distance_m", st.percentile_95_distance},
            {"ellipses", ellipses}};
}

inline json precision_json(const std::vector<quality::PrecisionReport>& reports) {
    json arr = json::array();
    for (const auto& r : reports)
        arr.push_back({{"window", quality::to_string(r.label)},
                       {"n", r.n},
                       {"sigma_east_m", r.sigma_east},
                       {"sigma_north_m", r.sigma_north},
                       {"mean_easting", r.mean.easting},
                       {"mean_northing", r.mean.northing}});
    return arr;
}

}  // namespace trackkit::report
