#pragma once

// The per-survey processing pipeline: parse -> project -> residuals ->
// accuracy/precision/ACF -> stops. Accuracy needs a reference polyline and is
// skipped without one; behaviour analysis always runs.

#include <optional>
#include <string>
#include <vector>

#include "trackkit/behaviour.hpp"
#include "trackkit/geodesy.hpp"
#include "trackkit/nmea.hpp"
#include "trackkit/quality.hpp"
#include "trackkit/report_io.hpp"
#include "trackkit/track.hpp"

namespace trackkit::pipeline {

struct Thresholds {
    double speed_threshold = 0.9;   // m/s; sits between damped noise speed and walking pace
    double min_stop_duration = 10.0;  // s
    int filter_window = 5;            // s
    double merge_radius = 10.0;       // m
    int acf_max_lag = 120;            // s
    double static_window = 180.0;     // s
    std::size_t precision_first_n = 100;  // epochs per static window, 0 = all
};

struct Config {
    geodesy::ProjectionParams projection = geodesy::ProjectionParams::etrs89_utm32n();
    std::optional<track::ReferencePolyline> polyline;
    Thresholds thresholds;
    bool exclude_static_from_accuracy = false;
};

struct Result {
    nmea::ParseReport parse_report;
    std::vector<track::ProjectedFix> projected;   // usable fixes only
    std::optional<track::AccuracyStats> accuracy;
    std::optional<track::AccuracyStats> accuracy_mobile_only;  // static windows excluded
    std::vector<quality::PrecisionReport> precision;
    std::optional<quality::ResidualAcf> acf;
    std::vector<behaviour::StopEvent> stops;
    std::vector<std::string> notes;  // skipped stages and why
};

inline std::vector<track::ProjectedFix> project_fixes(const std::vector<nmea::GnssFix>& fixes,
                                                      const geodesy::Projector& proj) {
    std::vector<track::ProjectedFix> out;
    out.reserve(fixes.size());
    for (const auto& f : fixes) {
        if (!f.usable()) continue;
        out.push_back({f.timestamp, proj.forward(f.latitude, f.longitude)});
    }
    return out;
}

inline Result run(const std::vector<nmea::GnssFix>& fixes, const nmea::ParseReport& report,
                  const Config& cfg, const std::string& survey_id = {}) {
    const geodesy::Projector proj(cfg.projection);
    Result res;
    res.parse_report = report;
    res.projected = project_fixes(fixes, proj);
    if (res.projected.empty()) throw EmptyStream("no usable fixes after quality filter");

    if (cfg.polyline) {
        const auto rs = track::residual_series(res.projected, *cfg.polyline);
        res.accuracy = track::accuracy_stats(rs);
        try {
            res.acf = quality::residual_acf(rs, cfg.thresholds.acf_max_lag);
        } catch (const Error& e) {
            res.notes.push_back(std::string("acf skipped: ") + e.what());
        }
        if (cfg.exclude_static_from_accuracy) {
            const auto w = static_cast<UnixTime>(cfg.thresholds.static_window);
            const UnixTime lo = res.projected.front().time + w;
            const UnixTime hi = res.projected.back().time - w;
            std::vector<track::ProjectedFix> mobile;
            for (const auto& f : res.projected)
                if (f.time > lo && f.time < hi) mobile.push_back(f);
            if (mobile.size() >= 2)
                res.accuracy_mobile_only =
                    track::accuracy_stats(track::residual_series(mobile, *cfg.polyline));
        }
    } else {
        res.notes.push_back("accuracy skipped: no reference polyline configured");
    }

    try {
        quality::StaticWindowConfig swc;
        swc.duration_s = cfg.thresholds.static_window;
        for (const auto& w : quality::extract_static_windows(res.projected, swc))
            res.precision.push_back(
                quality::static_precision(w, cfg.thresholds.precision_first_n));
    } catch (const Error& e) {
        res.notes.push_back(std::string("precision skipped: ") + e.what());
    }

    try {
        auto speeds = behaviour::median_filter(behaviour::speed_series(res.projected),
                                               cfg.thresholds.filter_window);
        res.stops = behaviour::detect_stops(res.projected, speeds,
                                            cfg.thresholds.speed_threshold,
                                            cfg.thresholds.min_stop_duration, survey_id);
    } catch (const Error& e) {
        res.notes.push_back(std::string("stops skipped: ") + e.what());
    }
    return res;
}

inline report::json result_json(const Result& res, const Config& cfg) {
    const geodesy::Projector proj(cfg.projection);
    report::json j;
    j["parse_report"] = report::parse_report_json(res.parse_report);
    j["accuracy"] =
        res.accuracy ? report::accuracy_json(*res.accuracy) : report::json(nullptr);
    if (res.accuracy_mobile_only)
        j["accuracy_mobile_only"] = report::accuracy_json(*res.accuracy_mobile_only);
    j["precision"] = report::precision_json(res.precision);
    j["stops"] = report::stops_geojson(res.stops, proj);
    j["notes"] = res.notes;
    return j;
}

}  // namespace trackkit::pipeline
