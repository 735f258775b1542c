#pragma once

// Speed derivation, median low-pass filtering, stop detection and
// cross-survey hotspot clustering.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "trackkit/errors.hpp"
#include "trackkit/track.hpp"

namespace trackkit::behaviour {

using geodesy::ProjectedPoint;
using geodesy::planar_distance;
using track::ProjectedFix;

struct SpeedSeries {
    std::vector<UnixTime> timestamps;
    std::vector<double> raw_speed;       // m/s
    std::vector<double> filtered_speed;  // empty until median_filter runs
    int filter_window = 0;               // seconds (odd sample count at 1 Hz)
};

inline SpeedSeries speed_series(std::span<const ProjectedFix> fixes) {
    if (fixes.size() < 2) throw TooFewFixes("speed needs >= 2 fixes");
    SpeedSeries s;
    s.timestamps.reserve(fixes.size());
    s.raw_speed.reserve(fixes.size());
    for (std::size_t i = 1; i < fixes.size(); ++i) {
        const double dt = double(fixes[i].time - fixes[i - 1].time);
        if (dt <= 0) throw TooFewFixes("timestamps not strictly increasing");
        if (i == 1) {
            s.timestamps.push_back(fixes[0].time);
            s.raw_speed.push_back(0.0);  // placeholder, duplicated below
        }
        s.timestamps.push_back(fixes[i].time);
        s.raw_speed.push_back(planar_distance(fixes[i].pt, fixes[i - 1].pt) / dt);
    }
    s.raw_speed[0] = s.raw_speed[1];  // first epoch duplicates the second
    return s;
}

// Sliding median; edges handled by symmetrically shrinking the window.
inline std::vector<double> median_filter_values(std::span<const double> x, int window) {
    if (window < 3 || window % 2 == 0)
        throw WindowTooLarge("median window must be odd and >= 3");
    if (static_cast<std::size_t>(window) > x.size())
        throw WindowTooLarge("median window exceeds series length");
    const std::size_t n = x.size();
    std::vector<double> out(n);
    std::vector<double> buf;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t half = std::min({static_cast<std::size_t>(window / 2), i, n - 1 - i});
        buf.assign(x.begin() + (i - half), x.begin() + (i + half + 1));
        std::nth_element(buf.begin(), buf.begin() + half, buf.end());
        out[i] = buf[half];
    }
    return out;
}

inline SpeedSeries median_filter(SpeedSeries s, int window = 5) {
    s.filtered_speed = median_filter_values(s.raw_speed, window);
    s.filter_window = window;
    return s;
}

struct StopEvent {
    UnixTime start = 0;
    UnixTime end = 0;
    double duration = 0.0;      // s, end - start
    ProjectedPoint centroid;
    double dispersion = 0.0;    // m, RMS distance of member fixes to centroid
    std::string survey_id;
};

// Maximal runs of filtered speed below the threshold lasting at least
// min_duration. Fixes and speed series must share timestamps.
inline std::vector<StopEvent> detect_stops(std::span<const ProjectedFix> fixes,
                                           const SpeedSeries& s, double speed_threshold,
                                           double min_duration = 10.0,
                                           const std::string& survey_id = {}) {
    const std::vector<double>& speed =
        s.filtered_speed.empty() ? s.raw_speed : s.filtered_speed;
    std::vector<StopEvent> events;
    const std::size_t n = speed.size();
    std::size_t i = 0;
    while (i < n) {
        if (speed[i] >= speed_threshold) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j + 1 < n && speed[j + 1] < speed_threshold) ++j;
        const double dur = double(s.timestamps[j] - s.timestamps[i]);
        if (dur >= min_duration) {
            StopEvent ev;
            ev.start = s.timestamps[i];
            ev.end = s.timestamps[j];
            ev.duration = dur;
            ev.survey_id = survey_id;
            std::size_t count = 0;
            for (const auto& f : fixes) {
                if (f.time < ev.start || f.time > ev.end) continue;
                ev.centroid.easting += f.pt.easting;
                ev.centroid.northing += f.pt.northing;
                ++count;
            }
            ev.centroid.easting /= count;
            ev.centroid.northing /= count;
            double ss = 0.0;
            for (const auto& f : fixes) {
                if (f.time < ev.start || f.time > ev.end) continue;
                const double d = planar_distance(f.pt, ev.centroid);
                ss += d * d;
            }
            ev.dispersion = std::sqrt(ss / count);
            events.push_back(std::move(ev));
        }
        i = j + 1;
    }
    return events;
}

struct Hotspot {
    ProjectedPoint centroid;    // dwell-time-weighted mean of member centroids
    double radius = 0.0;        // max member distance to centroid
    std::vector<StopEvent> members;
    double total_dwell = 0.0;   // s
    std::size_t survey_count = 0;
};

// Agglomerative single linkage with a fixed cutoff (union-find over pairs
// within merge_radius).
inline std::vector<Hotspot> cluster_hotspots(std::span<const StopEvent> events,
                                             double merge_radius) {
    const std::size_t n = events.size();
    std::vector<std::size_t> parent(n);
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    auto find = [&](std::size_t a) {
        while (parent[a] != a) a = parent[a] = parent[parent[a]];
        return a;
    };
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = a + 1; b < n; ++b)
            if (planar_distance(events[a].centroid, events[b].centroid) <= merge_radius)
                parent[find(a)] = find(b);

    std::vector<Hotspot> out;
    std::vector<std::size_t> root_index(n, SIZE_MAX);
    for (std::size_t a = 0; a < n; ++a) {
        const std::size_t r = find(a);
        if (root_index[r] == SIZE_MAX) {
            root_index[r] = out.size();
            out.emplace_back();
        }
        Hotspot& h = out[root_index[r]];
        h.members.push_back(events[a]);
        h.total_dwell += events[a].duration;
        h.centroid.easting += events[a].duration * events[a].centroid.easting;
        h.centroid.northing += events[a].duration * events[a].centroid.northing;
    }
    for (auto& h : out) {
        if (h.total_dwell > 0) {
            h.centroid.easting /= h.total_dwell;
            h.centroid.northing /= h.total_dwell;
        } else {
            for (const auto& m : h.members) {
                h.centroid.easting += m.centroid.easting / h.members.size();
                h.centroid.northing += m.centroid.northing / h.members.size();
            }
        }
        for (const auto& m : h.members)
            h.radius = std::max(h.radius, planar_distance(m.centroid, h.centroid));
        std::vector<std::string> ids;
        for (const auto& m : h.members) ids.push_back(m.survey_id);
        std::sort(ids.begin(), ids.end());
        h.survey_count = std::unique(ids.begin(), ids.end()) - ids.begin();
    }
    return out;
}

}  // namespace trackkit::behaviour
