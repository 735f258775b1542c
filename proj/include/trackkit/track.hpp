#pragma once

// Reference polyline, closest-point projection, residual series and accuracy
// statistics (confidence ellipses from the residual covariance).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <fstream>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "trackkit/errors.hpp"
#include "trackkit/geodesy.hpp"
#include "trackkit/time_util.hpp"

#include <nlohmann/json.hpp>

namespace trackkit::track {

using geodesy::ProjectedPoint;
using geodesy::planar_distance;

struct ProjectedFix {
    UnixTime time = 0;
    ProjectedPoint pt;
};

struct ReferencePolyline {
    std::vector<ProjectedPoint> vertices;
    bool closed = false;
    std::vector<double> cumulative_length;  // arc length at each vertex, [0] = 0
    double survey_error_bound = 0.19;       // m, reference-track survey quality

    std::size_t segment_count() const {
        return closed ? vertices.size() : vertices.size() - 1;
    }
    double length() const {
        double l = cumulative_length.back();
        if (closed) l += planar_distance(vertices.back(), vertices.front());
        return l;
    }
    const ProjectedPoint& segment_start(std::size_t i) const { return vertices[i]; }
    const ProjectedPoint& segment_end(std::size_t i) const {
        return vertices[(i + 1) % vertices.size()];
    }

    static ReferencePolyline from_vertices(std::vector<ProjectedPoint> vs, bool closed) {
        if (vs.size() < (closed ? 3u : 2u))
            throw TooFewVertices("polyline needs at least " +
                                 std::to_string(closed ? 3 : 2) + " vertices");
        ReferencePolyline p;
        p.closed = closed;
        p.vertices = std::move(vs);
        p.cumulative_length.resize(p.vertices.size());
        p.cumulative_length[0] = 0.0;
        for (std::size_t i = 1; i < p.vertices.size(); ++i) {
            const double d = planar_distance(p.vertices[i - 1], p.vertices[i]);
            if (d <= 1e-9)
                throw MalformedGeometry("repeated vertex at index " + std::to_string(i));
            p.cumulative_length[i] = p.cumulative_length[i - 1] + d;
        }
        if (closed && planar_distance(p.vertices.back(), p.vertices.front()) <= 1e-9)
            throw MalformedGeometry("closing segment has zero length");
        return p;
    }
};

// Implicit line a*x + b*y + c = 0 through two points, normalized so that
// a^2 + b^2 = 1.
struct SegmentLine {
    double a = 0.0, b = 0.0, c = 0.0;
    ProjectedPoint p0, p1;

    static SegmentLine through(const ProjectedPoint& p, const ProjectedPoint& q) {
        SegmentLine l;
        l.p0 = p;
        l.p1 = q;
        l.a = p.northing - q.northing;
        l.b = q.easting - p.easting;
        const double norm = std::hypot(l.a, l.b);
        if (norm == 0.0) throw MalformedGeometry("degenerate segment");
        l.a /= norm;
        l.b /= norm;
        l.c = -(l.a * p.easting + l.b * p.northing);
        return l;
    }
    double signed_distance(const ProjectedPoint& pt) const {
        return a * pt.easting + b * pt.northing + c;
    }
};

struct TrackProjection {
    ProjectedPoint foot;
    std::size_t segment_index = 0;
    double along_track = 0.0;     // m from polyline start
    double distance = 0.0;        // m, >= 0
    double residual_east = 0.0;   // fix - foot
    double residual_north = 0.0;
};

// Global minimum over all segments, foot of perpendicular clamped to the
// segment; ties go to the lowest segment index. The track has O(100) one
// meter segments, so the exhaustive scan is plenty.
inline TrackProjection closest_point_on_polyline(const ProjectedPoint& fix,
                                                 const ReferencePolyline& poly) {
    TrackProjection best;
    double best_d2 = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < poly.segment_count(); ++i) {
        const ProjectedPoint& a = poly.segment_start(i);
        const ProjectedPoint& b = poly.segment_end(i);
        const double vx = b.easting - a.easting, vy = b.northing - a.northing;
        const double len2 = vx * vx + vy * vy;
        double t = ((fix.easting - a.easting) * vx + (fix.northing - a.northing) * vy) / len2;
        t = std::clamp(t, 0.0, 1.0);
        const ProjectedPoint foot{a.easting + t * vx, a.northing + t * vy};
        const double de = fix.easting - foot.easting, dn = fix.northing - foot.northing;
        const double d2 = de * de + dn * dn;
        if (d2 < best_d2) {
            best_d2 = d2;
            best.foot = foot;
            best.segment_index = i;
            best.along_track = poly.cumulative_length[i] + t * std::sqrt(len2);
            best.residual_east = de;
            best.residual_north = dn;
        }
    }
    best.distance = std::sqrt(best_d2);
    return best;
}

struct ResidualSeries {
    std::vector<UnixTime> time;            // only usable epochs; gaps = missing seconds
    std::vector<TrackProjection> proj;

    std::size_t size() const { return time.size(); }
};

inline ResidualSeries residual_series(std::span<const ProjectedFix> fixes,
                                      const ReferencePolyline& poly) {
    ResidualSeries rs;
    for (const auto& f : fixes) {
        rs.time.push_back(f.time);
        rs.proj.push_back(closest_point_on_polyline(f.pt, poly));
    }
    if (rs.time.empty()) throw EmptySeries("no fixes to project");
    return rs;
}

struct Ellipse {
    double level = 0.0;        // confidence level in (0,1)
    double semi_major = 0.0;   // m
    double semi_minor = 0.0;   // m
    double orientation_deg = 0.0;  // major axis, CCW from east
};

struct AccuracyStats {
    std::size_t n = 0;
    double mean_east = 0.0;
    double mean_north = 0.0;
    double rmse = 0.0;  // RMS of residual distance
    double cov_ee = 0.0, cov_nn = 0.0, cov_en = 0.0;  // sample covariance, m^2
    std::array<Ellipse, 3> ellipses{};  // 68 / 95 / 99 %
    double percentile_95_distance = 0.0;
};

// chi-square quantile, 2 degrees of freedom: closed form -2 ln(1-p).
inline double chi2_quantile_2dof(double p) { return -2.0 * std::log(1.0 - p); }

inline Ellipse confidence_ellipse(double cov_ee, double cov_nn, double cov_en, double level) {
    // eigendecomposition of the 2x2 symmetric covariance
    const double tr = cov_ee + cov_nn;
    const double disc = std::sqrt(std::max(0.0, (cov_ee - cov_nn) * (cov_ee - cov_nn) / 4.0 +
                                                    cov_en * cov_en));
    const double l1 = tr / 2.0 + disc;  // major
    const double l2 = std::max(0.0, tr / 2.0 - disc);
    const double scale = std::sqrt(chi2_quantile_2dof(level));
    Ellipse e;
    e.level = level;
    e.semi_major = scale * std::sqrt(std::max(0.0, l1));
    e.semi_minor = scale * std::sqrt(l2);
    e.orientation_deg = 0.5 * std::atan2(2.0 * cov_en, cov_ee - cov_nn) * 180.0 / M_PI;
    return e;
}

inline AccuracyStats accuracy_stats(const ResidualSeries& rs) {
    const std::size_t n = rs.size();
    if (n < 2) throw InsufficientData("accuracy_stats needs n >= 2");
    AccuracyStats st;
    st.n = n;
    double se = 0.0, sn = 0.0, sd2 = 0.0;
    std::vector<double> dist;
    dist.reserve(n);
    for (const auto& p : rs.proj) {
        se += p.residual_east;
        sn += p.residual_north;
        sd2 += p.distance * p.distance;
        dist.push_back(p.distance);
    }
    st.mean_east = se / n;
    st.mean_north = sn / n;
    st.rmse = std::sqrt(sd2 / n);
    double cee = 0.0, cnn = 0.0, cen = 0.0;
    for (const auto& p : rs.proj) {
        const double de = p.residual_east - st.mean_east;
        const double dn = p.residual_north - st.mean_north;
        cee += de * de;
        cnn += dn * dn;
        cen += de * dn;
    }
    st.cov_ee = cee / (n - 1);
    st.cov_nn = cnn / (n - 1);
    st.cov_en = cen / (n - 1);
    const double levels[3] = {0.68, 0.95, 0.99};
    for (int i = 0; i < 3; ++i)
        st.ellipses[i] = confidence_ellipse(st.cov_ee, st.cov_nn, st.cov_en, levels[i]);
    std::sort(dist.begin(), dist.end());
    const double idx = 0.95 * (n - 1);
    const std::size_t lo = static_cast<std::size_t>(idx);
    const double frac = idx - lo;
    st.percentile_95_distance =
        lo + 1 < n ? dist[lo] * (1.0 - frac) + dist[lo + 1] * frac : dist[lo];
    return st;
}

namespace detail {

inline bool looks_geodetic(double a, double b) {
    return std::fabs(a) <= 90.0 && std::fabs(b) <= 180.0;
}

inline std::vector<ProjectedPoint> project_pairs(
    const std::vector<std::pair<double, double>>& pairs, const geodesy::Projector& proj) {
    // auto-detect: lat,lon rows if all values fit geodetic ranges
    bool geodetic = true;
    for (const auto& [a, b] : pairs)
        if (!looks_geodetic(a, b)) geodetic = false;
    std::vector<ProjectedPoint> out;
    out.reserve(pairs.size());
    for (const auto& [a, b] : pairs)
        out.push_back(geodetic ? proj.forward(a, b) : ProjectedPoint{a, b});
    return out;
}

}  // namespace detail

// GeoJSON LineString/Polygon or headerless CSV (lat,lon or easting,northing,
// auto-detected by magnitude). Closure: first vertex within 0.01 m of the
// last, or a Polygon ring.
inline ReferencePolyline load_polyline(const std::string& path, const geodesy::Projector& proj) {
    std::ifstream in(path);
    if (!in) throw MalformedGeometry("cannot open polyline file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    const std::string text = ss.str();

    std::vector<std::pair<double, double>> pairs;  // as stored in the file
    bool polygon = false;
    const auto first_nonspace = text.find_first_not_of(" \t\r\n");
    if (first_nonspace != std::string::npos && text[first_nonspace] == '{') {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(text);
        } catch (const nlohmann::json::exception& e) {
            throw MalformedGeometry(std::string("bad GeoJSON: ") + e.what());
        }
        if (j.value("type", "") == "Feature") j = j.at("geometry");
        const std::string type = j.value("type", "");
        nlohmann::json coords;
        if (type == "LineString") {
            coords = j.at("coordinates");
        } else if (type == "Polygon") {
            coords = j.at("coordinates").at(0);
            polygon = true;
        } else {
            throw MalformedGeometry("unsupported GeoJSON geometry: " + type);
        }
        for (const auto& c : coords)  // GeoJSON order is lon,lat
            pairs.emplace_back(c.at(1).get<double>(), c.at(0).get<double>());
    } else {
        std::istringstream lines(text);
        std::string line;
        while (std::getline(lines, line)) {
            if (line.empty() || line[0] == '#') continue;
            double a = 0.0, b = 0.0;
            if (std::sscanf(line.c_str(), "%lf , %lf", &a, &b) != 2 &&
                std::sscanf(line.c_str(), "%lf %lf", &a, &b) != 2)
                throw MalformedGeometry("unparseable CSV row: " + line);
            pairs.emplace_back(a, b);
        }
    }
    if (pairs.size() < 2) throw TooFewVertices("polyline file has fewer than 2 vertices");

    std::vector<ProjectedPoint> vs = detail::project_pairs(pairs, proj);
    bool closed = polygon;
    if (vs.size() >= 3 && planar_distance(vs.front(), vs.back()) <= 0.01) {
        closed = true;
    }
    if (closed) vs.pop_back();  // closing vertex is implicit
    return ReferencePolyline::from_vertices(std::move(vs), closed);
}

}  // namespace trackkit::track
