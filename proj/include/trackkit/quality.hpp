#pragma once

// Static-window precision (1-sigma east/north) and temporal autocorrelation
// of residual components.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "trackkit/errors.hpp"
#include "trackkit/track.hpp"

namespace trackkit::quality {

using track::ProjectedFix;
using track::ResidualSeries;
using geodesy::ProjectedPoint;

enum class WindowLabel { survey_start, survey_end, custom };

inline const char* to_string(WindowLabel l) {
    switch (l) {
        case WindowLabel::survey_start: return "survey_start";
        case WindowLabel::survey_end: return "survey_end";
        default: return "custom";
    }
}

struct StaticWindow {
    UnixTime start = 0;
    UnixTime end = 0;
    std::vector<ProjectedFix> fixes;
    WindowLabel label = WindowLabel::custom;

    double duration() const { return double(end - start); }
};

enum class WindowPlacement { start, end, both };

struct StaticWindowConfig {
    double duration_s = 180.0;  // three-minute convention
    WindowPlacement placement = WindowPlacement::both;
};

inline std::vector<StaticWindow> extract_static_windows(std::span<const ProjectedFix> survey,
                                                        const StaticWindowConfig& cfg) {
    if (survey.empty()) throw SurveyTooShort("empty survey");
    const UnixTime t0 = survey.front().time;
    const UnixTime t1 = survey.back().time;
    const double total = double(t1 - t0);
    const double needed =
        cfg.placement == WindowPlacement::both ? 2.0 * cfg.duration_s : cfg.duration_s;
    if (total <= needed)
        throw SurveyTooShort("survey spans " + std::to_string(total) +
                             " s, need > " + std::to_string(needed) + " s");

    std::vector<StaticWindow> out;
    auto cut = [&](UnixTime ws, UnixTime we, WindowLabel label) {
        StaticWindow w;
        w.start = ws;
        w.end = we;
        w.label = label;
        for (const auto& f : survey)
            if (f.time >= ws && f.time <= we) w.fixes.push_back(f);
        out.push_back(std::move(w));
    };
    const auto d = static_cast<UnixTime>(cfg.duration_s);
    if (cfg.placement != WindowPlacement::end) cut(t0, t0 + d, WindowLabel::survey_start);
    if (cfg.placement != WindowPlacement::start) cut(t1 - d, t1, WindowLabel::survey_end);
    return out;
}

struct PrecisionReport {
    double sigma_east = 0.0;   // m, 1 sigma
    double sigma_north = 0.0;
    std::size_t n = 0;
    ProjectedPoint mean;
    WindowLabel label = WindowLabel::custom;
};

// Sample (n-1) standard deviation of easting/northing. first_n > 0 truncates
// to the first first_n epochs (the field protocol evaluates 100 of ~180);
// first_n = 0 uses the whole window.
inline PrecisionReport static_precision(const StaticWindow& w, std::size_t first_n = 100) {
    std::span<const ProjectedFix> fixes(w.fixes);
    if (first_n > 0 && fixes.size() > first_n) fixes = fixes.subspan(0, first_n);
    const std::size_t n = fixes.size();
    if (n < 2) throw InsufficientData("static_precision needs n >= 2");
    PrecisionReport r;
    r.n = n;
    r.label = w.label;
    // accumulate relative to the first fix: UTM coordinates are ~5e6 m and
    // centimeter-scale spreads would otherwise lose digits in the sums
    const ProjectedPoint ref = fixes.front().pt;
    double me = 0.0, mn = 0.0;
    for (const auto& f : fixes) {
        me += f.pt.easting - ref.easting;
        mn += f.pt.northing - ref.northing;
    }
    me /= n;
    mn /= n;
    r.mean.easting = ref.easting + me;
    r.mean.northing = ref.northing + mn;
    double se = 0.0, sn = 0.0;
    for (const auto& f : fixes) {
        se += (f.pt.easting - ref.easting - me) * (f.pt.easting - ref.easting - me);
        sn += (f.pt.northing - ref.northing - mn) * (f.pt.northing - ref.northing - mn);
    }
    r.sigma_east = std::sqrt(se / (n - 1));
    r.sigma_north = std::sqrt(sn / (n - 1));
    return r;
}

enum class AcfComponent { east, north, distance };

struct AcfSeries {
    AcfComponent component = AcfComponent::east;
    std::vector<int> lags;       // 0..max_lag seconds
    std::vector<double> values;  // correlation coefficients
    std::size_t n = 0;           // regularized series length
    double significance_bound = 0.0;  // 1.96/sqrt(n)
};

namespace detail {

// Regularize onto the 1 Hz grid; up to 5% missing epochs are linearly
// interpolated, more is refused (interpolating big holes would fabricate
// correlation).
inline std::vector<double> regularize_1hz(std::span<const UnixTime> times,
                                          std::span<const double> values) {
    const UnixTime t0 = times.front(), t1 = times.back();
    const std::size_t n = static_cast<std::size_t>(t1 - t0) + 1;
    std::vector<double> grid(n, std::numeric_limits<double>::quiet_NaN());
    for (std::size_t i = 0; i < times.size(); ++i) {
        const UnixTime off = times[i] - t0;
        if (off < 0 || static_cast<std::size_t>(off) >= n)
            throw IrregularSampling("timestamps not monotonic");
        grid[static_cast<std::size_t>(off)] = values[i];
    }
    std::size_t missing = 0;
    for (double v : grid)
        if (std::isnan(v)) ++missing;
    if (missing * 20 > n)
        throw IrregularSampling(std::to_string(missing) + " of " + std::to_string(n) +
                                " epochs missing (> 5%)");
    // linear fill
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isnan(grid[i])) continue;
        std::size_t j = i;
        while (j < n && std::isnan(grid[j])) ++j;
        const double lo = grid[i - 1];  // first/last epochs always present
        const double hi = grid[j];
        for (std::size_t k = i; k < j; ++k)
            grid[k] = lo + (hi - lo) * double(k - i + 1) / double(j - i + 1);
        i = j;
    }
    return grid;
}

}  // namespace detail

// Biased (1/n) sample ACF: a valid correlation sequence, |r| <= 1, r(0) = 1.
inline AcfSeries acf(std::span<const UnixTime> times, std::span<const double> values,
                     int max_lag = 120, AcfComponent component = AcfComponent::east) {
    if (times.size() != values.size() || times.empty())
        throw SeriesTooShort("empty or inconsistent series");
    const std::vector<double> x = detail::regularize_1hz(times, values);
    const std::size_t n = x.size();
    if (n <= 3 * static_cast<std::size_t>(max_lag))
        throw SeriesTooShort("need n > 3*max_lag (" + std::to_string(n) + " <= " +
                             std::to_string(3 * max_lag) + ")");
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= n;
    double denom = 0.0;
    for (double v : x) denom += (v - mean) * (v - mean);
    if (denom == 0.0) throw DegenerateSeries("zero-variance series has no ACF");

    AcfSeries out;
    out.component = component;
    out.n = n;
    out.significance_bound = 1.96 / std::sqrt(double(n));
    for (int k = 0; k <= max_lag; ++k) {
        double num = 0.0;
        for (std::size_t t = 0; t + k < n; ++t)
            num += (x[t] - mean) * (x[t + k] - mean);
        out.lags.push_back(k);
        out.values.push_back(k == 0 ? 1.0 : num / denom);
    }
    return out;
}

struct ResidualAcf {
    AcfSeries east;
    AcfSeries north;
};

inline ResidualAcf residual_acf(const ResidualSeries& rs, int max_lag = 120) {
    std::vector<double> east, north;
    east.reserve(rs.size());
    north.reserve(rs.size());
    for (const auto& p : rs.proj) {
        east.push_back(p.residual_east);
        north.push_back(p.residual_north);
    }
    return {acf(rs.time, east, max_lag, AcfComponent::east),
            acf(rs.time, north, max_lag, AcfComponent::north)};
}

}  // namespace trackkit::quality
